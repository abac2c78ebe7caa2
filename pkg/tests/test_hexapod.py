import numpy as np
import pytest

from seahex.geometry import Vec3
from seahex.hexapod import (
    HexapodSensors,
    LoadThresholds,
    WinchMode,
    WinchParams,
    WinchState,
    grasp_confirmed,
    stability_check,
    target_centered,
    winch_step,
)


def sensors(front=None, rear=None, load=0.0, tilt=0.0):
    return HexapodSensors(ultra_front=front, ultra_rear=rear, load=load, tilt=tilt)


class TestTargetCentered:
    def test_both_in_range(self):
        assert target_centered(sensors(front=0.10, rear=0.12), grasp_range=0.15)

    def test_one_sensor_failed_redundancy(self):
        assert target_centered(sensors(front=None, rear=0.12), grasp_range=0.15)
        assert target_centered(sensors(front=0.12, rear=None), grasp_range=0.15)

    def test_both_failed_no_information(self):
        assert not target_centered(sensors(), grasp_range=0.15)

    def test_any_valid_out_of_range_fails(self):
        assert not target_centered(sensors(front=0.10, rear=0.30), grasp_range=0.15)
        assert not target_centered(sensors(front=None, rear=0.30), grasp_range=0.15)

    def test_symmetric_in_front_rear(self):
        rng = np.random.default_rng(50)
        for _ in range(200):
            f = float(rng.uniform(0, 0.4)) if rng.integers(2) else None
            r = float(rng.uniform(0, 0.4)) if rng.integers(2) else None
            assert target_centered(sensors(front=f, rear=r), 0.15) == target_centered(
                sensors(front=r, rear=f), 0.15
            )


class TestGraspConfirmed:
    def test_grounded_threshold(self):
        assert grasp_confirmed(sensors(load=20.0), airborne=False)

    def test_zero_load_never_confirms(self):
        assert not grasp_confirmed(sensors(load=0.0), airborne=False)
        assert not grasp_confirmed(sensors(load=0.0), airborne=True)

    def test_profile_selection(self):
        th = LoadThresholds(grounded=5.0, airborne=10.0)
        s = sensors(load=6.0)
        assert grasp_confirmed(s, airborne=False, thresholds=th)
        assert not grasp_confirmed(s, airborne=True, thresholds=th)

    def test_threshold_is_inclusive(self):
        th = LoadThresholds(grounded=5.0, airborne=10.0)
        assert grasp_confirmed(sensors(load=5.0), airborne=False, thresholds=th)
        assert grasp_confirmed(sensors(load=10.0), airborne=True, thresholds=th)

    def test_profile_ordering_enforced(self):
        with pytest.raises(ValueError):
            LoadThresholds(grounded=10.0, airborne=5.0)


class TestStability:
    def test_upright(self):
        assert stability_check(sensors(tilt=0.0), tilt_limit=0.35)

    def test_limit_is_inclusive(self):
        assert stability_check(sensors(tilt=0.35), tilt_limit=0.35)

    def test_beyond_limit(self):
        assert not stability_check(sensors(tilt=0.36), tilt_limit=0.35)


PARAMS = WinchParams(k_p=1.0, rate_max=0.5, dock_epsilon=0.01, dock_tolerance=0.05)
DT = 0.02


class TestWinch:
    def test_hold_only_zeroes_rate(self):
        w = WinchState(cable_length=1.0, rate=0.3)
        w2 = winch_step(w, 3.0, None, None, DT, WinchMode.Hold, PARAMS)
        assert w2.rate == 0.0 and w2.cable_length == 1.0

    def test_lower_approaches_height_monotonically(self):
        w = WinchState()
        lengths = []
        for _ in range(1000):
            w = winch_step(w, 3.0, None, None, DT, WinchMode.Lower, PARAMS)
            lengths.append(w.cable_length)
            assert abs(w.rate) <= PARAMS.rate_max + 1e-12
        assert all(b >= a - 1e-12 for a, b in zip(lengths, lengths[1:]))
        assert lengths[-1] == pytest.approx(3.0, abs=0.01)

    def test_raise_reels_to_zero_and_clamps(self):
        w = WinchState(cable_length=2.0)
        for _ in range(2000):
            w = winch_step(w, None, Vec3(0, 0, 0), None, DT, WinchMode.Raise, PARAMS)
            assert w.cable_length >= 0.0
        assert w.cable_length == pytest.approx(0.0, abs=1e-6)

    def test_dock_predicate(self):
        w = WinchState(cable_length=0.005)
        w2 = winch_step(w, None, Vec3(0.01, 0, 0), None, DT, WinchMode.Raise, PARAMS)
        assert w2.docked

    def test_no_dock_when_marker_off_tolerance(self):
        w = WinchState(cable_length=0.005)
        w2 = winch_step(w, None, Vec3(0.2, 0, 0), None, DT, WinchMode.Raise, PARAMS)
        assert not w2.docked

    def test_no_dock_without_marker(self):
        w = WinchState(cable_length=0.005)
        w2 = winch_step(w, None, None, None, DT, WinchMode.Raise, PARAMS)
        assert not w2.docked and w2.degraded

    def test_docked_implies_cable_short(self):
        rng = np.random.default_rng(51)
        for _ in range(500):
            w = WinchState(cable_length=float(rng.uniform(0, 0.1)))
            mode = [WinchMode.Lower, WinchMode.Raise, WinchMode.Hold][int(rng.integers(3))]
            marker = Vec3(float(rng.normal(0, 0.05)), float(rng.normal(0, 0.05)), 0)
            w2 = winch_step(w, float(rng.uniform(0, 5)), marker, None, DT, mode, PARAMS)
            if w2.docked:
                assert w2.cable_length <= PARAMS.dock_epsilon

    def test_lower_without_feedback_open_loop_half_rate(self):
        w = WinchState()
        w2 = winch_step(w, None, None, None, DT, WinchMode.Lower, PARAMS)
        assert w2.degraded
        assert w2.rate == pytest.approx(PARAMS.rate_max / 2.0)

    def test_lower_falls_back_to_ultrasonic_range(self):
        w = WinchState()
        w2 = winch_step(w, None, None, 2.0, DT, WinchMode.Lower, PARAMS)
        assert not w2.degraded
        assert w2.rate == pytest.approx(PARAMS.rate_max)
