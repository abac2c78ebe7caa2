import json
from dataclasses import replace

import numpy as np
import pytest

from seahex.cli import main
from seahex.photometry import GrayImage, load_pgm, save_pgm
from seahex.scenario import ChannelConfig, ScenarioConfig, save_scenario

@pytest.fixture()
def short_scenario(tmp_path):
    path = tmp_path / "short.json"
    save_scenario(replace(ScenarioConfig(), duration_s=120.0), str(path))
    return str(path)


class TestRun:
    def test_nominal_exit_zero_and_outputs(self, tmp_path, short_scenario):
        log = tmp_path / "run.jsonl"
        metrics = tmp_path / "metrics.json"
        code = main(["run", short_scenario, "--out", str(log), "--metrics", str(metrics)])
        assert code == 0
        m = json.loads(metrics.read_text())
        assert m["mission_outcome"] == "Complete"
        assert log.read_text().splitlines()[0].startswith('{"type": "meta"')

    def test_full_drop_times_out_exit_3(self, tmp_path):
        path = tmp_path / "lossy.json"
        save_scenario(
            replace(ScenarioConfig(), duration_s=40.0, channel=ChannelConfig(drop_prob=1.0, latency=1)),
            str(path),
        )
        assert main(["run", str(path)]) == 3

    def test_retry_exhaustion_aborts_exit_2(self, tmp_path):
        from seahex.scenario import ScenarioEvent

        path = tmp_path / "slips.json"
        events = tuple(ScenarioEvent(t=t, kind="slip") for t in (28.0, 38.0, 48.0, 58.0, 68.0))
        save_scenario(replace(ScenarioConfig(), events=events), str(path))
        assert main(["run", str(path)]) == 2

    def test_malformed_json_exit_1(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{oops")
        assert main(["run", str(path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_invalid_field_reports_path(self, tmp_path, capsys):
        path = tmp_path / "bad2.json"
        path.write_text(json.dumps({"wave": {"period": -1}}))
        assert main(["run", str(path)]) == 1
        assert "wave.period" in capsys.readouterr().err

    def test_seed_override_changes_log(self, tmp_path, short_scenario):
        logs = []
        for seed in (1, 2):
            log = tmp_path / f"log{seed}.jsonl"
            assert main(["run", short_scenario, "--seed", str(seed), "--out", str(log)]) == 0
            logs.append(log.read_bytes())
        assert logs[0] != logs[1]

    def test_same_seed_byte_identical(self, tmp_path, short_scenario):
        logs = []
        for name in ("x.jsonl", "y.jsonl"):
            log = tmp_path / name
            assert main(["run", short_scenario, "--out", str(log)]) == 0
            logs.append(log.read_bytes())
        assert logs[0] == logs[1]


class TestReplay:
    @pytest.fixture()
    def runlog(self, tmp_path, short_scenario):
        log = tmp_path / "run.jsonl"
        assert main(["run", short_scenario, "--out", str(log)]) == 0
        return log

    def test_self_log_validates(self, runlog):
        assert main(["replay", str(runlog), "--check-invariants"]) == 0

    def test_forged_illegal_stage_edge(self, tmp_path, runlog, capsys):
        lines = runlog.read_text().splitlines()
        forged = []
        for line in lines:
            obj = json.loads(line)
            if obj.get("type") == "rec" and obj["stage"] == "Search":
                obj["stage"] = "WinchUp"  # Takeoff -> WinchUp is not an edge
            forged.append(json.dumps(obj))
        bad = tmp_path / "forged.jsonl"
        bad.write_text("\n".join(forged) + "\n")
        assert main(["replay", str(bad), "--check-invariants"]) == 4
        assert "illegal stage edge" in capsys.readouterr().err

    def test_forged_pose_jump(self, tmp_path, runlog, capsys):
        lines = runlog.read_text().splitlines()
        forged = []
        hit = False
        for line in lines:
            obj = json.loads(line)
            if not hit and obj.get("type") == "rec" and obj["stage"] == "Search":
                obj["est"][0] += 5.0
                hit = True
            forged.append(json.dumps(obj))
        bad = tmp_path / "jump.jsonl"
        bad.write_text("\n".join(forged) + "\n")
        assert main(["replay", str(bad), "--check-invariants"]) == 4
        assert "continuity" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["replay", str(tmp_path / "nope.jsonl"), "--check-invariants"]) == 1


class TestEnhance:
    def test_constant_image_identity(self, tmp_path, capsys):
        src = tmp_path / "c.pgm"
        dst = tmp_path / "c_out.pgm"
        img = GrayImage.constant(8, 8, 100)
        src.write_bytes(save_pgm(img))
        assert main(["enhance", str(src), str(dst)]) == 0
        assert load_pgm(dst.read_bytes()) == img
        assert "degenerate" in capsys.readouterr().err

    def test_two_bin_image_mapping(self, tmp_path):
        src = tmp_path / "t.pgm"
        dst = tmp_path / "t_out.pgm"
        pixels = np.array([100] * 25 + [200] * 75, dtype=np.uint8).reshape(10, 10)
        src.write_bytes(save_pgm(GrayImage(pixels)))
        assert main(["enhance", str(src), str(dst), "--alpha", "0.5"]) == 0
        out = load_pgm(dst.read_bytes())
        assert set(out.pixels[pixels == 100].tolist()) == {141}
        assert set(out.pixels[pixels == 200].tolist()) == {255}

    def test_alpha_zero_rejected(self, tmp_path, capsys):
        src = tmp_path / "a.pgm"
        src.write_bytes(save_pgm(GrayImage.constant(4, 4, 10)))
        assert main(["enhance", str(src), str(tmp_path / "o.pgm"), "--alpha", "0"]) == 1

    def test_malformed_image(self, tmp_path):
        src = tmp_path / "bad.pgm"
        src.write_bytes(b"P5 2 2 255 \x00")
        assert main(["enhance", str(src), str(tmp_path / "o.pgm")]) == 1

    def test_dump_gamma_prints_256_lines(self, tmp_path, capsys):
        src = tmp_path / "g.pgm"
        rng = np.random.default_rng(77)
        src.write_bytes(save_pgm(GrayImage(rng.integers(0, 256, size=(8, 8)).astype(np.uint8))))
        assert main(["enhance", str(src), str(tmp_path / "o.pgm"), "--dump-gamma"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 256


class TestProto:
    def test_encode_heartbeat_golden(self, capsys):
        assert main(["proto", "--encode", '{"type": "Heartbeat", "stage": 0}', "--seq", "0", "--sys", "1"]) == 0
        assert capsys.readouterr().out.strip() == "fd0100010000ef9e"

    def test_encode_then_decode_round_trip(self, capsys):
        assert main(["proto", "--encode", '{"type": "Command", "opcode": 3}', "--seq", "5", "--sys", "2"]) == 0
        frame_hex = capsys.readouterr().out.strip()
        assert main(["proto", frame_hex]) == 0
        out = capsys.readouterr().out
        assert "Command" in out and "opcode=3" in out and "seq=5" in out

    def test_corrupt_hex_reports_bad_crc(self, capsys):
        good = "fd0100010000ef9e"
        corrupt = good[:-4] + "0000"
        assert main(["proto", corrupt]) == 1
        assert "BadCrc" in capsys.readouterr().out

    def test_unknown_type_rejected(self, capsys):
        assert main(["proto", "--encode", '{"type": "Nope"}']) == 1
