"""Command-line entry point.

Subcommands:

    run      simulate a scenario file, writing a JSON-Lines run log and a
             JSON metrics summary; exit 0 Complete, 2 Abort, 3 Timeout,
             1 on configuration errors
    replay   re-validate the run-long invariants of an existing log;
             exit 0 when all hold, 4 naming the first violation
    enhance  apply the histogram-weighted gamma enhancement to a binary
             PGM image
    proto    encode or decode telemetry frames as hex

All randomness flows from the scenario seed; the CLI adds none.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import comms
from .mission import MissionRunner, write_metrics, write_runlog
from .photometry import MalformedImage, agcwd_apply, agcwd_gamma, histogram, load_pgm, save_pgm
from .planning import LEGAL_EDGES, MissionStage
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2
EXIT_TIMEOUT = 3
EXIT_INVARIANT = 4


def _out_path(path: str) -> str:
    base = os.environ.get("SEAHEX_OUT_DIR")
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.scenario)
        if args.seed is not None:
            from dataclasses import replace

            cfg = replace(cfg, seed=args.seed)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runner = MissionRunner(cfg)
    records, metrics = runner.run()
    if args.out:
        write_runlog(_out_path(args.out), runner, records)
    if args.metrics:
        write_metrics(_out_path(args.metrics), metrics)
    print(
        f"outcome={metrics.mission_outcome} t={metrics.total_time_s:.2f}s "
        f"mean_err={metrics.mean_position_error_m:.3f}m switches={metrics.modality_switch_count} "
        f"retries={metrics.retry_count} frames={metrics.frames_sent}/{metrics.frames_dropped} dropped"
    )
    return {"Complete": EXIT_OK, "Abort": EXIT_ABORT, "Timeout": EXIT_TIMEOUT}[metrics.mission_outcome]


def _replay_fail(line_no: int, reason: str) -> int:
    print(f"invariant violated at line {line_no}: {reason}", file=sys.stderr)
    return EXIT_INVARIANT


def cmd_replay(args) -> int:
    try:
        with open(args.log, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    meta = None
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"error: line {i}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if obj.get("type") == "meta":
            meta = obj
        elif obj.get("type") == "rec":
            records.append((i, obj))

    print(f"{len(records)} records")
    if not args.check_invariants:
        return EXIT_OK
    if meta is None:
        print("error: no meta record in log", file=sys.stderr)
        return EXIT_CONFIG

    v_max = float(meta["v_max"])
    stage_names = {s.value for s in MissionStage}
    modalities = {"TagRelative", "OpticalFlow"}
    edges = {s.value: {t.value for t in targets} for s, targets in LEGAL_EDGES.items()}

    prev = None
    for line_no, rec in records:
        if rec["stage"] not in stage_names:
            return _replay_fail(line_no, f"unknown stage {rec['stage']!r}")
        if rec["modality"] not in modalities:
            return _replay_fail(line_no, f"unknown modality {rec['modality']!r}")
        if prev is not None:
            _, prev_rec = prev
            dt = rec["t"] - prev_rec["t"]
            if dt <= 0:
                return _replay_fail(line_no, "time not strictly increasing")
            if rec["stage"] != prev_rec["stage"] and rec["stage"] not in edges[prev_rec["stage"]]:
                return _replay_fail(
                    line_no, f"illegal stage edge {prev_rec['stage']} -> {rec['stage']}"
                )
            jump = math.dist(rec["est"], prev_rec["est"])
            if jump > v_max * dt + 1e-9:
                return _replay_fail(
                    line_no, f"continuity: pose jump {jump:.6f} m exceeds bound {v_max * dt:.6f} m"
                )
        prev = (line_no, rec)
    print("all invariants hold")
    return EXIT_OK


def cmd_enhance(args) -> int:
    if not args.alpha > 0:
        print("error: --alpha must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.input, "rb") as fh:
            img = load_pgm(fh.read())
    except (MalformedImage, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table = agcwd_gamma(histogram(img), args.alpha)
    out = agcwd_apply(img, args.alpha)
    with open(_out_path(args.output), "wb") as fh:
        fh.write(save_pgm(out))
    if table.fallback:
        print("degenerate histogram, image passed through unchanged", file=sys.stderr)
    if args.dump_gamma:
        for level, g in enumerate(table.gamma):
            print(f"{level} {g:.12f}")
    return EXIT_OK


def _parse_hex(text: str) -> bytes:
    cleaned = "".join(text.split())
    try:
        return bytes.fromhex(cleaned)
    except ValueError as exc:
        raise ValueError(f"invalid hex: {exc}") from None


_MSG_BUILDERS = {
    "Heartbeat": lambda d: comms.Heartbeat(stage=int(d["stage"])),
    "StateReport": lambda d: comms.StateReport(
        pose=tuple(float(v) for v in d["pose"]),
        grasp_state=int(d["grasp_state"]),
        load=float(d["load"]),
        tilt=float(d["tilt"]),
    ),
    "TargetLocation": lambda d: comms.TargetLocation(
        p_rel=tuple(float(v) for v in d["p_rel"]), track_id=int(d["track_id"])
    ),
    "Command": lambda d: comms.Command(opcode=int(d["opcode"])),
    "Ack": lambda d: comms.Ack(seq_acked=int(d["seq_acked"]), ok=int(d["ok"])),
}


def cmd_proto(args) -> int:
    if args.encode:
        try:
            spec = json.loads(args.encode)
            builder = _MSG_BUILDERS.get(spec.get("type"))
            if builder is None:
                raise ValueError(f"unknown message type {spec.get('type')!r}")
            msg = builder(spec)
            frame = comms.encode(msg, args.seq, args.sys)
        except (ValueError, KeyError, TypeError, comms.PayloadTooLarge) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(frame.hex())
        return EXIT_OK

    source = args.data
    if source is None:
        print("error: provide hex data or --encode", file=sys.stderr)
        return EXIT_CONFIG
    if os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            source = fh.read()
    try:
        data = _parse_hex(source)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    messages, errors = comms.decode_stream(data)
    for msg, seq, sys_id in messages:
        print(f"seq={seq} sys={sys_id} {type(msg).__name__} {msg}")
    for err in errors:
        print(f"{type(err).__name__}: {err}")
    return EXIT_OK if not errors else EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="seahex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario")
    p_run.add_argument("scenario", help="scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="run log path (JSON Lines)")
    p_run.add_argument("--metrics", default=None, help="metrics summary path (JSON)")
    p_run.set_defaults(func=cmd_run)

    p_replay = sub.add_parser("replay", help="validate a run log")
    p_replay.add_argument("log", help="run log path")
    p_replay.add_argument("--check-invariants", action="store_true", help="check run-long invariants")
    p_replay.set_defaults(func=cmd_replay)

    p_enh = sub.add_parser("enhance", help="enhance a binary PGM image")
    p_enh.add_argument("input")
    p_enh.add_argument("output")
    p_enh.add_argument("--alpha", type=float, default=0.5, help="weighting exponent (> 0)")
    p_enh.add_argument("--dump-gamma", action="store_true", help="print the 256-entry gamma table")
    p_enh.set_defaults(func=cmd_enhance)

    p_proto = sub.add_parser("proto", help="encode or decode telemetry frames")
    p_proto.add_argument("data", nargs="?", help="hex string or file of hex to decode")
    p_proto.add_argument("--encode", help='message JSON, e.g. \'{"type":"Heartbeat","stage":0}\'')
    p_proto.add_argument("--seq", type=int, default=0)
    p_proto.add_argument("--sys", type=int, default=comms.SYS_UAV)
    p_proto.set_defaults(func=cmd_proto)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
