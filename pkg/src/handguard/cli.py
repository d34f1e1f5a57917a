"""Command-line entry point: file-based simulation, pattern, pose,
calibration, and analysis workflows.

Exit codes: 0 success, 1 runtime data failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, haptics, marker_pose, safety, scenario_path, sim
from .geometry import RigidTransform

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE = 2


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(path)
    return p


def _read_intrinsics(path: str) -> marker_pose.CameraIntrinsics:
    with open(_require_file(path)) as fh:
        return marker_pose.CameraIntrinsics.from_json_dict(json.load(fh))


def _read_observations(path: str) -> list:
    """Parse `marker_id,u0,v0,...,u3,v3` lines; returns (line_no, obs-or-error)."""
    rows = []
    with open(_require_file(path)) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("marker_id"):
                continue
            try:
                parts = [float(x) for x in line.split(",")]
                if len(parts) != 9:
                    raise ValueError("expected 9 comma-separated values")
                obs = marker_pose.MarkerObservation(
                    marker_id=int(parts[0]),
                    corners=np.array(parts[1:]).reshape(4, 2),
                )
                rows.append((line_no, obs, None))
            except (ValueError, marker_pose.DegenerateCorners) as exc:
                rows.append((line_no, None, str(exc)))
    return rows


def cmd_simulate(args) -> int:
    path = args.scenario or str(scenario_path())
    try:
        with open(_require_file(path)) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        return _fail(f"scenario file not found: {path}", EXIT_USAGE)
    except json.JSONDecodeError as exc:
        return _fail(f"scenario JSON invalid: {exc}", EXIT_USAGE)
    if args.seed is not None:
        doc["seed"] = args.seed

    seeds = [doc.get("seed", 0)]
    if args.seeds:
        try:
            lo, hi = (int(x) for x in args.seeds.split(".."))
            seeds = list(range(lo, hi + 1))
        except ValueError:
            return _fail("--seeds expects a..b", EXIT_USAGE)

    for seed in seeds:
        doc["seed"] = seed
        try:
            scenario = sim.Scenario.from_json_dict(doc)
        except sim.ScenarioError as exc:
            return _fail(str(exc), EXIT_USAGE)
        trace, metrics = sim.run(scenario)
        suffix = f".{seed}" if len(seeds) > 1 else ""
        trace_path = _with_suffix(args.trace, suffix)
        metrics_path = _with_suffix(args.metrics, suffix)
        sim.write_trace_csv(trace, trace_path)
        sim.write_metrics_json(metrics, metrics_path)
        print(
            f"seed {seed}: min_distance {metrics.min_distance:.4f} m, "
            f"critical_violations {metrics.critical_violations}"
        )
    return EXIT_OK


def _with_suffix(path: str, suffix: str) -> str:
    if not suffix:
        return path
    p = Path(path)
    return str(p.with_name(p.stem + suffix + p.suffix))


def cmd_pattern(args) -> int:
    try:
        pattern = haptics.PatternId.parse(args.id)
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    timeline = haptics.render_pattern(pattern)
    print("motor,start_s,duration_s")
    for e in timeline.events:
        print(f"{e.motor_index},{e.start:.1f},{e.duration:.1f}")
    freq = haptics.pattern_frequency(pattern)
    print(f"duration {timeline.total_duration:.1f} s, frequency {freq:.4g} Hz")
    return EXIT_OK


def cmd_pose(args) -> int:
    try:
        intrinsics = _read_intrinsics(args.intrinsics)
        rows = _read_observations(args.observations)
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc}", EXIT_USAGE)
    except (ValueError, json.JSONDecodeError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    if not rows:
        return _fail("no observations in file", EXIT_DATA_ERROR)
    failures = 0
    for line_no, obs, parse_error in rows:
        if parse_error is not None:
            print(json.dumps({"line": line_no, "error": parse_error}))
            failures += 1
            continue
        try:
            est = marker_pose.estimate_pose(obs, args.marker_side, intrinsics)
        except (marker_pose.DegenerateCorners, marker_pose.NoConvergence,
                marker_pose.NonPositiveDepth) as exc:
            print(json.dumps({"line": line_no, "error": str(exc)}))
            failures += 1
            continue
        out = est.pose.to_json_dict()
        out.update({
            "line": line_no,
            "marker_id": obs.marker_id,
            "rms_px": est.rms_reprojection_error,
            "ambiguity_ratio": est.ambiguity_ratio,
        })
        print(json.dumps(out))
    return EXIT_DATA_ERROR if failures == len(rows) else EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        intrinsics = _read_intrinsics(args.intrinsics)
        rows = _read_observations(args.observations)
        if args.base_transform:
            with open(_require_file(args.base_transform)) as fh:
                base_marker_to_robot_base = RigidTransform.from_json_dict(json.load(fh))
        else:
            base_marker_to_robot_base = RigidTransform.identity()
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc}", EXIT_USAGE)
    except (ValueError, json.JSONDecodeError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    usable = [obs for _, obs, err in rows if err is None]
    if not usable:
        return _fail("no usable base-marker observation", EXIT_DATA_ERROR)
    try:
        base_in_camera = marker_pose.calibrate_base(
            usable[0], args.marker_side, intrinsics, base_marker_to_robot_base
        )
    except (marker_pose.DegenerateCorners, marker_pose.NoConvergence,
            marker_pose.NonPositiveDepth) as exc:
        return _fail(f"calibration failed: {exc}", EXIT_DATA_ERROR)
    payload = base_in_camera.to_json()
    if args.out:
        Path(args.out).write_text(payload + "\n")
    print(payload)
    return EXIT_OK


def _per_participant_rates(trials, side):
    """participant x pattern matrix of per-pattern recognition fractions."""
    participants = sorted({t.participant_id for t in trials if t.wrist_side is side})
    table = np.zeros((len(participants), len(analysis.PATTERN_ORDER)))
    for i, pid in enumerate(participants):
        for j, pattern in enumerate(analysis.PATTERN_ORDER):
            mine = [
                t for t in trials
                if t.participant_id == pid and t.wrist_side is side
                and str(t.actual) == pattern
            ]
            if not mine:
                raise analysis.MissingPattern(
                    f"participant {pid} has no trials for pattern {pattern}"
                )
            table[i, j] = sum(
                1 for t in mine if str(t.perceived) == pattern
            ) / len(mine)
    return table


def cmd_analyze(args) -> int:
    mode = args.mode
    try:
        if mode == "rates":
            matrix = analysis.ConfusionMatrix.from_csv(_require_file(args.input))
            diag, mean = analysis.recognition_rates(matrix)
            print(json.dumps({
                "per_pattern": dict(zip(analysis.PATTERN_ORDER, diag.tolist())),
                "mean": mean,
            }))
            return EXIT_OK

        side = analysis.WristSide(args.side)
        trials = analysis.read_trials_csv(_require_file(args.input))
        if mode == "confusion":
            matrix = analysis.confusion_from_trials(trials, side)
            print(json.dumps({
                "patterns": list(analysis.PATTERN_ORDER),
                "matrix": matrix.values.tolist(),
            }))
            return EXIT_OK
        table = _per_participant_rates(trials, side)
        if mode == "anova":
            result = analysis.one_way_anova([table[:, j] for j in range(table.shape[1])])
        elif mode == "rmanova":
            result = analysis.rm_anova(table)
        else:  # pairwise
            samples = {
                pattern: table[:, j].tolist()
                for j, pattern in enumerate(analysis.PATTERN_ORDER)
            }
            pairs = [
                (analysis.PATTERN_ORDER[i], analysis.PATTERN_ORDER[j])
                for i in range(10) for j in range(i + 1, 10)
            ]
            results = analysis.paired_t_bonferroni(samples, pairs)
            print(json.dumps([
                {
                    "pair": list(r.pair),
                    "t": r.t_statistic,
                    "raw_p": r.raw_p,
                    "corrected_p": r.corrected_p,
                    "significant": r.significant,
                }
                for r in results
            ]))
            return EXIT_OK
        print(json.dumps({
            "f": result.f_statistic,
            "df_between": result.df_between,
            "df_within": result.df_within,
            "p": result.p_value,
            "degenerate": result.degenerate,
        }))
        return EXIT_OK
    except FileNotFoundError as exc:
        return _fail(f"file not found: {exc}", EXIT_USAGE)
    except (ValueError, analysis.MissingPattern) as exc:
        return _fail(str(exc), EXIT_USAGE)


def cmd_speed_bound(args) -> int:
    if args.critical >= 0 and args.activation == args.critical:
        # zero-width alert zone leaves no reaction margin at all
        print(f"{0.0:.6f}")
        return EXIT_OK
    try:
        zones = safety.SafetyZones(
            activation_distance=args.activation,
            critical_distance=args.critical,
        )
        bound = safety.max_robot_speed(
            zones, args.response_time, args.hand_speed, args.clearance
        )
    except ValueError as exc:
        return _fail(str(exc), EXIT_USAGE)
    print(f"{bound:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="handguard",
        description="Marker mocap, vibrotactile guidance, and robot-safety simulation tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the collaborative-task simulation")
    p.add_argument("--scenario", help="scenario JSON (default: bundled default.json)")
    p.add_argument("--trace", default="trace.csv", help="output trace CSV path")
    p.add_argument("--metrics", default="metrics.json", help="output metrics JSON path")
    p.add_argument("--seed", type=int, help="seed override")
    p.add_argument("--seeds", help="seed sweep a..b, one independent run per seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pattern", help="print a vibration pattern timeline")
    p.add_argument("id", help="pattern id, e.g. 1H or 3L")
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("pose", help="estimate marker poses from corner observations")
    p.add_argument("observations", help="CSV: marker_id,u0,v0,u1,v1,u2,v2,u3,v3")
    p.add_argument("--intrinsics", required=True, help="camera intrinsics JSON")
    p.add_argument("--marker-side", type=float, default=0.04, help="marker side, m")
    p.set_defaults(func=cmd_pose)

    p = sub.add_parser("calibrate", help="estimate robot base pose in the camera frame")
    p.add_argument("observations", help="base-marker observation CSV")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--marker-side", type=float, default=0.04)
    p.add_argument("--base-transform",
                   help="JSON transform base-marker -> robot base (default identity)")
    p.add_argument("--out", help="write the calibration JSON here as well")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("analyze", help="confusion-matrix and recognition statistics")
    p.add_argument("mode", choices=["confusion", "rates", "anova", "rmanova", "pairwise"])
    p.add_argument("input", help="matrix CSV (rates) or trials CSV (other modes)")
    p.add_argument("--side", default="volar", choices=["volar", "dorsal"])
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("speed-bound", help="robot speed upper bound from zone geometry")
    p.add_argument("--activation", type=float, default=0.40)
    p.add_argument("--critical", type=float, default=0.25)
    p.add_argument("--response-time", type=float, required=True)
    p.add_argument("--hand-speed", type=float, default=0.5)
    p.add_argument("--clearance", type=float, default=0.30)
    p.set_defaults(func=cmd_speed_bound)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
