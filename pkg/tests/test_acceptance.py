"""End-to-end acceptance checks, one test per release criterion.

Each test prints a single PASS line with the measured value so the run log
doubles as an acceptance report (run with `pytest -v` for one line per
criterion).
"""

import json
import math
import time

import numpy as np
import pytest

from handguard import data_path, scenario_path
from handguard.analysis import (
    ConfusionMatrix,
    one_way_anova,
    paired_t_bonferroni,
    recognition_rates,
    regularized_incomplete_beta,
    rm_anova,
    t_two_sided_p,
)
from handguard.geometry import RigidTransform, rotation_from_axis_angle
from handguard.gimbal import GearParams, MarkerDeltas, marker_deltas, motor_deltas
from handguard.haptics import ALL_PATTERNS, PatternId, pattern_frequency
from handguard.marker_pose import (
    CameraIntrinsics,
    estimate_pose,
    synthesize_observation,
)
from handguard.safety import (
    CommandKind,
    Point3,
    SafetyState,
    SafetyZones,
    max_robot_speed,
    step,
)
from handguard.sim import Scenario, run

from test_analysis import betainc_quadrature


def elapsed_guard(t0, limit, label):
    dt = time.monotonic() - t0
    assert dt < limit, f"{label} took {dt:.1f} s (limit {limit} s)"
    return dt


def default_doc(**overrides):
    doc = json.loads(scenario_path("default.json").read_text())
    doc.update(overrides)
    return doc


def test_c01_volar_recognition_mean():
    t0 = time.monotonic()
    matrix = ConfusionMatrix.from_csv(data_path("confusion_volar.csv"))
    _, mean = recognition_rates(matrix)
    assert mean == pytest.approx(0.756, abs=0.005)
    dt = elapsed_guard(t0, 1.0, "criterion 1")
    print(f"PASS C1: volar mean recognition {mean:.4f} (target 0.756 +/- 0.005, {dt:.2f} s)")


def test_c02_dorsal_matrix_consistency():
    t0 = time.monotonic()
    matrix = ConfusionMatrix.from_csv(data_path("confusion_dorsal.csv"))
    _, mean = recognition_rates(matrix)
    assert mean == pytest.approx(0.709, abs=0.005)
    # documented known difference: a commonly quoted summary value of 66.6 %
    # does not match the matrix diagonal; assert the gap is real rather than
    # silently picking one of the two numbers
    assert abs(mean - 0.666) > 0.03
    dt = elapsed_guard(t0, 1.0, "criterion 2")
    print(f"PASS C2: dorsal matrix mean {mean:.4f} (0.709 +/- 0.005; "
          f"documented difference from prose 0.666, {dt:.2f} s)")


def test_c03_pattern_frequencies_exact():
    t0 = time.monotonic()
    expected = {
        "1H": 2.0, "2H": 2.0, "3H": 10 / 3, "4H": 10 / 3, "5H": 10.0,
        "1L": 1.0, "2L": 1.0, "3L": 5 / 3, "4L": 5 / 3, "5L": 5.0,
    }
    assert len(ALL_PATTERNS) == 10
    for p in ALL_PATTERNS:
        assert pattern_frequency(p) == expected[str(p)], str(p)
    dt = elapsed_guard(t0, 1.0, "criterion 3")
    print(f"PASS C3: all 10 pattern frequencies exact ({dt:.2f} s)")


def test_c04_gear_round_trip():
    t0 = time.monotonic()
    # substitution examples at the default ratios 0.5/0.5/0.5
    out = motor_deltas(MarkerDeltas(1.0, 0.0))
    assert (out.d_theta_a, out.d_theta_b) == (0.25, 0.25)
    out = motor_deltas(MarkerDeltas(0.0, 1.0))
    assert (out.d_theta_a, out.d_theta_b) == (0.5, -0.5)
    rng = np.random.default_rng(100)
    n = 100_000
    worst = 0.0
    p = rng.uniform(-10, 10, n)
    c = rng.uniform(-10, 10, n)
    ratios = rng.uniform(0.05, 5.0, (n, 3))
    for i in range(n):
        g = GearParams(*ratios[i])
        back = marker_deltas(motor_deltas(MarkerDeltas(p[i], c[i]), g), g)
        worst = max(worst, abs(back.d_theta_p - p[i]), abs(back.d_theta_c - c[i]))
    assert worst < 1e-12
    dt = elapsed_guard(t0, 5.0, "criterion 4")
    print(f"PASS C4: 1e5 gear round trips, worst error {worst:.2e} < 1e-12 ({dt:.2f} s)")


def test_c05_transform_chain_oracle():
    t0 = time.monotonic()
    from handguard.geometry import hand_in_robot_base

    rng = np.random.default_rng(200)
    worst = 0.0
    for _ in range(10_000):
        frames = []
        for _ in range(2):
            r = rotation_from_axis_angle(rng.normal(size=3), rng.uniform(-np.pi, np.pi))
            frames.append(RigidTransform(r, rng.uniform(-2, 2, size=3)))
        a, b = frames
        ha, hb = np.eye(4), np.eye(4)
        ha[:3, :3], ha[:3, 3] = a.rotation, a.translation
        hb[:3, :3], hb[:3, 3] = b.rotation, b.translation
        expected = np.linalg.inv(hb) @ ha
        got = hand_in_robot_base(a, b).as_matrix()
        worst = max(worst, float(np.abs(got - expected).max()))
    assert worst < 1e-12
    dt = elapsed_guard(t0, 5.0, "criterion 5")
    print(f"PASS C5: 1e4 transform chains vs 4x4 oracle, worst {worst:.2e} ({dt:.2f} s)")


def test_c06_pose_estimation_round_trip():
    t0 = time.monotonic()
    k = CameraIntrinsics()
    side = 0.04
    rng = np.random.default_rng(42)

    def random_pose():
        r = rotation_from_axis_angle(rng.normal(size=3), rng.uniform(-0.6, 0.6))
        t = np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.15, 0.15),
                      rng.uniform(0.6, 1.4)])
        return RigidTransform(r, t)

    def rot_err(ra, rb):
        c = (np.trace(ra.T @ rb) - 1.0) / 2.0
        return math.acos(min(1.0, max(-1.0, c)))

    worst_rot, worst_trans = 0.0, 0.0
    for _ in range(1000):
        truth = random_pose()
        est = estimate_pose(synthesize_observation(truth, side, k), side, k)
        worst_rot = max(worst_rot, rot_err(est.pose.rotation, truth.rotation))
        worst_trans = max(worst_trans, float(
            np.abs(est.pose.translation - truth.translation).max()))
    assert worst_rot < 1e-6 and worst_trans < 1e-6

    import pathlib
    bounds = json.loads(
        (pathlib.Path(__file__).parent / "fixtures" / "pose_noise_bounds.json")
        .read_text()
    )
    rng = np.random.default_rng(42)
    te, re = [], []
    for i in range(200):
        truth = random_pose()
        est = estimate_pose(
            synthesize_observation(truth, side, k, pixel_noise_sigma=0.5,
                                   seed=1000 + i), side, k)
        te.append(float(np.linalg.norm(est.pose.translation - truth.translation)))
        re.append(math.degrees(rot_err(est.pose.rotation, truth.rotation)))
    p95_t, p95_r = float(np.percentile(te, 95)), float(np.percentile(re, 95))
    assert p95_t <= bounds["p95_translation_m"]
    assert p95_r <= bounds["p95_rotation_deg"]
    dt = elapsed_guard(t0, 30.0, "criterion 6")
    print(f"PASS C6: 1000 noiseless round trips < 1e-6; noisy p95 "
          f"{p95_t:.4f} m / {p95_r:.1f} deg within fixture bounds ({dt:.2f} s)")


def test_c07_safety_soundness():
    t0 = time.monotonic()
    zones = SafetyZones()
    hand = Point3(0.5, 0.0, 0.0)
    origin = Point3(0.0, 0.0, 0.0)
    # 1000 seeded random distance traces: halt count must equal the number
    # of entries into the critical zone from an unhalted state, exactly
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        distances = rng.uniform(0.05, 0.6, size=int(rng.integers(10, 60)))
        state = SafetyState()
        halts = 0
        for i, d in enumerate(distances):
            state, commands = step(state, float(d), hand, origin,
                                   np.zeros(3), i * 0.1, zones=zones)
            halts += sum(1 for c in commands if c.kind is CommandKind.HALT_ROBOT)
        entries, halted = 0, False
        for d in distances:
            if halted and d >= zones.critical_distance:
                halted = False
            if not halted and d < zones.critical_distance:
                entries += 1
                halted = True
        assert halts == entries, f"seed {seed}"

    # full simulations at robot speed <= the derived bound with default
    # human latencies never violate the critical distance
    # (mis-responses escape in a wrong direction, which the speed bound
    # cannot guarantee against, so they are disabled here)
    bound = max_robot_speed(zones, 2.41, 0.5, 0.3)
    violations = 0
    for seed in (7, 11):
        doc = default_doc(seed=seed, human={"mis_response_probability": 0.0})
        assert all(wp["speed"] <= bound for wp in doc["robot_waypoints"])
        _, metrics = run(Scenario.from_json_dict(doc))
        violations += metrics.critical_violations
    assert violations == 0
    dt = elapsed_guard(t0, 60.0, "criterion 7")
    print(f"PASS C7: 1000 trace soundness checks exact; 2 full runs at speed "
          f"<= {bound:.4f} m/s with 0 critical violations ({dt:.2f} s)")


def test_c08_response_time_model():
    t0 = time.monotonic()
    means = {"1L": 0.24, "2L": 0.61, "3L": 2.41, "5H": 0.85}
    directions = ["right", "left", "down", "back"]
    measured = {}
    for target in means:
        # rotate the mapping so the target pattern maps to the escape
        # direction this geometry always selects (right)
        others = [p for p in means if p != target]
        mapping = {target: "right"}
        mapping.update(dict(zip(others, directions[1:])))
        doc = default_doc(
            duration=40.0,
            mapping=mapping,
            human={"response_jitter_sigma": 0.0, "mis_response_probability": 0.0},
        )
        _, metrics = run(Scenario.from_json_dict(doc))
        times = metrics.measured_response_times.get(target, [])
        assert times, f"pattern {target} never measured"
        measured[target] = times[0]
        assert abs(times[0] - means[target]) <= 0.01 + 1e-9, target
    dt = elapsed_guard(t0, 10.0, "criterion 8")
    summary = ", ".join(f"{k}={v:.2f}" for k, v in measured.items())
    print(f"PASS C8: zero-jitter measured response times within one timestep "
          f"of the model means ({summary}; {dt:.2f} s)")


def test_c09_default_scenario_distance_trace():
    t0 = time.monotonic()
    scenario = Scenario.from_json_dict(default_doc())
    trace, metrics = run(scenario)
    distances = [rec.distance for rec in trace]
    crossings = sum(
        1 for a, b in zip(distances, distances[1:])
        if a >= scenario.zones.activation_distance > b
    )
    assert crossings >= 2
    for rec in trace:
        if not rec.robot_halted:
            assert rec.distance >= scenario.zones.critical_distance - 1e-9
    dt = elapsed_guard(t0, 10.0, "criterion 9")
    print(f"PASS C9: default scenario crosses the activation line {crossings} "
          f"times inward, min distance {metrics.min_distance:.4f} m while "
          f"unhalted ({dt:.2f} s)")


def test_c10_statistics_oracles():
    t0 = time.monotonic()
    # hand-computed sum-of-squares oracles
    r = one_way_anova([[1, 2, 3], [2, 3, 4], [3, 4, 5]])
    assert abs(r.f_statistic - 3.0) < 1e-9
    assert (r.df_between, r.df_within) == (2, 6)
    assert abs(r.p_value - 0.125) < 1e-9

    r = rm_anova([[1, 2, 3], [2, 4, 6], [3, 3, 3]])
    assert abs(r.f_statistic - 3.0) < 1e-9
    assert (r.df_between, r.df_within) == (2, 4)
    assert abs(r.p_value - 0.16) < 1e-9

    (pw,) = paired_t_bonferroni({"x": [3.0, 5.0, 7.0], "y": [2.0, 3.0, 4.0]},
                                [("x", "y")])
    assert abs(pw.t_statistic - 2.0 * math.sqrt(3.0)) < 1e-9
    assert abs(pw.raw_p - t_two_sided_p(2.0 * math.sqrt(3.0), 2)) < 1e-12

    # CDFs against numerical integration
    for a, b, x in [(50.0, 4.5, 0.95), (4.5, 50.0, 0.05), (2.0, 3.0, 0.6),
                    (45.0, 1.0, 0.99)]:
        assert abs(regularized_incomplete_beta(a, b, x)
                   - betainc_quadrature(a, b, x)) < 1e-6

    # df-shape checks for the reference layouts: 10 conditions with 11
    # observations each (between) and 11 participants x 10 conditions (RM)
    rng = np.random.default_rng(10)
    between = one_way_anova([rng.uniform(size=11) for _ in range(10)])
    assert (between.df_between, between.df_within) == (9, 100)
    within = rm_anova(rng.uniform(size=(11, 10)))
    assert (within.df_between, within.df_within) == (9, 90)
    dt = elapsed_guard(t0, 5.0, "criterion 10")
    print(f"PASS C10: ANOVA/RM/paired-t oracles within 1e-9, beta CDF within "
          f"1e-6, df shapes (9,100) and (9,90) ({dt:.2f} s)")
