"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are
repeated in an "acceptance criteria" section at the end of the run.
"""
import math
import statistics
import time

import numpy as np
import pytest

from tinyml_sim import QTable, RandomStream, SimConfig, StreamId, run_episode
from tinyml_sim.cli import main
from tinyml_sim.policies import (HEADER_BYTES, PAYLOAD_BYTES, QHyperparams, q_update)
from tinyml_sim.report import run_bench
from tinyml_sim.retrain import accuracy_center, accuracy_halfwidth, simulate_retrain

RATIOS = [0.05, 0.1, 0.2, 0.4]
POLICIES = ["static", "dynamic", "autonomous"]
SEEDS = list(range(40))


@pytest.fixture(scope="module")
def bench():
    """Default benchmark with Q-training, timed end to end."""
    start = time.perf_counter()
    report, _ = run_bench(SimConfig(), RATIOS, POLICIES, SEEDS)
    return report, time.perf_counter() - start


def test_criterion_1_closed_form_baseline(report_line):
    # compile the random-stream kernel first; the limit is about simulation
    run_episode(SimConfig(anomaly_ratio=0.0, battery_capacity=10_000))
    start = time.perf_counter()
    lives = [run_episode(SimConfig(anomaly_ratio=0.0, policy=p, qtable=QTable())).battery_life_hours
             for p in POLICIES]
    elapsed = time.perf_counter() - start
    expected = 17_500_000 // 247
    ok = expected == 70_850 and all(life == expected for life in lives) and elapsed < 1.0
    report_line(1, "closed-form baseline", ok,
                f"lives {lives} vs {expected} h in {elapsed:.3f} s (limit 1 s)")
    assert ok


def _gaps(report, ratio, hi, lo):
    a, b = report.cells[hi, ratio], report.cells[lo, ratio]
    gap = a.mean - b.mean
    diffs = report.paired_differences(hi, lo, ratio)
    paired_se = statistics.stdev(diffs) / math.sqrt(len(diffs))
    return gap, max(a.sem, b.sem), paired_se


def test_criterion_2_ordering(bench, report_line):
    report, elapsed = bench
    details, ok = [], elapsed < 120
    for ratio in RATIOS:
        for hi, lo in (("autonomous", "dynamic"), ("dynamic", "static")):
            gap, sem, paired_se = _gaps(report, ratio, hi, lo)
            cell_ok = gap > 0 and gap >= 2 * sem and gap >= 2 * paired_se
            ok &= cell_ok
            details.append(f"{ratio:g}:{hi[:4]}-{lo[:4]}={gap:+.0f}h "
                           f"(2sem {2 * sem:.0f}, 2se_pair {2 * paired_se:.0f})")
    report_line(2, "ordering autonomous > dynamic > static", ok,
                f"{len(SEEDS)} seeds, {elapsed:.1f} s incl. training (limit 120 s); "
                + "; ".join(details))
    assert ok


def test_criterion_3_improvement_magnitudes(bench, report_line):
    report, _ = bench
    vs_static = report.improvement("static")
    vs_dynamic = report.improvement("dynamic")
    ok_s = abs(vs_static - 22.86) <= 8
    ok_d = abs(vs_dynamic - 10.86) <= 6
    report_line(3, "improvement magnitudes", ok_s and ok_d,
                f"vs static {vs_static:.2f}% (target 22.86 +/- 8), "
                f"vs dynamic {vs_dynamic:.2f}% (target 10.86 +/- 6)")
    assert ok_s, f"autonomous vs static {vs_static:.2f}% outside 22.86 +/- 8"
    assert ok_d, f"autonomous vs dynamic {vs_dynamic:.2f}% outside 10.86 +/- 6"


def test_criterion_4_absolute_scale(bench, report_line):
    report, _ = bench
    static5 = report.mean("static", 0.05)
    in_band = abs(static5 - 45_956) <= 0.3 * 45_956
    monotone = {p: all(report.mean(p, a) > report.mean(p, b) for a, b in zip(RATIOS, RATIOS[1:]))
                for p in POLICIES}
    ok = in_band and all(monotone.values())
    report_line(4, "absolute scale and monotone decrease", ok,
                f"static@5% {static5:.0f} h ({(static5 / 45_956 - 1) * 100:+.1f}% of 45,956; "
                f"band +/-30%), monotone {monotone}")
    assert ok


def test_criterion_5_retrain_envelope(report_line):
    start = time.perf_counter()
    stream = RandomStream(2024, StreamId.RETRAIN)
    worst = {}
    ok = True
    for n in (1, 5, 10, 35, 60):
        c, h = accuracy_center(n), 0.1 * 0.95**n
        lo, hi = max(0.0, c - h), min(1.0, c + h)
        acc = np.array([simulate_retrain(n, SimConfig().energy_table, stream).v_accuracy
                        for _ in range(10_000)])
        ok &= bool(((acc >= lo) & (acc <= hi)).all())
        worst[n] = float(np.abs(acc - c).max() / h)
    width60 = accuracy_halfwidth(60)
    elapsed = time.perf_counter() - start
    ok &= width60 < 0.005 and elapsed < 5
    report_line(5, "retrain model envelope", ok,
                f"max |acc-center|/halfwidth {({k: round(v, 4) for k, v in worst.items()})}, "
                f"half-width at n=60 {width60:.5f} (< 0.005), {elapsed:.2f} s (limit 5 s)")
    assert ok


def test_criterion_6_q_learning_correctness(report_line):
    # fixed 2-state / 2-action deterministic MDP
    nxt = {(0, 0): 1, (0, 1): 0, (1, 0): 1, (1, 1): 0}
    rew = {(0, 0): -1.0, (0, 1): 0.5, (1, 0): 1.5, (1, 1): -0.2}
    gamma = 0.9
    q_star = {k: 0.0 for k in nxt}
    for _ in range(5000):  # value iteration oracle, float64
        q_star = {k: rew[k] + gamma * max(q_star[(nxt[k], a)] for a in (0, 1)) for k in nxt}
    table = QTable()
    cell = {0: (3, 4), 1: (7, 2)}
    for _ in range(4000):
        for (s, a), s2 in nxt.items():
            q_update(table, cell[s], a, rew[s, a], cell[s2], 0.3, gamma)
    err = max(abs(float(table.values[cell[s]][a]) - v) for (s, a), v in q_star.items())

    frozen = QTable(np.random.default_rng(1).normal(size=(10, 10, 2)).astype(np.float32))
    before = frozen.to_bytes()
    for b in range(10):
        for c in range(10):
            q_update(frozen, (b, c), c % 2, 5.0, (c, b), 0.0, 0.95)
    unchanged = frozen.to_bytes() == before

    hp = QHyperparams()
    eps = []
    for _ in range(500):
        hp.decay()
        eps.append(hp.epsilon)
    product = 1.0
    schedule_ok = True
    for k, e in enumerate(eps, start=1):
        product *= 0.99
        schedule_ok &= e == product and math.isclose(e, 0.99**k, rel_tol=1e-12)
    ok = err < 1e-4 and unchanged and schedule_ok and abs(eps[99] - 0.3660) < 1e-4
    report_line(6, "Q-learning correctness", ok,
                f"max |Q - Q*| {err:.2e} (< 1e-4), alpha=0 unchanged {unchanged}, "
                f"eps schedule 0.99^k {schedule_ok}, eps(100) {eps[99]:.4f}")
    assert ok


def test_criterion_7_footprint(tmp_path, report_line):
    table = QTable()
    path = tmp_path / "q.bin"
    table.save(path)
    size = path.stat().st_size
    ok = table.nbytes == PAYLOAD_BYTES == 800 and size == HEADER_BYTES + 800 == 816
    report_line(7, "Q-table footprint", ok, f"payload {table.nbytes} B, file {size} B")
    assert ok


def test_criterion_8_determinism(tmp_path, report_line, capsys):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["bench", "--out", str(out)]) == 0
        runs.append(out)
    capsys.readouterr()
    names = ["results.csv", "summary.csv"] + sorted(p.name for p in runs[0].glob("qtable_*.bin"))
    same = {n: (runs[0] / n).read_bytes() == (runs[1] / n).read_bytes() for n in names}
    ok = len(names) == 6 and all(same.values())
    report_line(8, "determinism", ok, f"byte-identical {same}")
    assert ok
