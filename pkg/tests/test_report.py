import csv
import io
import math

import pytest

from tinyml_sim import SimConfig, run_sweep
from tinyml_sim.report import BenchReport, improvement, run_bench


def test_improvement_examples():
    assert improvement(36_057, 29_347) == pytest.approx(22.86, abs=0.005)
    assert improvement(36_057, 32_526) == pytest.approx(10.86, abs=0.005)
    assert math.isnan(improvement(1.0, 0.0))


@pytest.fixture(scope="module")
def report():
    cfg = SimConfig(train_episodes=300)
    rep, _ = run_bench(cfg, [0.1, 0.3], ["static", "dynamic", "autonomous"], [0, 1, 2])
    return rep


def test_cells(report):
    assert set(report.cells) == {(p, r) for p in report.policies for r in (0.1, 0.3)}
    cell = report.cells["static", 0.1]
    assert cell.n == 3 and cell.sem == pytest.approx(cell.std / 3**0.5)


def test_summary_recomputable_from_results(report):
    rows = list(csv.DictReader(io.StringIO(report.results_csv())))
    means = {}
    for p in report.policies:
        per_ratio = []
        for r in ("0.1", "0.3"):
            lives = [float(x["battery_life_hours"]) for x in rows
                     if x["policy"] == p and x["anomaly_ratio"] == r]
            per_ratio.append(sum(lives) / len(lives))
        means[p] = sum(per_ratio) / 2
    summary = list(csv.DictReader(io.StringIO(report.summary_csv())))
    avg = summary[-1]
    assert avg["anomaly_ratio"] == "avg"
    expected = (means["autonomous"] - means["static"]) / means["static"] * 100
    assert float(avg["autonomous_vs_static_pct"]) == pytest.approx(expected, abs=0.01)
    expected = (means["autonomous"] - means["dynamic"]) / means["dynamic"] * 100
    assert float(avg["autonomous_vs_dynamic_pct"]) == pytest.approx(expected, abs=0.01)


def test_breakdown_shares_sum_to_100(report):
    rows = list(csv.DictReader(io.StringIO(report.breakdown_csv())))
    for p in report.policies:
        share = sum(float(x["share_pct"]) for x in rows
                    if x["policy"] == p and x["anomaly_ratio"] == "0.1")
        assert share == pytest.approx(100, abs=0.01)


def test_trace_first_seed_only(report):
    rows = list(csv.DictReader(io.StringIO(report.trace_csv())))
    assert rows and {x["seed"] for x in rows} == {"0"}


def test_paired_differences(report):
    diffs = report.paired_differences("dynamic", "static", 0.3)
    assert len(diffs) == 3


def test_svg(report):
    svg = report.svg()
    assert svg.startswith("<svg") and svg.count("<rect") == 2 * 3 + 3


def test_missing_cell():
    results = run_sweep([SimConfig(policy="static", battery_capacity=100_000)], [0])
    with pytest.raises(ValueError):
        BenchReport.from_results(results, [0.05, 0.1])


def test_bad_inputs():
    with pytest.raises(ValueError):
        run_bench(SimConfig(), [], ["static"], [0])
    with pytest.raises(ValueError):
        run_bench(SimConfig(), [0.1], ["nope"], [0])
