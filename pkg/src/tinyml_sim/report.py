"""Benchmark aggregation and file emission (CSV, plot data, optional SVG)."""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .engine import LEDGER_FIELDS, POLICIES, SimResult, run_sweep, train

RESULTS_HEADER = [
    "policy", "anomaly_ratio", "seed", "battery_life_hours",
    "e_sleep_uwh", "e_capture_uwh", "e_infer_uwh", "e_upload_uwh", "e_train_uwh",
    "n_samples", "n_anomalies", "n_onboard", "n_uploads",
    "n_retrain_attempts", "n_retrain_success",
]

# calendar year of hourly samples, and the scale implied by quoting
# 45,956 h as 3.35 years
HOURS_PER_YEAR = 365.25 * 24
QUOTED_HOURS_PER_YEAR = 45_956 / 3.35


def improvement(new: float, old: float) -> float:
    """Percentage change of ``new`` over ``old``."""
    if old == 0:
        return math.nan
    return (new - old) / old * 100.0


def _num(x) -> str:
    if isinstance(x, float):
        if x.is_integer():
            return str(int(x))
        return repr(x)
    return str(x)


def _fixed(x: float, digits: int = 4) -> str:
    return "" if x is None or math.isnan(x) else f"{x:.{digits}f}"


@dataclass
class Cell:
    policy: str
    anomaly_ratio: float
    lives: list[float]
    ledger: dict[str, float]  # mean uWh per category

    @property
    def n(self) -> int:
        return len(self.lives)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.lives)

    @property
    def std(self) -> float:
        return statistics.stdev(self.lives) if self.n > 1 else 0.0

    @property
    def sem(self) -> float:
        """Standard deviation of the seed mean."""
        return self.std / math.sqrt(self.n)


@dataclass
class BenchReport:
    ratios: list[float]
    policies: list[str]
    seeds: list[int]
    results: list[SimResult]
    cells: dict[tuple[str, float], Cell] = field(default_factory=dict)

    @classmethod
    def from_results(cls, results: list[SimResult], ratios=None, policies=None, seeds=None):
        ratios = ratios or sorted({r.anomaly_ratio for r in results})
        present = {r.policy for r in results}
        policies = policies or [p for p in POLICIES if p in present]
        seeds = seeds or sorted({r.seed for r in results})
        report = cls(list(ratios), list(policies), list(seeds), list(results))
        for p in policies:
            for ratio in ratios:
                rows = [r for r in results if r.policy == p and r.anomaly_ratio == ratio]
                if not rows:
                    raise ValueError(f"no results for {p} at ratio {ratio}")
                ledger = {k: statistics.fmean(getattr(r.ledger, k) for r in rows)
                          for k in LEDGER_FIELDS}
                report.cells[p, ratio] = Cell(p, ratio, [r.battery_life_hours for r in rows], ledger)
        return report

    def mean(self, policy: str, ratio: float | None = None) -> float:
        """Seed mean of one cell, or the average over ratios."""
        if ratio is not None:
            return self.cells[policy, ratio].mean
        return statistics.fmean(self.cells[policy, r].mean for r in self.ratios)

    def improvement(self, against: str, ratio: float | None = None,
                    policy: str = "autonomous") -> float:
        if policy not in self.policies or against not in self.policies:
            return math.nan
        return improvement(self.mean(policy, ratio), self.mean(against, ratio))

    def paired_differences(self, a: str, b: str, ratio: float) -> list[float]:
        """Per-seed battery-life difference ``a - b`` (policies share the
        environment stream of a seed)."""
        by_seed = {}
        for r in self.results:
            if r.anomaly_ratio == ratio and r.policy in (a, b):
                by_seed.setdefault(r.seed, {})[r.policy] = r.battery_life_hours
        return [v[a] - v[b] for _, v in sorted(by_seed.items()) if a in v and b in v]

    # --- emission -----------------------------------------------------

    def results_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in self.results:
            led, c = r.ledger, r.counts
            w.writerow([r.policy, _num(r.anomaly_ratio), r.seed, _num(r.battery_life_hours),
                        led.sleep, led.capture, led.infer, led.upload, led.train,
                        c.samples, c.anomalies, c.onboard, c.uploads,
                        c.retrain_attempts, c.retrain_successes])
        return buf.getvalue()

    def summary_csv(self) -> str:
        """Battery life matrix (rows = ratios, then the average row) with
        mean/std per policy and the two improvement columns."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["anomaly_ratio"]
        for p in self.policies:
            header += [f"{p}_mean_h", f"{p}_std_h"]
        header += ["n_seeds", "autonomous_vs_static_pct", "autonomous_vs_dynamic_pct"]
        w.writerow(header)
        for ratio in self.ratios:
            row = [_num(ratio)]
            for p in self.policies:
                cell = self.cells[p, ratio]
                row += [_fixed(cell.mean, 2), _fixed(cell.std, 2)]
            row += [len(self.seeds), _fixed(self.improvement("static", ratio)),
                    _fixed(self.improvement("dynamic", ratio))]
            w.writerow(row)
        row = ["avg"]
        for p in self.policies:
            row += [_fixed(self.mean(p), 2), ""]
        row += [len(self.seeds), _fixed(self.improvement("static")),
                _fixed(self.improvement("dynamic"))]
        w.writerow(row)
        return buf.getvalue()

    def breakdown_csv(self) -> str:
        """Mean energy per ledger category for every cell (stacked-bar data)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", "anomaly_ratio", "category", "mean_uwh", "share_pct"])
        for p in self.policies:
            for ratio in self.ratios:
                ledger = self.cells[p, ratio].ledger
                total = sum(ledger.values())
                for k in LEDGER_FIELDS:
                    share = ledger[k] / total * 100 if total else 0.0
                    w.writerow([p, _num(ratio), k, _fixed(ledger[k], 1), _fixed(share)])
        return buf.getvalue()

    def trace_csv(self) -> str:
        """Retrain events of the first seed of every cell (timeline data)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["policy", "anomaly_ratio", "seed", "iteration", "n_samples", "v_accuracy",
                    "success", "threshold", "train_uwh_cum", "upload_uwh_cum"])
        first = self.seeds[0]
        for r in self.results:
            if r.seed != first:
                continue
            for e in r.trace:
                w.writerow([r.policy, _num(r.anomaly_ratio), r.seed, e.iteration, e.n_samples,
                            f"{e.v_accuracy:.6f}", int(e.success),
                            "" if e.threshold is None else e.threshold,
                            e.train_uwh, e.upload_uwh])
        return buf.getvalue()

    def svg(self, width: int = 640, height: int = 360) -> str:
        """Grouped bar chart of mean battery life, self-contained SVG."""
        colours = {"static": "#8c8c8c", "dynamic": "#4c72b0", "autonomous": "#dd8452"}
        pad, top = 50, 30
        top_value = max(c.mean for c in self.cells.values()) or 1.0
        group_w = (width - 2 * pad) / len(self.ratios)
        bar_w = group_w * 0.8 / len(self.policies)
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                 f'font-family="sans-serif" font-size="11">',
                 f'<text x="{pad}" y="18">Mean battery life (h) by anomaly ratio</text>']
        plot_h = height - top - pad
        for i, ratio in enumerate(self.ratios):
            x0 = pad + i * group_w + group_w * 0.1
            for j, p in enumerate(self.policies):
                v = self.cells[p, ratio].mean
                h = plot_h * v / top_value
                parts.append(f'<rect x="{x0 + j * bar_w:.1f}" y="{top + plot_h - h:.1f}" '
                             f'width="{bar_w:.1f}" height="{h:.1f}" '
                             f'fill="{colours.get(p, "#55a868")}"><title>{p} {v:.0f} h</title></rect>')
            parts.append(f'<text x="{x0 + group_w * 0.4:.1f}" y="{height - pad + 16}" '
                         f'text-anchor="middle">{ratio * 100:g}%</text>')
        for j, p in enumerate(self.policies):
            y = height - 14
            parts.append(f'<rect x="{pad + j * 110}" y="{y - 9}" width="10" height="10" '
                         f'fill="{colours.get(p, "#55a868")}"/>')
            parts.append(f'<text x="{pad + j * 110 + 14}" y="{y}">{p}</text>')
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write(self, out_dir: str | Path, svg: bool = False) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"results.csv": self.results_csv(), "summary.csv": self.summary_csv(),
                 "energy_breakdown.csv": self.breakdown_csv(),
                 "retrain_trace.csv": self.trace_csv()}
        if svg:
            files["battery_life.svg"] = self.svg()
        written = []
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written

    def table(self) -> str:
        """Fixed-width console rendering of the summary matrix."""
        head = f"{'ratio':>8}" + "".join(f"{p:>22}" for p in self.policies)
        lines = [head]
        for ratio in self.ratios:
            cells = "".join(f"{self.cells[p, ratio].mean:>13.1f} ± {self.cells[p, ratio].sem:>6.1f}"
                            for p in self.policies)
            lines.append(f"{ratio:>8.2f}{cells}")
        lines.append(f"{'avg':>8}" + "".join(f"{self.mean(p):>13.1f}         " for p in self.policies))
        for against in ("static", "dynamic"):
            value = self.improvement(against)
            if not math.isnan(value):
                lines.append(f"autonomous vs {against}: {value:+.2f}%")
        return "\n".join(lines)


def ratio_tag(ratio: float) -> str:
    return f"{ratio:.4f}".rstrip("0").rstrip(".")


def run_bench(config, ratios, policies, seeds, qtable=None, episodes=None,
              workers: int = 1) -> tuple[BenchReport, dict]:
    """Train (unless ``qtable`` is given) and sweep the policy x ratio x seed
    matrix. Returns the report and the Q-table used for each ratio."""
    if not ratios or not policies or not seeds:
        raise ValueError("ratios, policies and seeds must be non-empty")
    for p in policies:
        if p not in POLICIES:
            raise ValueError(f"unknown policy {p!r}")
    tables = {}
    configs = []
    for ratio in ratios:
        base = config.replace(anomaly_ratio=ratio)
        if "autonomous" in policies:
            tables[ratio] = qtable if qtable is not None else train(base, episodes).table
        for p in policies:
            configs.append(base.replace(policy=p, qtable=tables.get(ratio)))
    results = run_sweep(configs, list(seeds), workers=workers)
    return BenchReport.from_results(results, list(ratios), list(policies), list(seeds)), tables
