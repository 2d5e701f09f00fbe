"""Experiment orchestration: parameter sweeps comparing both arms.

Every sweep point runs the balanced and unbalanced arm on identical seeds,
then reports seed means and sample standard deviations.  Points may run in
parallel; output assembly is always ordered by sweep value, then arm, so the
CSV is byte-stable.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .config import ScenarioConfig, build_simulation
from .engine import MetricsReport

CSV_HEADER = ("param,value,arm,n_seeds,seeds,delay_ms_mean,delay_ms_std,"
              "throughput_bps_mean,throughput_bps_std,loss_mean,loss_std,"
              "requests_mean,completed_mean,replication_bytes_mean")

ARMS = ("withlb", "withoutlb")


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: float
    arm: str
    seeds: tuple[int, ...]
    delay_ms_mean: float
    delay_ms_std: float
    throughput_bps_mean: float
    throughput_bps_std: float
    loss_mean: float
    loss_std: float
    requests_mean: float
    completed_mean: float
    replication_bytes_mean: float


@dataclass(frozen=True)
class ComparisonTable:
    param: str
    rows: tuple[SweepRow, ...]

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            seeds = ";".join(str(s) for s in r.seeds)
            lines.append(
                f"{r.param},{r.value!r},{r.arm},{len(r.seeds)},{seeds},"
                f"{r.delay_ms_mean!r},{r.delay_ms_std!r},"
                f"{r.throughput_bps_mean!r},{r.throughput_bps_std!r},"
                f"{r.loss_mean!r},{r.loss_std!r},"
                f"{r.requests_mean!r},{r.completed_mean!r},"
                f"{r.replication_bytes_mean!r}")
        return "\n".join(lines) + "\n"


def run_point(sc: ScenarioConfig, param: str, value: float, seed: int,
              lb_enabled: bool) -> MetricsReport:
    """One (sweep value, seed, arm) scenario; module-level so it pickles."""
    cfg = sc.with_param(param, value)
    sim = build_simulation(cfg, lb_enabled=lb_enabled, seed=seed)
    return sim.run()


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def run_sweep(sc: ScenarioConfig, param: str, values: Sequence[float],
              seeds: Sequence[int], parallel: int = 1) -> ComparisonTable:
    """Run both arms of the comparison over every (value, seed) pair."""
    jobs = [(value, seed, arm == "withlb")
            for value in values for arm in ARMS for seed in seeds]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(
                run_point,
                [sc] * len(jobs), [param] * len(jobs),
                [j[0] for j in jobs], [j[1] for j in jobs],
                [j[2] for j in jobs]))
    else:
        results = [run_point(sc, param, v, s, lb) for v, s, lb in jobs]

    by_key: dict[tuple[float, bool], list[MetricsReport]] = {}
    for (value, seed, lb), metrics in zip(jobs, results):
        by_key.setdefault((value, lb), []).append(metrics)

    rows = []
    for value in values:
        for arm in ARMS:
            reports = by_key[(value, arm == "withlb")]
            delay = _mean_std([m.mean_delay_ms for m in reports])
            tput = _mean_std([m.aggregate_throughput_bps for m in reports])
            loss = _mean_std([float(m.packets_lost) for m in reports])
            rows.append(SweepRow(
                param=param, value=float(value), arm=arm, seeds=tuple(seeds),
                delay_ms_mean=delay[0], delay_ms_std=delay[1],
                throughput_bps_mean=tput[0], throughput_bps_std=tput[1],
                loss_mean=loss[0], loss_std=loss[1],
                requests_mean=statistics.fmean(m.requests_total for m in reports),
                completed_mean=statistics.fmean(m.requests_completed for m in reports),
                replication_bytes_mean=statistics.fmean(
                    m.replication_bytes_moved for m in reports)))
    return ComparisonTable(param=param, rows=tuple(rows))


def plot_data_files(table: ComparisonTable) -> dict[str, str]:
    """Wide-format CSVs, one per plotted metric, keyed by file name."""
    metrics = {
        "delay_ms": ("delay_ms_mean", "delay_ms_std"),
        "throughput_bps": ("throughput_bps_mean", "throughput_bps_std"),
        "loss": ("loss_mean", "loss_std"),
    }
    values = sorted({r.value for r in table.rows})
    by = {(r.value, r.arm): r for r in table.rows}
    out = {}
    for metric, (mean_f, std_f) in metrics.items():
        lines = [f"value,withlb_mean,withlb_std,withoutlb_mean,withoutlb_std"]
        for v in values:
            lb, nolb = by[(v, "withlb")], by[(v, "withoutlb")]
            lines.append(f"{v!r},{getattr(lb, mean_f)!r},{getattr(lb, std_f)!r},"
                         f"{getattr(nolb, mean_f)!r},{getattr(nolb, std_f)!r}")
        out[f"{metric}_vs_{table.param.replace('.', '_')}.csv"] = "\n".join(lines) + "\n"
    return out


PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Render the sweep plot-data files in this directory as PNGs."""

import glob
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> None:
    here = os.path.dirname(os.path.abspath(__file__))
    for path in sorted(glob.glob(os.path.join(here, "*_vs_*.csv"))):
        name = os.path.basename(path)[:-4]
        metric, param = name.split("_vs_", 1)
        xs, lb, lb_err, nolb, nolb_err = [], [], [], [], []
        with open(path) as fh:
            next(fh)
            for line in fh:
                v, m1, s1, m2, s2 = (float(x) for x in line.split(","))
                xs.append(v)
                lb.append(m1); lb_err.append(s1)
                nolb.append(m2); nolb_err.append(s2)
        fig, ax = plt.subplots()
        ax.errorbar(xs, lb, yerr=lb_err, marker="o", label="WithLB")
        ax.errorbar(xs, nolb, yerr=nolb_err, marker="s", label="WithoutLB")
        ax.set_xlabel(param)
        ax.set_ylabel(metric)
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.savefig(os.path.join(here, name + ".png"), dpi=120)
        plt.close(fig)
        print("wrote", name + ".png")


if __name__ == "__main__":
    main()
'''
