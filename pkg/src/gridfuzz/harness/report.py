"""Summaries and plot-ready CSV tables computed purely from scenario records."""

from __future__ import annotations

import csv
import json
import math
import statistics
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

BIN_WIDTH = 10.0


def histogram_edges(budget: float, width: float = BIN_WIDTH) -> list[float]:
    n = max(1, math.ceil(budget / width - 1e-9))
    return [i * width for i in range(n + 1)]


def histogram(times: Iterable[float], budget: float, width: float = BIN_WIDTH) -> list[int]:
    edges = histogram_edges(budget, width)
    counts = [0] * (len(edges) - 1)
    for t in times:
        # right edge of the last bin is closed
        i = min(int(t // width), len(counts) - 1)
        counts[i] += 1
    return counts


@dataclass
class TechniqueSummary:
    technique: str
    runs: int
    scenarios: int
    collisions: int
    off_road: int
    errors: int
    ttc_mean: Optional[float]
    ttc_median: Optional[float]
    ttc_min: Optional[float]
    ttc_max: Optional[float]
    simulated_time: float
    local_fuzz_activations: int
    restarts: int
    histogram: list
    histogram_edges: list


@dataclass
class SummaryReport:
    budget: float
    techniques: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"budget": self.budget,
                "techniques": {k: asdict(v) for k, v in self.techniques.items()}}


def _by(records, key):
    out = defaultdict(list)
    for r in records:
        out[key(r)].append(r)
    return out


def summarize(records: Sequence, budget: float) -> SummaryReport:
    report = SummaryReport(budget)
    for tech, recs in sorted(_by(records, lambda r: r.technique).items()):
        times = [r.collision_time for r in recs if r.outcome == "collision"]
        runs = _by(recs, lambda r: r.run)
        lf = sum(len({r.local_fuzz_activation for r in rr if r.local_fuzz_activation >= 0})
                 for rr in runs.values())
        restarts = sum(max(r.restart_epoch for r in rr) for rr in runs.values())
        report.techniques[tech] = TechniqueSummary(
            technique=tech,
            runs=len(runs),
            scenarios=len(recs),
            collisions=len(times),
            off_road=sum(r.outcome == "off-road" for r in recs),
            errors=sum(r.outcome == "error" for r in recs),
            ttc_mean=statistics.fmean(times) if times else None,
            ttc_median=statistics.median(times) if times else None,
            ttc_min=min(times) if times else None,
            ttc_max=max(times) if times else None,
            simulated_time=math.fsum(r.fitness["et"] for r in recs),
            local_fuzz_activations=lf,
            restarts=restarts,
            histogram=histogram(times, budget),
            histogram_edges=histogram_edges(budget),
        )
    return report


def cumulative_series(records: Sequence) -> list[tuple]:
    """(technique, run, seq, cumulative simulated time, cumulative collisions) rows."""
    rows = []
    for (tech, run), recs in sorted(_by(records, lambda r: (r.technique, r.run)).items()):
        t, n = 0.0, 0
        for r in sorted(recs, key=lambda r: r.seq):
            t += r.fitness["et"]
            n += r.outcome == "collision"
            rows.append((tech, run, r.seq, t, n))
    return rows


def per_run_counts(records: Sequence) -> list[tuple]:
    rows = []
    for (tech, run), recs in sorted(_by(records, lambda r: (r.technique, r.run)).items()):
        unsafe = sum(r.outcome == "collision" for r in recs)
        times = [r.collision_time for r in recs if r.outcome == "collision"]
        rows.append((tech, run, len(recs) - unsafe, unsafe,
                     statistics.median(times) if times else ""))
    return rows


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def emit_report(records: Sequence, out_dir: str | Path, budget: float,
                wall_clock: Optional[dict] = None) -> SummaryReport:
    """Write totals, cumulative-collision, per-run and histogram CSVs plus summary.json."""
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(records, budget)
    _write_csv(out / "totals.csv",
               ["technique", "runs", "scenarios", "collisions", "off_road", "ttc_mean",
                "ttc_median", "ttc_min", "ttc_max", "simulated_time_s", "local_fuzz", "restarts"],
               [(s.technique, s.runs, s.scenarios, s.collisions, s.off_road, s.ttc_mean,
                 s.ttc_median, s.ttc_min, s.ttc_max, s.simulated_time,
                 s.local_fuzz_activations, s.restarts) for s in summary.techniques.values()])
    _write_csv(out / "cumulative_collisions.csv",
               ["technique", "run", "seq", "simulated_time_s", "collisions"],
               cumulative_series(records))
    _write_csv(out / "per_run.csv",
               ["technique", "run", "safe", "unsafe", "median_collision_time_s"],
               per_run_counts(records))
    edges = histogram_edges(budget)
    _write_csv(out / "collision_time_histogram.csv",
               ["technique", "bin_start_s", "bin_end_s", "collisions"],
               [(s.technique, edges[i], edges[i + 1], c)
                for s in summary.techniques.values() for i, c in enumerate(s.histogram)])
    doc = summary.to_dict()
    if wall_clock:
        doc["wall_clock_s"] = wall_clock
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return summary
