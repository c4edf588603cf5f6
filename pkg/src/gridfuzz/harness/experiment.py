"""Run repeated searches, stream their records, and replay stored scenarios."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from ..baselines import ManoeuvreEncoding, avfuzzer_like, random_fuzz
from ..search import EvalContext, EvaluatedIndividual, GridEncoding, derive_rng, derive_seed, run_search
from .config import ExperimentConfig, from_dict
from .records import (RECORDS_FILE, RecordWriter, ScenarioRecord, genome_from_dict, genome_to_dict,
                      read_records, write_trace)
from .report import SummaryReport, emit_report, summarize

log = logging.getLogger(__name__)

CONFIG_FILE = "config.json"

TECHNIQUE_RUNNERS = {
    "pafot": run_search,
    "avfuzzer": avfuzzer_like,
    "random": random_fuzz,
}


class DeterminismError(RuntimeError):
    """A replayed scenario did not reproduce its stored record."""


def run_seed(config: ExperimentConfig, run: int) -> int:
    return derive_seed(config.seed, run)


def _sink(config: ExperimentConfig, root: Path, writer: RecordWriter, run: int):
    seq = 0

    def sink(ind: EvaluatedIndividual, ctx: EvalContext):
        nonlocal seq
        rid = f"{ctx.technique}-r{run:02d}-{seq:05d}"
        trace = write_trace(root, rid, ind.samples) if config.persist_traces else None
        writer.write(ScenarioRecord(
            id=rid, technique=ctx.technique, run=run, seq=seq, generation=ctx.generation,
            index=ctx.index, phase=ctx.phase, restart_epoch=ctx.restart_epoch,
            local_fuzz_activation=ctx.local_fuzz_activation, genome=genome_to_dict(ind.genome),
            fitness=ind.fitness.to_dict(), outcome=ind.outcome,
            collision_time=ind.collision_time, trace=trace, lineage=list(ind.lineage)))
        seq += 1

    return sink


def run_experiment(config: ExperimentConfig) -> SummaryReport:
    """Execute ``config.runs`` independent searches and write records plus reports.

    Records are appended to ``records.jsonl`` as each scenario completes.
    """
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / CONFIG_FILE).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
    runner = TECHNIQUE_RUNNERS[config.technique]
    started = time.perf_counter()
    with RecordWriter(root / RECORDS_FILE, fresh=True) as writer:
        for run in range(config.runs):
            cfg = replace(config.ga, rng_seed=run_seed(config, run))
            runner(cfg, config.scenario, sink=_sink(config, root, writer, run))
            log.info("run %d/%d done", run + 1, config.runs)
    wall = time.perf_counter() - started
    records = read_records(root / RECORDS_FILE)
    summary = summarize(records, config.ga.scenario_budget)
    emit_report(records, root / "report", config.ga.scenario_budget, wall_clock={config.technique: wall})
    return summary


def load_experiment(root: str | Path) -> tuple[ExperimentConfig, list[ScenarioRecord]]:
    root = Path(root)
    config = from_dict(ExperimentConfig, json.loads((root / CONFIG_FILE).read_text()))
    return config, read_records(root / RECORDS_FILE)


@dataclass
class SimulationTrace:
    record_id: str
    outcome: str
    collision_time: Optional[float]
    score: float
    frames: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def replay(record: ScenarioRecord, config: ExperimentConfig) -> SimulationTrace:
    """Re-run a stored scenario and check it reproduces outcome, collision time and score.

    Raises DeterminismError on any mismatch.
    """
    genome = genome_from_dict(record.genome)
    cfg = replace(config.ga, rng_seed=int(record.lineage[0]))
    if genome.kind == "pi":
        encoding = GridEncoding(config.scenario, cfg)
    else:
        encoding = ManoeuvreEncoding(config.scenario, cfg)
    result, executed, _ = encoding.simulate(genome, derive_rng(*record.lineage), record_frames=True)
    problems = []
    if result.outcome != record.outcome:
        problems.append(f"outcome {result.outcome} != {record.outcome}")
    if result.collision_time != record.collision_time:
        problems.append(f"collision time {result.collision_time} != {record.collision_time}")
    if result.fitness.to_dict() != record.fitness:
        problems.append(f"score {result.fitness.score} != {record.fitness['score']}")
    if genome_to_dict(executed) != record.genome:
        problems.append("executed plan differs from the stored genome")
    if problems:
        raise DeterminismError(f"{record.id}: " + "; ".join(problems))
    return SimulationTrace(record.id, result.outcome, result.collision_time,
                           result.fitness.score, result.frames)
