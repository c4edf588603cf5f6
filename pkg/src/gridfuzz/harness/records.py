"""Line-delimited scenario records and per-scenario trace files."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

from ..baselines import LanePlacement, ManoeuvreGene
from ..grid import PositionInstruction
from ..metrics import SafetySample
from ..search import CellPlacement, Chromosome, Genome

RECORDS_FILE = "records.jsonl"
TRACE_DIR = "traces"


def genome_to_dict(genome: Genome) -> dict:
    return {
        "kind": genome.kind,
        "npcs": [{"placement": c.placement.to_list(), "genes": [g.to_list() for g in c.genes]}
                 for c in genome.chromosomes],
    }


def _pi_chromosome(n: dict) -> Chromosome:
    cell, speed = n["placement"]
    genes = tuple(PositionInstruction(int(c), float(v)) for c, v in n["genes"])
    return Chromosome(CellPlacement(int(cell), float(speed)), genes)


def _manoeuvre_chromosome(n: dict) -> Chromosome:
    lane, offset, speed = n["placement"]
    genes = tuple(ManoeuvreGene(a, float(d)) for a, d in n["genes"])
    return Chromosome(LanePlacement(int(lane), float(offset), float(speed)), genes)


_DECODERS = {"pi": _pi_chromosome, "manoeuvre": _manoeuvre_chromosome}


def genome_from_dict(d: dict) -> Genome:
    try:
        decode = _DECODERS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown genome kind {d.get('kind')!r}") from None
    return Genome(d["kind"], tuple(decode(n) for n in d["npcs"]))


@dataclass
class ScenarioRecord:
    id: str
    technique: str
    run: int
    seq: int
    generation: int
    index: int
    phase: str
    restart_epoch: int
    local_fuzz_activation: int
    genome: dict
    fitness: dict
    outcome: str
    collision_time: Optional[float]
    trace: Optional[str]
    lineage: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "ScenarioRecord":
        return cls(**json.loads(line))


class RecordWriter:
    """Append-only JSONL writer; each line is flushed as soon as it is written."""

    def __init__(self, path: Path, fresh: bool = False):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w" if fresh else "a", encoding="utf-8")
        self._lock = threading.Lock()

    def write(self, record: ScenarioRecord):
        with self._lock:
            self._fh.write(record.to_json() + "\n")
            self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_records(path: Path) -> list[ScenarioRecord]:
    """Parse a record file, ignoring a torn final line left by an interrupted run."""
    out = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(ScenarioRecord.from_json(line))
        except (json.JSONDecodeError, TypeError):
            if i == len(lines) - 1:
                break
            raise
    return out


def write_trace(root: Path, record_id: str, samples: Iterable) -> str:
    rel = f"{TRACE_DIR}/{record_id}.json"
    path = Path(root) / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps([s.to_dict() for s in samples]))
    return rel


def read_trace(root: Path, rel: str) -> list[SafetySample]:
    return [SafetySample.from_dict(d) for d in json.loads((Path(root) / rel).read_text())]
