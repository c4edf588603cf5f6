"""Comparison techniques: random manoeuvre fuzzing and a manoeuvre-gene GA.

Both place NPCs in absolute road coordinates, 20-120 m from the ego, and
drive them with lane-level manoeuvres rather than ego-relative cells.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .grid import PidState, clamp_to_lanes, pid_control
from .road import Control, WorldState
from .scenario import ScenarioTemplate, run_scenario
from .search import (PHASE_RANDOM, Chromosome, EvalContext, GAConfig, Genome, SearchReport,
                     _Tracker, derive_rng, individual_from, run_ga)

ACTIONS = ("keep-lane", "lane-change-left", "lane-change-right", "accelerate", "decelerate",
           "brake-hard")
SPEED_STEP = 5.0
SPAWN_RANGE = (20.0, 120.0)
RANDOM_INTERVAL = 5.0
DURATION_RANGE = (2.0, 8.0)


@dataclass(frozen=True)
class ManoeuvreGene:
    action: str
    duration: float

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown manoeuvre {self.action!r}")
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    def to_list(self):
        return [self.action, self.duration]


@dataclass(frozen=True)
class LanePlacement:
    lane: int
    offset: float
    speed: float

    def to_list(self):
        return [self.lane, self.offset, self.speed]


@dataclass
class ManoeuvreFollower:
    genes: tuple
    lane: int
    speed: float
    road: object
    gains: object
    cursor: int = -1
    steps_left: int = 0
    pid_state: PidState = field(default_factory=PidState)

    def _start(self, gene: ManoeuvreGene, dt: float):
        a = gene.action
        if a == "lane-change-left":
            self.lane = min(self.lane + 1, self.road.lane_count - 1)
        elif a == "lane-change-right":
            self.lane = max(self.lane - 1, 0)
        elif a == "accelerate":
            self.speed = min(self.speed + SPEED_STEP, self.road.speed_limit)
        elif a == "decelerate":
            self.speed = max(self.speed - SPEED_STEP, 0.0)
        elif a == "brake-hard":
            self.speed = 0.0
        self.steps_left = max(1, round(gene.duration / dt))

    def control(self, world: WorldState, index: int) -> Control:
        if self.steps_left <= 0 and self.cursor + 1 < len(self.genes):
            self.cursor += 1
            self._start(self.genes[self.cursor], world.dt)
        self.steps_left -= 1
        npc = world.npcs[index]
        waypoint = clamp_to_lanes(world.road, (npc.x, self.road.lane_center(self.lane)))
        ctrl, self.pid_state = pid_control(npc, waypoint, self.speed, self.gains, world.dt,
                                           self.pid_state)
        return ctrl


class ManoeuvreEncoding:
    """Genomes of timed lane-level manoeuvres in absolute road coordinates."""

    kind = "manoeuvre"

    def __init__(self, template: ScenarioTemplate, cfg: GAConfig, fixed_interval=None):
        self.template = template
        self.cfg = cfg
        self.fixed_interval = fixed_interval

    def _duration(self, rng) -> float:
        if self.fixed_interval is not None:
            return self.fixed_interval
        return round(float(rng.uniform(*DURATION_RANGE)), 1)

    def random_gene(self, rng) -> ManoeuvreGene:
        return ManoeuvreGene(ACTIONS[int(rng.integers(len(ACTIONS)))], self._duration(rng))

    def gene_count(self) -> int:
        if self.fixed_interval is not None:
            return max(1, int(-(-self.cfg.scenario_budget // self.fixed_interval)))
        return self.cfg.genes_per_chromosome

    def random_chromosome(self, rng) -> Chromosome:
        road = self.template.road
        lane = int(rng.integers(road.lane_count))
        dist = float(rng.uniform(*SPAWN_RANGE))
        offset = dist if rng.random() < 0.5 else -dist
        speed = float(rng.uniform(0.3 * road.speed_limit, road.speed_limit))
        genes = tuple(self.random_gene(rng) for _ in range(self.gene_count()))
        return Chromosome(LanePlacement(lane, offset, speed), genes)

    def random_genome(self, rng) -> Genome:
        return Genome(self.kind, tuple(self.random_chromosome(rng)
                                       for _ in range(self.template.npc_count)))

    def simulate(self, genome: Genome, rng=None, record_frames: bool = False):
        t = self.template
        ego = t.ego_start()
        npcs, drivers = [], []
        for chrom in genome.chromosomes:
            p = chrom.placement
            npcs.append(t.vehicle(ego.x + p.offset, t.road.lane_center(p.lane), p.speed))
            drivers.append(ManoeuvreFollower(chrom.genes, p.lane, p.speed, t.road, t.pid))
        result = run_scenario(t, npcs, drivers, self.cfg.scenario_budget, record_frames)
        return result, genome, []

    def evaluate(self, genome: Genome, lineage: tuple):
        result, genome, _ = self.simulate(genome)
        return individual_from(result, genome, lineage)


def random_budget(cfg: GAConfig) -> int:
    """Scenario count matched to the GA's nominal budget."""
    return cfg.population_size * cfg.generations


def random_fuzz(cfg: GAConfig, template: ScenarioTemplate, sink=None,
                scenarios: int | None = None) -> SearchReport:
    """Evaluate independent random scenarios; each NPC gets a new manoeuvre every interval."""
    started = time.perf_counter()
    encoding = ManoeuvreEncoding(template, cfg, fixed_interval=RANDOM_INTERVAL)
    report = SearchReport("random", cfg.rng_seed)
    track = _Tracker(report, sink)
    n = random_budget(cfg) if scenarios is None else scenarios
    for i in range(n):
        lineage = (cfg.rng_seed, PHASE_RANDOM, 0, i)
        genome = encoding.random_genome(derive_rng(*lineage))
        ind = encoding.evaluate(genome, lineage)
        track(ind, EvalContext("random", 0, i, "random", 0))
    report.wall_clock = time.perf_counter() - started
    return report


def avfuzzer_like(cfg: GAConfig, template: ScenarioTemplate, sink=None) -> SearchReport:
    """The shared GA loop over manoeuvre genomes."""
    return run_ga(cfg, ManoeuvreEncoding(template, cfg), "avfuzzer", sink)
