"""Single-objective genetic search over NPC plans.

The operators here are agnostic to what a gene is; an *encoding* object
supplies random genomes and genes and knows how to evaluate a genome. The
grid-relative Position-Instruction encoding lives in this module; the
manoeuvre encoding used by the baselines reuses the same loop.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .grid import CELL_OFFSETS, CELLS, PlanFollower, PositionInstruction, adjacent_cells
from .metrics import FitnessRecord
from .road import lane_of
from .scenario import COLLISION, ScenarioResult, ScenarioTemplate, run_scenario

log = logging.getLogger(__name__)

# phase codes mixed into per-evaluation seeds
PHASE_GA = 0
PHASE_LOCAL = 1
PHASE_RANDOM = 2


@dataclass(frozen=True)
class LocalFuzzConfig:
    trigger_percentile: float = 90.0
    mutation_rate: float = 0.8
    sub_generations: int = 3
    sub_population: Optional[int] = None  # None -> population_size


@dataclass(frozen=True)
class RestartConfig:
    stagnation_window: int = 5
    epsilon: float = 0.01


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 8
    generations: int = 20
    p_c: float = 0.5
    p_m: float = 0.5
    elite_fraction: float = 0.25
    genes_per_chromosome: int = 6
    scenario_budget: float = 60.0
    local_fuzz: LocalFuzzConfig = field(default_factory=LocalFuzzConfig)
    restart: RestartConfig = field(default_factory=RestartConfig)
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not (0 <= self.p_c <= 1 and 0 <= self.p_m <= 1):
            raise ValueError("p_c and p_m must be probabilities")
        if not 0 < self.elite_fraction < 1:
            raise ValueError("elite_fraction must be in (0, 1)")
        if self.genes_per_chromosome < 1 or self.scenario_budget <= 0:
            raise ValueError("genes_per_chromosome and scenario_budget must be positive")

    @property
    def elite_count(self) -> int:
        return math.ceil(self.elite_fraction * self.population_size)

    @property
    def sub_population(self) -> int:
        return self.local_fuzz.sub_population or self.population_size


def derive_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def derive_seed(*key: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


@dataclass(frozen=True)
class Chromosome:
    placement: Any
    genes: tuple


@dataclass(frozen=True)
class Genome:
    kind: str
    chromosomes: tuple

    @property
    def gene_count(self) -> int:
        return sum(len(c.genes) for c in self.chromosomes)

    def with_gene(self, flat_index: int, gene) -> "Genome":
        chroms = list(self.chromosomes)
        for ci, c in enumerate(chroms):
            if flat_index < len(c.genes):
                genes = list(c.genes)
                genes[flat_index] = gene
                chroms[ci] = replace(c, genes=tuple(genes))
                return replace(self, chromosomes=tuple(chroms))
            flat_index -= len(c.genes)
        raise IndexError("gene index out of range")


@dataclass
class EvaluatedIndividual:
    genome: Genome
    fitness: FitnessRecord
    outcome: str
    collision_time: Optional[float]
    lineage: tuple
    samples: list = field(default_factory=list, repr=False)
    trace_ref: Optional[str] = None

    @property
    def score(self) -> float:
        return self.fitness.score

    @property
    def collided(self) -> bool:
        return self.outcome == COLLISION


# --- Position-Instruction encoding -------------------------------------------------

@dataclass(frozen=True)
class CellPlacement:
    cell: int
    speed: float

    def to_list(self):
        return [self.cell, self.speed]


def spawn_offset(template: ScenarioTemplate, cell: int) -> tuple[float, float]:
    """(forward, left) spawn offset for an NPC starting in ``cell``.

    Front and rear cells spawn one extra cell length out so the NPC does not
    start bumper-to-bumper with the ego.
    """
    fwd, left = CELL_OFFSETS[cell]
    return 2 * fwd * template.vehicle_length, left * template.road.lane_width


def on_road_cells(template: ScenarioTemplate) -> list[int]:
    ego = template.ego_start()
    out = []
    for c in CELLS:
        _, left = CELL_OFFSETS[c]
        if lane_of(template.road, (ego.x, ego.y + left * template.road.lane_width)) is not None:
            out.append(c)
    return out


class GridEncoding:
    """Genomes of Position-Instructions relative to the ego's 3x3 grid."""

    kind = "pi"

    def __init__(self, template: ScenarioTemplate, cfg: GAConfig):
        self.template = template
        self.cfg = cfg
        self.limit = template.road.speed_limit
        self._start_cells = on_road_cells(template)

    def random_gene(self, rng) -> PositionInstruction:
        return PositionInstruction(int(rng.integers(1, 9)), float(rng.uniform(0.0, self.limit)))

    def _walk(self, start: int, rng, valid) -> list[int]:
        cells, cur = [], start
        for _ in range(self.cfg.genes_per_chromosome):
            options = sorted(c for c in adjacent_cells(cur) | {cur} if c in valid)
            cur = options[int(rng.integers(len(options)))]
            cells.append(cur)
        return cells

    def random_chromosome(self, rng) -> Chromosome:
        valid = set(self._start_cells)
        start = self._start_cells[int(rng.integers(len(self._start_cells)))]
        speeds = rng.uniform(0.3 * self.limit, self.limit, size=self.cfg.genes_per_chromosome + 1)
        cells = self._walk(start, rng, valid)
        genes = tuple(PositionInstruction(c, float(v)) for c, v in zip(cells, speeds[1:]))
        return Chromosome(CellPlacement(start, float(speeds[0])), genes)

    def random_genome(self, rng) -> Genome:
        return Genome(self.kind, tuple(self.random_chromosome(rng)
                                       for _ in range(self.template.npc_count)))

    def simulate(self, genome: Genome, rng, record_frames: bool = False):
        t = self.template
        ego = t.ego_start()
        npcs, drivers = [], []
        for chrom in genome.chromosomes:
            fwd, left = spawn_offset(t, chrom.placement.cell)
            npcs.append(t.vehicle(ego.x + fwd, ego.y + left, chrom.placement.speed))
            drivers.append(PlanFollower(list(chrom.genes), chrom.placement.cell, t.pid,
                                        t.timing, rng))
        result = run_scenario(t, npcs, drivers, self.cfg.scenario_budget, record_frames)
        chroms = tuple(replace(c, genes=tuple(d.plan)) for c, d in zip(genome.chromosomes, drivers))
        executed = [d.executed for d in drivers]
        return result, replace(genome, chromosomes=chroms), executed

    def evaluate(self, genome: Genome, lineage: tuple) -> EvaluatedIndividual:
        result, repaired, _ = self.simulate(genome, derive_rng(*lineage))
        return individual_from(result, repaired, lineage)


def individual_from(result: ScenarioResult, genome: Genome, lineage: tuple) -> EvaluatedIndividual:
    return EvaluatedIndividual(genome, result.fitness, result.outcome, result.collision_time,
                               tuple(lineage), result.samples)


def evaluate(genome: Genome, cfg: GAConfig, template: ScenarioTemplate,
             lineage: tuple = (0, PHASE_GA, 0, 0)) -> EvaluatedIndividual:
    """Simulate a Position-Instruction genome; repairs come back in the returned genome."""
    return GridEncoding(template, cfg).evaluate(genome, lineage)


# --- operators ---------------------------------------------------------------------

def init_population(cfg: GAConfig, encoding, rng) -> list[Genome]:
    return [encoding.random_genome(rng) for _ in range(cfg.population_size)]


def crossover(a: Genome, b: Genome, p_c: float, rng) -> tuple[Genome, Genome]:
    """Swap one whole NPC (placement and plan) between two genomes with probability ``p_c``."""
    if len(a.chromosomes) != len(b.chromosomes):
        raise ValueError("crossover needs genomes with equal NPC counts")
    if rng.random() >= p_c:
        return a, b
    i = int(rng.integers(len(a.chromosomes)))
    j = int(rng.integers(len(b.chromosomes)))
    ca, cb = list(a.chromosomes), list(b.chromosomes)
    ca[i], cb[j] = b.chromosomes[j], a.chromosomes[i]
    return replace(a, chromosomes=tuple(ca)), replace(b, chromosomes=tuple(cb))


def mutate(genome: Genome, p_m: float, rng, random_gene: Callable) -> Genome:
    """Replace one uniformly chosen gene with a fresh random one, with probability ``p_m``.

    Adjacency is deliberately not repaired here; that happens during simulation.
    """
    if rng.random() >= p_m:
        return genome
    idx = int(rng.integers(genome.gene_count))
    return genome.with_gene(idx, random_gene(rng))


def rank_key(ind: EvaluatedIndividual, order: int):
    return (-ind.score, ind.fitness.et, order)


def elites(evaluated: Sequence[EvaluatedIndividual], count: int) -> list[EvaluatedIndividual]:
    ranked = sorted(range(len(evaluated)), key=lambda i: rank_key(evaluated[i], i))
    return [evaluated[i] for i in ranked[:count]]


def tournament(evaluated: Sequence[EvaluatedIndividual], rng) -> EvaluatedIndividual:
    i, j = int(rng.integers(len(evaluated))), int(rng.integers(len(evaluated)))
    return evaluated[min(i, j, key=lambda k: rank_key(evaluated[k], k))]


def select_next_generation(evaluated: Sequence[EvaluatedIndividual], cfg: GAConfig, rng,
                           random_gene: Callable) -> list:
    """Elites (as evaluated individuals) followed by fresh, unevaluated offspring genomes."""
    nxt: list = list(elites(evaluated, cfg.elite_count))
    while len(nxt) < cfg.population_size:
        a = tournament(evaluated, rng).genome
        b = tournament(evaluated, rng).genome
        a, b = crossover(a, b, cfg.p_c, rng)
        for child in (a, b):
            if len(nxt) < cfg.population_size:
                nxt.append(mutate(child, cfg.p_m, rng, random_gene))
    return nxt


def local_fuzz(seed: EvaluatedIndividual, cfg: GAConfig, rng, encoding,
               lineage: Callable[[int, int], tuple],
               on_eval: Optional[Callable] = None) -> EvaluatedIndividual:
    """Mutation-only hill climb around ``seed``; the result never scores below it."""
    best = seed
    for g in range(cfg.local_fuzz.sub_generations):
        candidates = []
        for i in range(cfg.sub_population):
            child = mutate(best.genome, cfg.local_fuzz.mutation_rate, rng, encoding.random_gene)
            if child == best.genome:
                continue
            ind = encoding.evaluate(child, lineage(g, i))
            if on_eval is not None:
                on_eval(ind)
            candidates.append(ind)
        for ind in candidates:
            if ind.score > best.score:
                best = ind
    return best


def should_restart(history: Sequence[float], cfg: GAConfig) -> bool:
    w = cfg.restart.stagnation_window
    if len(history) < w:
        return False
    window = history[-w:]
    return window[-1] - window[0] < cfg.restart.epsilon


def maybe_restart(history: Sequence[float], cfg: GAConfig, rng, encoding,
                  best: Optional[EvaluatedIndividual]) -> Optional[list]:
    """Fresh random population (with ``best`` injected first) after stagnation, else None."""
    if not history:
        raise ValueError("history must be non-empty")
    if not should_restart(history, cfg):
        return None
    fresh: list = init_population(cfg, encoding, rng)
    if best is not None:
        fresh[0] = best
    return fresh


# --- driver ------------------------------------------------------------------------

@dataclass
class SearchReport:
    technique: str
    seed: int
    evaluations: int = 0
    collisions: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    best_per_generation: list = field(default_factory=list)
    mean_per_generation: list = field(default_factory=list)
    local_fuzz_activations: int = 0
    restarts: int = 0
    simulated_time: float = 0.0
    wall_clock: float = 0.0

    def deterministic_dict(self) -> dict:
        d = dict(self.__dict__)
        d.pop("wall_clock")
        return d


@dataclass
class EvalContext:
    """Bookkeeping passed to the per-evaluation sink."""

    technique: str
    generation: int
    index: int
    phase: str
    restart_epoch: int
    local_fuzz_activation: int = -1


class _Tracker:
    def __init__(self, report: SearchReport, sink):
        self.report = report
        self.sink = sink

    def __call__(self, ind: EvaluatedIndividual, ctx: EvalContext):
        r = self.report
        r.evaluations += 1
        r.simulated_time += ind.fitness.et
        if ind.outcome == COLLISION:
            r.collisions.append({"lineage": list(ind.lineage), "time": ind.collision_time})
        elif ind.fitness.collided:
            r.violations.append({"lineage": list(ind.lineage), "time": ind.collision_time})
        if self.sink is not None:
            self.sink(ind, ctx)


def run_ga(cfg: GAConfig, encoding, technique: str, sink=None) -> SearchReport:
    """evaluate -> local fuzz (conditional) -> select -> restart, for ``cfg.generations``."""
    started = time.perf_counter()
    seed = cfg.rng_seed
    rng = derive_rng(seed, 99)
    report = SearchReport(technique, seed)
    track = _Tracker(report, sink)
    population: list = init_population(cfg, encoding, rng)
    history: list[float] = []
    all_scores: list[float] = []
    best_ever: Optional[EvaluatedIndividual] = None

    for gen in range(cfg.generations):
        evaluated: list[EvaluatedIndividual] = []
        for idx, item in enumerate(population):
            if isinstance(item, EvaluatedIndividual):
                evaluated.append(item)
                continue
            ind = encoding.evaluate(item, (seed, PHASE_GA, gen, idx))
            track(ind, EvalContext(technique, gen, idx, "ga", report.restarts))
            evaluated.append(ind)
            all_scores.append(ind.score)

        top_i = min(range(len(evaluated)), key=lambda i: rank_key(evaluated[i], i))
        top = evaluated[top_i]
        if (cfg.local_fuzz.sub_generations > 0 and not top.collided
                and top.score >= np.percentile(all_scores, cfg.local_fuzz.trigger_percentile)):
            act = report.local_fuzz_activations
            report.local_fuzz_activations += 1

            def lineage(g, i, gen=gen, act=act):
                return (seed, PHASE_LOCAL, gen, act, g, i)

            def on_eval(ind, gen=gen, act=act):
                all_scores.append(ind.score)
                track(ind, EvalContext(technique, gen, -1, "local", report.restarts, act))

            found = local_fuzz(top, cfg, rng, encoding, lineage, on_eval)
            if found.score > top.score:
                evaluated[top_i] = found

        best = elites(evaluated, 1)[0]
        if best_ever is None or rank_key(best, 0) < rank_key(best_ever, 1):
            best_ever = best
        history.append(best.score)
        report.best_per_generation.append(best.score)
        report.mean_per_generation.append(float(np.mean([e.score for e in evaluated])))
        if gen == cfg.generations - 1:
            break
        fresh = maybe_restart(history, cfg, rng, encoding, best_ever)
        if fresh is not None:
            report.restarts += 1
            history = []
            population = fresh
        else:
            population = select_next_generation(evaluated, cfg, rng, encoding.random_gene)

    report.wall_clock = time.perf_counter() - started
    log.info("%s seed=%d: %d evaluations, %d collisions, %d local fuzz, %d restarts",
             technique, seed, report.evaluations, len(report.collisions),
             report.local_fuzz_activations, report.restarts)
    return report


def run_search(cfg: GAConfig, template: ScenarioTemplate, sink=None) -> SearchReport:
    return run_ga(cfg, GridEncoding(template, cfg), "pafot", sink)
