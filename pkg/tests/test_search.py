import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridfuzz.grid import PositionInstruction as PI, adjacent_cells
from gridfuzz.metrics import FitnessRecord
from gridfuzz.scenario import COLLISION, TIMEOUT, ScenarioTemplate
from gridfuzz.search import (CellPlacement, Chromosome, EvaluatedIndividual, GAConfig, Genome,
                             GridEncoding, LocalFuzzConfig, RestartConfig, crossover, elites,
                             evaluate, init_population, local_fuzz, maybe_restart, mutate, run_ga,
                             run_search, select_next_generation, should_restart)


class ToyEncoding:
    """Cheap stand-in: genes are integers and the score is their mean."""

    kind = "toy"

    def __init__(self, npcs=2, genes=6, collide_at=None):
        self.npcs, self.genes, self.collide_at = npcs, genes, collide_at
        self.calls = 0

    def random_gene(self, rng):
        return int(rng.integers(0, 10))

    def random_genome(self, rng):
        return Genome(self.kind, tuple(
            Chromosome(int(rng.integers(100)), tuple(self.random_gene(rng) for _ in range(self.genes)))
            for _ in range(self.npcs)))

    def evaluate(self, genome, lineage):
        self.calls += 1
        genes = [g for c in genome.chromosomes for g in c.genes]
        score = float(np.mean(genes))
        collided = self.collide_at is not None and score >= self.collide_at
        rec = FitnessRecord(10.0, 50.0, 0.0, 0.0, 30.0, collided, score)
        return EvaluatedIndividual(genome, rec, COLLISION if collided else TIMEOUT,
                                   1.0 if collided else None, tuple(lineage))


def toy_individual(score, et=30.0, genome=None):
    rec = FitnessRecord(10.0, 50.0, 0.0, 0.0, et, False, score)
    if genome is None:
        genome = Genome("toy", (Chromosome(0, (0,) * 6), Chromosome(1, (1,) * 6)))
    return EvaluatedIndividual(genome, rec, TIMEOUT, None, ())


def flat(genome):
    return [g for c in genome.chromosomes for g in c.genes]


TEMPLATE = ScenarioTemplate()


def test_random_genome_cardinality():
    cfg = GAConfig()
    g = GridEncoding(TEMPLATE, cfg).random_genome(np.random.default_rng(0))
    assert len(g.chromosomes) == 2
    assert g.gene_count == 2 * 6
    pop = init_population(cfg, GridEncoding(TEMPLATE, cfg), np.random.default_rng(0))
    assert len(pop) == 8


def test_random_genomes_are_adjacency_walks_on_the_road():
    cfg = GAConfig()
    enc = GridEncoding(TEMPLATE, cfg)
    rng = np.random.default_rng(3)
    for _ in range(200):
        for chrom in enc.random_genome(rng).chromosomes:
            cells = [chrom.placement.cell] + [g.cell for g in chrom.genes]
            assert all(b == a or b in adjacent_cells(a) for a, b in zip(cells, cells[1:]))
            assert all(0 <= g.speed <= TEMPLATE.road.speed_limit for g in chrom.genes)


def test_random_genome_is_seed_deterministic():
    enc = GridEncoding(TEMPLATE, GAConfig())
    assert enc.random_genome(np.random.default_rng(11)) == enc.random_genome(np.random.default_rng(11))


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_crossover_conserves_the_chromosome_multiset(seed):
    rng = np.random.default_rng(seed)
    enc = ToyEncoding()
    a, b = enc.random_genome(rng), enc.random_genome(rng)
    c, d = crossover(a, b, 1.0, rng)
    assert Counter(a.chromosomes + b.chromosomes) == Counter(c.chromosomes + d.chromosomes)
    assert len(c.chromosomes) == len(a.chromosomes)


def test_crossover_with_zero_probability_is_identity():
    rng = np.random.default_rng(0)
    enc = ToyEncoding()
    a, b = enc.random_genome(rng), enc.random_genome(rng)
    for _ in range(100):
        assert crossover(a, b, 0.0, rng) == (a, b)


def test_crossover_rejects_mismatched_npc_counts():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        crossover(ToyEncoding(2).random_genome(rng), ToyEncoding(3).random_genome(rng), 1.0, rng)


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_mutation_changes_at_most_one_gene(seed, p_m):
    rng = np.random.default_rng(seed)
    enc = ToyEncoding()
    g = enc.random_genome(rng)
    m = mutate(g, p_m, rng, enc.random_gene)
    assert sum(x != y for x, y in zip(flat(g), flat(m))) <= 1
    assert [c.placement for c in g.chromosomes] == [c.placement for c in m.chromosomes]


def test_operator_rates_match_probabilities():
    rng = np.random.default_rng(42)
    enc = ToyEncoding()
    a, b = enc.random_genome(rng), enc.random_genome(rng)
    n = 10_000
    crossed = sum(crossover(a, b, 0.5, rng) != (a, b) for _ in range(n))
    # a gene that never changes value under mutation makes "applied" observable
    fixed = Genome("toy", (Chromosome(0, (0,) * 6),))
    mutated = sum(mutate(fixed, 0.5, rng, lambda r: 1) != fixed for _ in range(n))
    assert abs(crossed / n - 0.5) <= 0.02
    assert abs(mutated / n - 0.5) <= 0.02


@pytest.mark.parametrize("k", [4, 8, 16, 20])
def test_elite_count_is_top_quarter_rounded_up(k):
    cfg = GAConfig(population_size=k)
    assert cfg.elite_count == math.ceil(0.25 * k)
    pop = [toy_individual(float(i)) for i in range(k)]
    top = elites(pop, cfg.elite_count)
    assert [e.score for e in top] == sorted((float(i) for i in range(k)), reverse=True)[:cfg.elite_count]
    nxt = select_next_generation(pop, cfg, np.random.default_rng(0), ToyEncoding().random_gene)
    assert len(nxt) == k
    assert nxt[:cfg.elite_count] == top
    assert not any(isinstance(x, EvaluatedIndividual) for x in nxt[cfg.elite_count:])


def test_elite_ties_break_on_et_then_order():
    a = toy_individual(1.0, et=10.0)
    b = toy_individual(1.0, et=5.0)
    c = toy_individual(1.0, et=10.0)
    assert elites([a, b, c], 3) == [b, a, c]
    same = [toy_individual(0.5) for _ in range(6)]
    assert elites(same, 6) == same


def test_config_validation():
    with pytest.raises(ValueError):
        GAConfig(population_size=3)
    with pytest.raises(ValueError):
        GAConfig(p_c=1.5)
    with pytest.raises(ValueError):
        GAConfig(scenario_budget=0)


def test_local_fuzz_without_sub_generations_returns_seed():
    cfg = GAConfig(local_fuzz=LocalFuzzConfig(sub_generations=0))
    enc = ToyEncoding()
    seed = enc.evaluate(enc.random_genome(np.random.default_rng(0)), (0,))
    assert local_fuzz(seed, cfg, np.random.default_rng(0), enc, lambda g, i: (g, i)) is seed


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_local_fuzz_never_returns_worse_than_seed(s):
    cfg = GAConfig()
    enc = ToyEncoding()
    rng = np.random.default_rng(s)
    seed = enc.evaluate(enc.random_genome(rng), (0,))
    seen = []
    out = local_fuzz(seed, cfg, rng, enc, lambda g, i: (g, i), seen.append)
    assert out.score >= seed.score
    assert len(seen) <= cfg.local_fuzz.sub_generations * cfg.sub_population


def test_restart_trigger():
    cfg = GAConfig(restart=RestartConfig(stagnation_window=5, epsilon=0.01))
    assert not should_restart([1.0] * 4, cfg)
    assert should_restart([1.0, 1.0, 1.0, 1.0, 1.005], cfg)
    assert not should_restart([1.0, 1.0, 1.0, 1.0, 1.02], cfg)
    enc = ToyEncoding()
    best = toy_individual(9.0)
    fresh = maybe_restart([1.0] * 5, cfg, np.random.default_rng(0), enc, best)
    assert len(fresh) == cfg.population_size and fresh[0] is best
    assert maybe_restart([1.0, 2.0], cfg, np.random.default_rng(0), enc, best) is None
    with pytest.raises(ValueError):
        maybe_restart([], cfg, np.random.default_rng(0), enc, best)


def _epochs(cfg, enc):
    gen_epoch = {}

    def sink(ind, ctx):
        gen_epoch.setdefault(ctx.generation, ctx.restart_epoch)

    report = run_ga(cfg, enc, "toy", sink)
    return report, gen_epoch


@pytest.mark.parametrize("seed", range(10))
def test_best_score_is_monotone_between_restarts(seed):
    cfg = GAConfig(generations=40, rng_seed=seed)
    report, gen_epoch = _epochs(cfg, ToyEncoding())
    best = report.best_per_generation
    for g in range(1, len(best)):
        if gen_epoch[g] == gen_epoch[g - 1]:
            assert best[g] >= best[g - 1]


def test_stagnant_search_restarts():
    class Flat(ToyEncoding):
        def random_gene(self, rng):
            return 3

    report, _ = _epochs(GAConfig(generations=20), Flat())
    assert report.restarts >= 2


def test_local_fuzz_skips_colliding_tops():
    report, _ = _epochs(GAConfig(generations=10), ToyEncoding(collide_at=0.0))
    assert report.local_fuzz_activations == 0


def test_single_generation_evaluates_the_population_once():
    cfg = GAConfig(population_size=4, generations=1, scenario_budget=5.0,
                   local_fuzz=LocalFuzzConfig(sub_generations=0))
    report = run_search(cfg, TEMPLATE)
    assert report.evaluations == 4
    assert len(report.best_per_generation) == 1


def test_search_report_is_reproducible():
    cfg = GAConfig(population_size=4, generations=3, scenario_budget=5.0, rng_seed=9)
    a = run_search(cfg, TEMPLATE).deterministic_dict()
    b = run_search(cfg, TEMPLATE).deterministic_dict()
    assert a == b


def test_full_budget_scenario_has_360_samples():
    g = Genome("pi", (Chromosome(CellPlacement(6, 5.0), tuple(PI(6, 2.0) for _ in range(6))),
                      Chromosome(CellPlacement(7, 5.0), tuple(PI(6, 2.0) for _ in range(6)))))
    ind = evaluate(g, GAConfig(scenario_budget=60.0), TEMPLATE)
    assert ind.outcome == TIMEOUT
    assert ind.fitness.et == 60.0
    assert len(ind.samples) == 360


def test_evaluation_is_a_pure_function_of_genome_and_lineage():
    cfg = GAConfig(scenario_budget=10.0)
    enc = GridEncoding(TEMPLATE, cfg)
    g = enc.random_genome(np.random.default_rng(5))
    a, b = enc.evaluate(g, (1, 0, 2, 3)), enc.evaluate(g, (1, 0, 2, 3))
    assert a.fitness == b.fitness and a.genome == b.genome and a.outcome == b.outcome


def test_repaired_genes_are_written_back():
    cfg = GAConfig(scenario_budget=10.0)
    # cell 5 is not adjacent to the starting cell 2
    g = Genome("pi", (Chromosome(CellPlacement(2, 25.0), (PI(5, 20.0),) + (PI(2, 20.0),) * 5),
                      Chromosome(CellPlacement(6, 5.0), (PI(6, 5.0),) * 6)))
    ind = evaluate(g, cfg, TEMPLATE)
    first = ind.genome.chromosomes[0].genes[0]
    assert first.cell in adjacent_cells(2)
    assert first.speed == 20.0
    # the repaired genome is a fixed point
    again = evaluate(ind.genome, cfg, TEMPLATE)
    assert again.genome == ind.genome and again.fitness == ind.fitness
