import numpy as np
import pytest

from gridfuzz.baselines import (ACTIONS, DURATION_RANGE, RANDOM_INTERVAL, SPAWN_RANGE, LanePlacement,
                                ManoeuvreEncoding, ManoeuvreGene, avfuzzer_like, random_budget,
                                random_fuzz)
from gridfuzz.scenario import ScenarioTemplate
from gridfuzz.search import Chromosome, GAConfig, Genome, derive_rng

TEMPLATE = ScenarioTemplate()


def test_gene_validation():
    with pytest.raises(ValueError):
        ManoeuvreGene("teleport", 1.0)
    with pytest.raises(ValueError):
        ManoeuvreGene("keep-lane", 0.0)


def test_random_genomes_respect_placement_ranges():
    enc = ManoeuvreEncoding(TEMPLATE, GAConfig())
    rng = np.random.default_rng(0)
    limit = TEMPLATE.road.speed_limit
    for _ in range(300):
        g = enc.random_genome(rng)
        assert len(g.chromosomes) == TEMPLATE.npc_count
        for c in g.chromosomes:
            p = c.placement
            assert 0 <= p.lane < TEMPLATE.road.lane_count
            assert SPAWN_RANGE[0] <= abs(p.offset) <= SPAWN_RANGE[1]
            assert 0.3 * limit <= p.speed <= limit
            assert len(c.genes) == 6
            for gene in c.genes:
                assert gene.action in ACTIONS
                assert DURATION_RANGE[0] <= gene.duration <= DURATION_RANGE[1]


def test_random_fuzz_genes_change_every_interval():
    cfg = GAConfig(scenario_budget=30.0)
    enc = ManoeuvreEncoding(TEMPLATE, cfg, fixed_interval=RANDOM_INTERVAL)
    g = enc.random_genome(np.random.default_rng(1))
    for c in g.chromosomes:
        assert len(c.genes) == 6
        assert all(gene.duration == RANDOM_INTERVAL for gene in c.genes)


def test_lane_change_moves_the_npc():
    cfg = GAConfig(scenario_budget=6.0)
    enc = ManoeuvreEncoding(TEMPLATE, cfg)
    g = Genome("manoeuvre", (
        Chromosome(LanePlacement(0, 60.0, 20.0), (ManoeuvreGene("lane-change-left", 6.0),)),
        Chromosome(LanePlacement(3, -100.0, 10.0), (ManoeuvreGene("keep-lane", 6.0),)),
    ))
    result, _, _ = enc.simulate(g, record_frames=True)
    y_end = result.frames[-1]["vehicles"][1][1]
    assert abs(y_end - TEMPLATE.road.lane_center(1)) < 0.3


def test_random_budget_matches_ga_nominal_budget():
    assert random_budget(GAConfig(population_size=8, generations=20)) == 160


def test_random_fuzz_is_reproducible():
    cfg = GAConfig(scenario_budget=5.0, rng_seed=4)
    a = random_fuzz(cfg, TEMPLATE, scenarios=6)
    b = random_fuzz(cfg, TEMPLATE, scenarios=6)
    assert a.evaluations == 6
    assert a.deterministic_dict() == b.deterministic_dict()


def test_random_fuzz_genomes_come_from_their_lineage():
    cfg = GAConfig(scenario_budget=5.0, rng_seed=4)
    seen = []
    random_fuzz(cfg, TEMPLATE, sink=lambda ind, ctx: seen.append(ind), scenarios=3)
    enc = ManoeuvreEncoding(TEMPLATE, cfg, fixed_interval=RANDOM_INTERVAL)
    for ind in seen:
        assert ind.genome == enc.random_genome(derive_rng(*ind.lineage))


def test_avfuzzer_runs_the_shared_loop():
    cfg = GAConfig(population_size=4, generations=2, scenario_budget=5.0, rng_seed=2)
    report = avfuzzer_like(cfg, TEMPLATE)
    assert report.technique == "avfuzzer"
    assert report.evaluations >= 4
    assert len(report.best_per_generation) == 2
