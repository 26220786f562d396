import numpy as np
import pytest

from src.landscape import Landscape, LandscapeSpec, generate, index_to_config
from src.organization import (
    CoordinationMode,
    OrgDesign,
    TaskComplexity,
    check_task,
    org_step,
    run_org,
    task_landscape_spec,
    unit_objective,
)
from src.search import Evaluator, SearchStrategy, search_step
from src.utils.rng import substream

# attribute 0 reads attribute 1; unit 0 gains +0.02 in V by flipping, unit 1 loses 0.01
TWO_UNIT_TABLES = [[0.5, 0.38, 0.54, 0.4], [0.5, 0.6]]
TWO_UNIT_SETS = [(1,), ()]


def _task(sizes, complexity, seed, **kwargs):
    org = OrgDesign.from_sizes(sizes, **kwargs)
    return org, generate(task_landscape_spec(org, complexity, seed))


def test_single_unit_objective_is_firm_fitness():
    org, land = _task([5], TaskComplexity.NON_DECOMPOSABLE, 3)
    for index in range(32):
        config = index_to_config(index, 5)
        assert unit_objective(org, 0, land, config) == land.fitness(config)


def test_constant_landscape_objectives():
    land = Landscape.from_tables([[0.5, 0.5]] * 4)
    for w in (0.0, 0.3, 1.0):
        org = OrgDesign.from_sizes([2, 2], incentive_weight=w)
        assert unit_objective(org, 0, land, (0, 1, 1, 0)) == pytest.approx(0.5)
        assert unit_objective(org, 1, land, (0, 1, 1, 0)) == pytest.approx(0.5)


def test_incentive_weight_mixes_own_and_residual_means():
    land = Landscape.from_tables([[0.2, 0.2], [0.4, 0.4], [0.9, 0.9]])
    org = OrgDesign.from_sizes([1, 2], incentive_weight=0.5)
    assert unit_objective(org, 0, land, (0, 0, 0)) == pytest.approx(0.5 * 0.2 + 0.5 * 0.65)


def test_design_validation():
    with pytest.raises(ValueError):
        OrgDesign(blocks=((0, 2), (1,)))
    with pytest.raises(ValueError):
        OrgDesign(blocks=((0,), ()))
    with pytest.raises(ValueError):
        OrgDesign.from_sizes([2], incentive_weight=1.5)
    with pytest.raises(ValueError):
        OrgDesign.from_sizes([2], communication_error=-0.1)


def test_task_landscapes_match_complexity():
    org, land = _task([3, 3], TaskComplexity.DECOMPOSABLE, 1)
    check_task(org, land, "decomposable")
    assert land.interaction_sets[4] == (3, 5)
    org, land = _task([3, 3], TaskComplexity.NON_DECOMPOSABLE, 1)
    check_task(org, land, "non-decomposable")
    with pytest.raises(ValueError):
        check_task(org, land, "decomposable")


def test_hierarchical_requires_headquarters():
    org, land = _task([2, 2], "non-decomposable", 1, headquarters=False)
    with pytest.raises(ValueError, match="headquarters"):
        org_step(org, "hierarchical", land, SearchStrategy(), (0, 0, 0, 0), substream(1, "o"))


def test_single_unit_org_is_a_plain_search_step():
    """
    One unit has nothing to coordinate: every mode equals a search step on V.
    """
    land = generate(LandscapeSpec(6, 3, "random", seed=4))
    org = OrgDesign.from_sizes([6])
    strategy = SearchStrategy(discovery_budget=3, local_radius=2, sigma_eval=0.05)
    start = (0, 1, 0, 1, 1, 0)
    rng = substream(4, "plain")
    expected = search_step(strategy, start, Evaluator(land.fitness, strategy.sigma_eval, rng), rng)[0]
    for mode in CoordinationMode:
        assert org_step(org, mode, land, strategy, start, substream(4, "plain")).config == expected


def test_hierarchy_implements_the_best_proposal():
    """
    Proposals worth +0.02 and -0.01 in V: headquarters takes the +0.02 one only.
    """
    land = Landscape.from_tables(TWO_UNIT_TABLES, interaction_sets=TWO_UNIT_SETS)
    org = OrgDesign.from_sizes([1, 1])
    strategy = SearchStrategy(discovery_budget=1)
    result = org_step(org, "hierarchical", land, strategy, (0, 0), substream(1, "o"))
    assert result.config == (1, 0)
    assert result.implemented == (0,)
    assert all(d.moved for d in result.decisions)


def test_decentralized_implements_every_move():
    land = Landscape.from_tables(TWO_UNIT_TABLES, interaction_sets=TWO_UNIT_SETS)
    org = OrgDesign.from_sizes([1, 1])
    result = org_step(org, "decentralized", land, SearchStrategy(), (0, 0), substream(1, "o"))
    assert result.config == (1, 1)


def test_implement_all_variant_takes_every_approved_proposal():
    land = Landscape.from_tables([[0.5, 0.6], [0.5, 0.7]])
    org = OrgDesign.from_sizes([1, 1], hq_implements_all=True)
    result = org_step(org, "hierarchical", land, SearchStrategy(), (0, 0), substream(1, "o"))
    assert result.config == (1, 1)


def test_garbled_proposals_never_reach_headquarters():
    """
    With every bit flipped in transit a one-bit proposal arrives as the status quo.
    """
    org, land = _task([1, 1, 1], "non-decomposable", 5, communication_error=1.0)
    rng = substream(5, "o")
    config = (0, 1, 0)
    for _ in range(10):
        assert org_step(org, "hierarchical", land, SearchStrategy(), config, rng).config == config


def test_sequential_units_see_earlier_announcements():
    """
    Unit 1 evaluates its options against unit 0's announced move.
    """
    # attribute 1 prefers to match attribute 0
    land = Landscape.from_tables([[0.5, 0.6], [0.9, 0.1, 0.1, 0.9]], interaction_sets=[(), (0,)])
    org = OrgDesign.from_sizes([1, 1])
    sequential = org_step(org, "sequential-lateral", land, SearchStrategy(), (0, 0), substream(1, "o"))
    decentralized = org_step(org, "decentralized", land, SearchStrategy(), (0, 0), substream(1, "o"))
    assert sequential.config == (1, 1)
    assert decentralized.config == (1, 0)


def test_moves_stay_inside_moving_units():
    org, land = _task([2, 3, 2], "non-decomposable", 9)
    strategy = SearchStrategy(kind="long-jump", discovery_budget=3, sigma_eval=0.05)
    rng = substream(9, "o")
    config = (0,) * 7
    for mode in CoordinationMode:
        for _ in range(20):
            step = org_step(org, mode, land, strategy, config, rng)
            changed = {i for i in range(7) if step.config[i] != config[i]}
            owned = {i for d in step.decisions if d.moved for i in org.blocks[d.unit]}
            assert changed <= owned
            config = step.config


def test_hierarchy_never_lowers_true_value_without_noise():
    org, land = _task([3, 3], "non-decomposable", 17)
    strategy = SearchStrategy(kind="long-jump", discovery_budget=4)
    for seed in range(20):
        records = run_org(org, "hierarchical", land, strategy, 30, substream(seed, "o"))
        values = [r.value for r in records]
        assert values == sorted(values)


def test_decentralized_solves_decomposable_tasks_from_every_start():
    """
    Units that see their whole block reach the global optimum of a decomposable task.
    """
    for seed in range(5):
        org, land = _task([3, 3], "decomposable", seed)
        best, _ = land.global_optimum()
        strategy = SearchStrategy(discovery_budget=7, local_radius=3)
        for index in range(64):
            records = run_org(org, "decentralized", land, strategy, 2, substream(seed, "o"),
                              start=index_to_config(index, 6))
            assert records[-1].config == best


def test_decentralized_decomposable_never_declines():
    org, land = _task([2, 2, 2], "decomposable", 8)
    records = run_org(org, "decentralized", land, SearchStrategy(), 25, substream(8, "o"))
    values = [r.value for r in records]
    assert values == sorted(values)


def test_run_org_records():
    org, land = _task([2, 2], "non-decomposable", 2)
    records = run_org(org, "sequential-lateral", land, SearchStrategy(), 1, substream(2, "o"))
    assert [r.period for r in records] == [0, 1]
    assert len(records[0].objectives) == 2
    with pytest.raises(ValueError):
        run_org(org, "decentralized", land, SearchStrategy(), 0, substream(2, "o"))


def test_run_org_is_reproducible():
    org, land = _task([3, 3], "non-decomposable", 6)
    strategy = SearchStrategy(kind="ambidextrous", discovery_budget=2, p_explore=0.5, sigma_eval=0.05)
    a = run_org(org, "sequential-lateral", land, strategy, 15, substream(6, "o"))
    b = run_org(org, "sequential-lateral", land, strategy, 15, substream(6, "o"))
    assert [r.config for r in a] == [r.config for r in b]


def test_with_unit_appends_a_block():
    org = OrgDesign.from_sizes([2, 2]).with_unit(2)
    assert org.blocks == ((0, 1), (2, 3), (4, 5))
    assert org.n == 6


def test_one_period_run_is_one_org_step():
    org, land = _task([2, 2], "non-decomposable", 12)
    strategy = SearchStrategy(discovery_budget=2)
    start = (1, 0, 0, 1)
    records = run_org(org, "decentralized", land, strategy, 1, substream(12, "o"), start=start)
    assert records[1].config == org_step(org, "decentralized", land, strategy, start, substream(12, "o")).config


@pytest.mark.slow
def test_hierarchy_beats_decentralization_on_interdependent_tasks():
    """
    N=12 with K=N-1 over 200 seeds: decentralized units end below hierarchical firms on average.
    """
    strategy = SearchStrategy(discovery_budget=2)
    finals = {"decentralized": [], "hierarchical": []}
    for seed in range(200):
        org, land = _task([3, 3, 3, 3], "non-decomposable", seed)
        for mode in finals:
            records = run_org(org, mode, land, strategy, 50, substream(seed, "o", mode))
            finals[mode].append(records[-1].value)
    decentralized, hierarchical = np.array(finals["decentralized"]), np.array(finals["hierarchical"])
    diff = hierarchical - decentralized
    margin = 2 * diff.std(ddof=1) / np.sqrt(diff.size)
    assert diff.mean() > margin
