import numpy as np
import pytest

from src.landscape import LandscapeSpec, generate, hamming_neighbors, index_to_config
from src.search import Evaluator, SearchStrategy, choose, discover, hill_climb, search_step
from src.utils.rng import substream


def _distance(a, b):
    return sum(x != y for x, y in zip(a, b))


def test_noise_free_evaluator_consumes_no_draws():
    """
    sigma_eval=0 must leave the stream untouched.
    """
    rng = substream(1, "search")
    before = rng.bit_generator.state
    assert Evaluator(lambda c: 0.5, 0.0, rng)((0, 1)) == 0.5
    assert rng.bit_generator.state == before


def test_noisy_evaluator_needs_a_stream():
    with pytest.raises(ValueError):
        Evaluator(lambda c: 0.5, 0.1)


def test_discovery_respects_budget_radius_and_distinctness():
    strategy = SearchStrategy(discovery_budget=5, local_radius=2)
    current = (0,) * 6
    candidates = discover(strategy, current, substream(2, "search"))
    assert len(candidates) == 5
    assert len(set(candidates)) == 5
    assert all(1 <= _distance(c, current) <= 2 for c in candidates)


def test_discovery_stops_when_the_pool_is_exhausted():
    """
    Radius 1 over 4 bits has only 4 candidates, whatever the budget.
    """
    candidates = discover(SearchStrategy(discovery_budget=10), (0, 0, 0, 0), substream(3, "search"))
    assert sorted(candidates) == sorted([(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)])


def test_discovery_only_touches_free_bits():
    candidates = discover(SearchStrategy(discovery_budget=7, local_radius=3), (0,) * 6,
                          substream(4, "search"), free_bits=[3, 4, 5])
    assert len(candidates) == 7
    assert all(c[:3] == (0, 0, 0) for c in candidates)


def test_long_jumps_are_distant():
    """
    Without an explicit minimum a jump flips at least max(2, m // 2) bits.
    """
    strategy = SearchStrategy(kind="long-jump", discovery_budget=20)
    current = (0,) * 10
    candidates = discover(strategy, current, substream(5, "search"))
    assert all(_distance(c, current) >= 5 for c in candidates)


def test_ambidextrous_extremes():
    current = (0,) * 8
    local = SearchStrategy(kind="ambidextrous", discovery_budget=8, p_explore=0.0)
    assert all(_distance(c, current) == 1 for c in discover(local, current, substream(6, "a")))
    far = SearchStrategy(kind="ambidextrous", discovery_budget=8, p_explore=1.0)
    assert all(_distance(c, current) >= 4 for c in discover(far, current, substream(6, "b")))


def test_choose_keeps_status_quo_on_ties():
    values = {(0,): 0.5, (1,): 0.5}
    assert choose((0,), [(1,)], Evaluator(values.get)) == (0,)


def test_steepest_and_first_improvement_differ():
    values = {(0, 0): 0.1, (1, 0): 0.3, (0, 1): 0.9}
    evaluator = Evaluator(values.get)
    candidates = [(1, 0), (0, 1)]
    assert choose((0, 0), candidates, evaluator, "steepest-ascent") == (0, 1)
    assert choose((0, 0), candidates, evaluator, "first-improvement") == (1, 0)


def test_search_step_reports_perceived_value():
    land = generate(LandscapeSpec(5, 1, "random", seed=2))
    strategy = SearchStrategy(discovery_budget=5)
    config, perceived = search_step(strategy, (0,) * 5, Evaluator(land.fitness), substream(1, "s"))
    assert perceived == land.fitness(config)
    assert perceived >= land.fitness((0,) * 5)


def test_strategy_validation():
    with pytest.raises(ValueError):
        SearchStrategy(kind="random-walk")
    with pytest.raises(ValueError):
        SearchStrategy(discovery_budget=0)
    with pytest.raises(ValueError):
        SearchStrategy(p_explore=1.5)
    with pytest.raises(ValueError):
        SearchStrategy(sigma_eval=-0.1)
    with pytest.raises(ValueError):
        SearchStrategy(jump_radius_min=1)


def test_hill_climb_is_monotone_and_halts_on_local_optima():
    """
    With full one-flip discovery and no noise every climb rises and stops on a census optimum.
    """
    land = generate(LandscapeSpec(8, 3, "random", seed=21))
    optima = set(land.local_optima_census().optima)
    strategy = SearchStrategy(discovery_budget=8)
    rng = substream(21, "search")
    for index in range(0, 256, 5):
        path = hill_climb(land.fitness, strategy, index_to_config(index, 8), rng)
        values = [land.fitness(c) for c in path]
        assert values == sorted(values)
        assert path[-1] in optima


def test_hill_climb_on_k_zero_reaches_global_optimum_within_n_steps():
    for n in (4, 7, 10):
        land = generate(LandscapeSpec(n, 0, "random", seed=n))
        best, _ = land.global_optimum()
        strategy = SearchStrategy(discovery_budget=n)
        rng = substream(n, "search")
        for index in range(2**n):
            path = hill_climb(land.fitness, strategy, index_to_config(index, n), rng)
            assert path[-1] == best
            assert len(path) - 1 <= n


def test_noisy_climb_needs_explicit_steps():
    strategy = SearchStrategy(sigma_eval=0.1)
    with pytest.raises(ValueError):
        hill_climb(lambda c: 0.5, strategy, (0, 0), substream(1, "s"))
    path = hill_climb(lambda c: 0.5, strategy, (0, 0), substream(1, "s"), steps=5)
    assert len(path) == 6


def test_cached_perception_reuses_the_status_quo_judgment():
    """
    With caching the status quo is judged once per accepted move instead of every step.
    """
    calls = []

    def value(config):
        calls.append(config)
        return float(sum(config))

    strategy = SearchStrategy(discovery_budget=1, cache_perception=True)
    hill_climb(value, strategy, (0, 0, 0), substream(9, "s"), steps=3)
    cached = len(calls)
    calls.clear()
    hill_climb(value, SearchStrategy(discovery_budget=1), (0, 0, 0), substream(9, "s"), steps=3)
    assert cached < len(calls)


def test_search_is_reproducible_by_seed():
    land = generate(LandscapeSpec(10, 4, "random", seed=1))
    strategy = SearchStrategy(kind="ambidextrous", discovery_budget=3, p_explore=0.3, sigma_eval=0.05)
    a = hill_climb(land.fitness, strategy, (0,) * 10, substream(7, "s"), steps=20)
    b = hill_climb(land.fitness, strategy, (0,) * 10, substream(7, "s"), steps=20)
    assert a == b
    assert np.isfinite([land.fitness(c) for c in a]).all()


def test_full_local_budget_lists_every_neighbour():
    current = (0, 1, 1, 0, 1)
    candidates = discover(SearchStrategy(discovery_budget=5), current, substream(8, "search"))
    assert sorted(candidates) == sorted(hamming_neighbors(current, 1))


def test_explicit_jump_radius_is_respected_and_replayable():
    strategy = SearchStrategy(kind="long-jump", discovery_budget=2, jump_radius_min=3)
    current = (0,) * 6
    first = discover(strategy, current, substream(10, "search"))
    assert len(first) == 2
    assert all(_distance(c, current) >= 3 for c in first)
    assert discover(strategy, current, substream(10, "search")) == first


def test_steepest_ascent_takes_the_best_improvement():
    values = {(0, 0): 0.5, (1, 0): 0.4, (0, 1): 0.7}
    assert choose((0, 0), [(1, 0), (0, 1)], Evaluator(values.get)) == (0, 1)
    assert choose((0, 1), [(0, 0), (1, 0)], Evaluator(values.get)) == (0, 1)
