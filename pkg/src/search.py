"""
Stepwise adaptive search over binary configurations.

A search step discovers a few candidate configurations near (or far from)
the status quo and keeps the status quo unless a candidate is perceived as
strictly better. Perception goes through an :class:`Evaluator`, which adds
fresh Gaussian noise to every judgment.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from src.landscape import Configuration, flip

KINDS = ("steepest-ascent", "first-improvement", "long-jump", "ambidextrous")
POOL_ENUMERATION_LIMIT = 1 << 16


@dataclass(frozen=True)
class SearchStrategy:
    """How candidates are discovered and judged.

    ``jump_radius_min`` of None means half the searchable bits, rounded down,
    but never less than two.
    """

    kind: str = "steepest-ascent"
    discovery_budget: int = 1
    local_radius: int = 1
    jump_radius_min: int | None = None
    p_explore: float = 0.0
    sigma_eval: float = 0.0
    cache_perception: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown search kind '{self.kind}', expected one of {KINDS}")
        if self.discovery_budget < 1:
            raise ValueError(f"discovery_budget must be at least 1, got {self.discovery_budget}")
        if self.local_radius < 1:
            raise ValueError(f"local_radius must be at least 1, got {self.local_radius}")
        if self.jump_radius_min is not None and self.jump_radius_min < 2:
            raise ValueError(f"jump_radius_min must be at least 2, got {self.jump_radius_min}")
        if not 0.0 <= self.p_explore <= 1.0:
            raise ValueError(f"p_explore must lie in [0, 1], got {self.p_explore}")
        if self.sigma_eval < 0.0:
            raise ValueError(f"sigma_eval must be non-negative, got {self.sigma_eval}")

    def jump_min(self, free_bits: int) -> int:
        if self.jump_radius_min is not None:
            return self.jump_radius_min
        return max(2, free_bits // 2)

    @property
    def choice_rule(self) -> str:
        return "first" if self.kind == "first-improvement" else "steepest"


class Evaluator:
    """Perceived value = true value + N(0, sigma); sigma 0 consumes no draws."""

    def __init__(self, value_fn: Callable[[Configuration], float], sigma: float = 0.0,
                 rng: np.random.Generator | None = None):
        if sigma > 0.0 and rng is None:
            raise ValueError("A noisy evaluator needs a random stream")
        self.value_fn = value_fn
        self.sigma = sigma
        self.rng = rng

    def true_value(self, config: Configuration) -> float:
        return self.value_fn(config)

    def __call__(self, config: Configuration) -> float:
        value = self.value_fn(config)
        if self.sigma > 0.0:
            value += float(self.rng.normal(0.0, self.sigma))
        return value


class _FlipPool:
    """Flip sets with sizes in [low, high] over ``positions``, drawn uniformly
    without replacement."""

    def __init__(self, positions: Sequence[int], low: int, high: int):
        self.positions = np.array(positions, dtype=np.int64)
        m = len(positions)
        self.sizes = list(range(max(low, 1), min(high, m) + 1))
        counts = [math.comb(m, d) for d in self.sizes]
        self.total = sum(counts)
        self.taken: set[tuple[int, ...]] = set()
        self.members: list[tuple[int, ...]] | None = None
        self.weights = np.array(counts, dtype=np.float64) / self.total if self.total else None
        if self.total <= POOL_ENUMERATION_LIMIT:
            self.members = [c for d in self.sizes for c in itertools.combinations(positions, d)]

    def remaining(self) -> int:
        if self.members is not None:
            return len(self.members)
        return self.total - len(self.taken)

    def draw(self, rng: np.random.Generator) -> tuple[int, ...]:
        if self.members is not None:
            k = int(rng.integers(len(self.members)))
            self.members[k], self.members[-1] = self.members[-1], self.members[k]
            return self.members.pop()
        while True:
            size = int(rng.choice(self.sizes, p=self.weights))
            flips = tuple(sorted(int(i) for i in rng.choice(self.positions, size=size, replace=False)))
            if flips not in self.taken:
                self.taken.add(flips)
                return flips


def discover(strategy: SearchStrategy, current: Configuration, rng: np.random.Generator,
             free_bits: Iterable[int] | None = None) -> list[Configuration]:
    """Up to ``discovery_budget`` distinct candidates differing from ``current``
    only in ``free_bits`` (all bits by default)."""
    free = tuple(range(len(current))) if free_bits is None else tuple(sorted(free_bits))
    m = len(free)
    if strategy.kind == "ambidextrous":
        use_local, use_jump = strategy.p_explore < 1.0, strategy.p_explore > 0.0
    else:
        use_local = strategy.kind != "long-jump"
        use_jump = not use_local
    local = _FlipPool(free, 1, strategy.local_radius) if use_local else None
    jump = _FlipPool(free, strategy.jump_min(m), m) if use_jump else None
    pools = tuple(pool for pool in (local, jump) if pool is not None)

    candidates: list[Configuration] = []
    seen: set[tuple[int, ...]] = set()
    while len(candidates) < strategy.discovery_budget:
        live = [p for p in pools if p.remaining()]
        if not live:
            break
        pool = live[0]
        if len(live) == 2:
            pool = jump if rng.random() < strategy.p_explore else local
        flips = pool.draw(rng)
        if flips in seen:
            continue
        seen.add(flips)
        candidates.append(flip(current, flips))
    return candidates


def _choose(current: Configuration, candidates: Sequence[Configuration], evaluator: Evaluator,
            rule: str, current_value: float | None = None) -> tuple[Configuration, float]:
    perceived_current = evaluator(current) if current_value is None else current_value
    if rule == "first":
        for candidate in candidates:
            value = evaluator(candidate)
            if value > perceived_current:
                return candidate, value
        return current, perceived_current

    best, best_value = None, -math.inf
    for candidate in candidates:
        value = evaluator(candidate)
        if value > best_value:
            best, best_value = candidate, value
    if best is not None and best_value > perceived_current:
        return best, best_value
    return current, perceived_current


def choose(current: Configuration, candidates: Sequence[Configuration], evaluator: Evaluator,
           kind: str = "steepest-ascent") -> Configuration:
    """Keeps the status quo unless a candidate is perceived strictly better.

    First-improvement takes the first such candidate in discovery order, every
    other kind the best one.
    """
    rule = "first" if kind == "first-improvement" else "steepest"
    return _choose(current, candidates, evaluator, rule)[0]


def search_step(strategy: SearchStrategy, current: Configuration, evaluator: Evaluator,
                rng: np.random.Generator, free_bits: Iterable[int] | None = None,
                current_value: float | None = None) -> tuple[Configuration, float]:
    """discover + choose; returns the new configuration and its perceived value."""
    candidates = discover(strategy, current, rng, free_bits)
    return _choose(current, candidates, evaluator, strategy.choice_rule, current_value)


def hill_climb(value_fn: Callable[[Configuration], float], strategy: SearchStrategy,
               start: Configuration, rng: np.random.Generator, steps: int | None = None) -> list[Configuration]:
    """The visited configurations, starting with ``start``.

    With ``steps=None`` the climb stops at the first step that keeps the status
    quo; under full discovery and no noise that is a local optimum.
    """
    if steps is None and strategy.sigma_eval > 0.0:
        raise ValueError("A noisy climb needs an explicit number of steps")
    evaluator = Evaluator(value_fn, strategy.sigma_eval, rng)
    path = [tuple(start)]
    perceived = None
    t = 0
    while steps is None or t < steps:
        current = path[-1]
        cached = perceived if strategy.cache_perception else None
        nxt, perceived = search_step(strategy, current, evaluator, rng, current_value=cached)
        if steps is None and nxt == current:
            break
        path.append(nxt)
        t += 1
    return path
