"""
Mid-term and long-term adaptation of a multi-unit firm.

Three nested clocks run inside :func:`run_growth_study`: every period the
units search (``org_step``), every ``interval`` periods headquarters reviews
the coordination mode by reinforcement, and at scheduled periods the firm
grows by one unit and a block of new decisions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.landscape import Configuration, Landscape, LandscapeSpec, generate, random_configuration
from src.organization import (
    MODES,
    CoordinationMode,
    OrgDesign,
    TaskComplexity,
    check_task,
    objectives,
    org_step,
    task_landscape_spec,
)
from src.search import SearchStrategy

NEW_BITS = ("random", "zeros")


@dataclass(frozen=True)
class LearningParams:
    interval: int = 5
    gain: float = 1.0
    forgetting: float = 0.0
    floor: float = 0.01
    signed_reward: bool = False

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError(f"Review interval must be at least 1, got {self.interval}")
        if self.gain < 0.0:
            raise ValueError(f"Reinforcement gain must be non-negative, got {self.gain}")
        if not 0.0 <= self.forgetting < 1.0:
            raise ValueError(f"Forgetting factor must lie in [0, 1), got {self.forgetting}")
        if self.floor <= 0.0:
            raise ValueError(f"Propensity floor must be positive, got {self.floor}")


@dataclass(frozen=True)
class Propensities:
    """Mode weights in the order decentralized, sequential-lateral, hierarchical."""

    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(MODES):
            raise ValueError(f"Need one weight per coordination mode, got {len(weights)}")
        if any(not w > 0.0 for w in weights):
            raise ValueError(f"Propensity weights must be positive, got {weights}")
        object.__setattr__(self, "weights", weights)

    def probabilities(self) -> np.ndarray:
        w = np.array(self.weights)
        return w / w.sum()

    def weight(self, mode: CoordinationMode | str) -> float:
        return self.weights[MODES.index(CoordinationMode(mode))]

    def select(self, rng: np.random.Generator) -> CoordinationMode:
        """Roulette-wheel draw: one uniform, cumulative probabilities."""
        cumulative = np.cumsum(self.probabilities())
        k = int(np.searchsorted(cumulative, rng.random(), side="right"))
        return MODES[min(k, len(MODES) - 1)]


def reward(v_start: float, v_end: float, signed: bool = False) -> float:
    """Improvement over the window relative to its starting value."""
    scale = max(v_start, float(np.finfo(np.float64).eps))
    gain = v_end - v_start
    return (gain if signed else max(0.0, gain)) / scale


def review_mode(propensities: Propensities, params: LearningParams, used_mode: CoordinationMode | str,
                v_start: float, v_end: float, rng: np.random.Generator) -> tuple[Propensities, CoordinationMode]:
    """Reinforces the mode used in the last window and draws the next one."""
    used = CoordinationMode(used_mode)
    r = reward(v_start, v_end, params.signed_reward)
    updated = []
    for mode, w in zip(MODES, propensities.weights):
        w = (1.0 - params.forgetting) * w
        if mode is used:
            w += params.gain * r
        updated.append(max(w, params.floor))
    new = Propensities(tuple(updated))
    return new, new.select(rng)


@dataclass(frozen=True)
class GrowthEvent:
    period: int
    n_add: int


@dataclass(frozen=True)
class GrowthSchedule:
    periods: tuple[int, ...] = ()
    n_add: int = 3
    new_bits: str = "random"

    def __post_init__(self):
        periods = tuple(int(p) for p in self.periods)
        if any(p < 1 for p in periods):
            raise ValueError(f"Growth periods must be positive, got {periods}")
        if any(b <= a for a, b in zip(periods, periods[1:])):
            raise ValueError(f"Growth periods must be strictly ascending, got {periods}")
        if self.n_add < 1:
            raise ValueError(f"Each growth event must add at least one attribute, got {self.n_add}")
        if self.new_bits not in NEW_BITS:
            raise ValueError(f"new_bits must be one of {NEW_BITS}, got '{self.new_bits}'")
        object.__setattr__(self, "periods", periods)

    @property
    def events(self) -> list[GrowthEvent]:
        return [GrowthEvent(p, self.n_add) for p in self.periods]


@dataclass(frozen=True)
class Growth:
    org: OrgDesign
    landscape: Landscape
    config: Configuration


def grow(org: OrgDesign, landscape: Landscape, config: Configuration, complexity: TaskComplexity | str,
         event: GrowthEvent, rng: np.random.Generator, new_bits: str = "random") -> Growth:
    """Adds one unit owning ``event.n_add`` new attributes.

    Decomposable tasks keep every existing table and interaction set; only the
    new block is drawn. Non-decomposable tasks are redrawn at K = N-1.
    """
    complexity = TaskComplexity(complexity)
    if event.n_add < 1:
        raise ValueError(f"Growth event at period {event.period} adds no attributes")
    if new_bits not in NEW_BITS:
        raise ValueError(f"new_bits must be one of {NEW_BITS}, got '{new_bits}'")
    check_task(org, landscape, complexity)

    n_old = org.n
    grown = org.with_unit(event.n_add)
    seed = int(rng.integers(0, 2**63, dtype=np.int64))
    if complexity is TaskComplexity.DECOMPOSABLE:
        piece = generate(LandscapeSpec.block_diagonal([tuple(range(event.n_add))], seed=seed))
        sets = landscape.interaction_sets + tuple(tuple(j + n_old for j in s) for s in piece.interaction_sets)
        new_landscape = Landscape(interaction_sets=sets, tables=landscape.tables + piece.tables)
    else:
        new_landscape = generate(task_landscape_spec(grown, complexity, seed))

    if new_bits == "random":
        added = tuple(int(b) for b in rng.integers(0, 2, size=event.n_add))
    else:
        added = (0,) * event.n_add
    return Growth(grown, new_landscape, tuple(config) + added)


@dataclass(frozen=True)
class GrowthRecord:
    period: int
    mode: CoordinationMode
    weights: tuple[float, float, float]
    value: float
    n: int
    units: int
    config: Configuration
    objectives: tuple[float, ...] = field(default=())


def run_growth_study(
    org: OrgDesign,
    landscape: Landscape,
    complexity: TaskComplexity | str,
    strategy: SearchStrategy,
    learning: LearningParams,
    schedule: GrowthSchedule,
    horizon: int,
    rng: np.random.Generator,
    propensities: Propensities | None = None,
    start: Configuration | None = None,
) -> list[GrowthRecord]:
    """Period 0 plus ``horizon`` periods of search, reviews and growth.

    ``mode`` in a record is the mode that was active during that period; a
    review at the end of period t switches the mode from period t+1 on.
    Propensities are carried through growth events unchanged.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    if schedule.periods and schedule.periods[-1] > horizon:
        raise ValueError(f"Growth at period {schedule.periods[-1]} lies beyond the horizon {horizon}")
    if not org.headquarters:
        raise ValueError("Mode learning needs a headquarters, since hierarchical is one of the options")
    complexity = TaskComplexity(complexity)
    check_task(org, landscape, complexity)

    search_rng, learning_rng, growth_rng = rng.spawn(3)
    props = propensities or Propensities()
    mode = props.select(learning_rng)
    config = tuple(start) if start is not None else random_configuration(org.n, search_rng)
    value = landscape.fitness(config)
    window_start = value
    growth_at = {e.period: e for e in schedule.events}

    def record(t, active):
        return GrowthRecord(t, active, props.weights, value, org.n, org.units, config,
                            objectives(org, landscape, config))

    records = [record(0, mode)]
    for t in range(1, horizon + 1):
        active = mode
        config = org_step(org, active, landscape, strategy, config, search_rng).config
        value = landscape.fitness(config)
        if t % learning.interval == 0:
            props, mode = review_mode(props, learning, active, window_start, value, learning_rng)
            window_start = value
        if t in growth_at:
            grown = grow(org, landscape, config, complexity, growth_at[t], growth_rng, schedule.new_bits)
            org, landscape, config = grown.org, grown.landscape, grown.config
            value = landscape.fitness(config)
            window_start = value
        records.append(record(t, active))
    return records


def mode_frequencies(terminal_modes: list[CoordinationMode | str]) -> dict[CoordinationMode, float]:
    """Share of runs ending in each mode."""
    if not terminal_modes:
        raise ValueError("No terminal modes to count")
    modes = [CoordinationMode(m) for m in terminal_modes]
    return {m: modes.count(m) / len(modes) for m in MODES}
