"""
Multi-unit firms searching one shared NK landscape.

Every unit owns a contiguous block of decisions and searches only those
bits. The coordination mode decides how the units' choices become the
firm's configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Sequence

import numpy as np

from src.landscape import Configuration, Landscape, LandscapeSpec, contiguous_blocks, random_configuration
from src.search import Evaluator, SearchStrategy, search_step


class CoordinationMode(str, Enum):
    DECENTRALIZED = "decentralized"
    SEQUENTIAL = "sequential-lateral"
    HIERARCHICAL = "hierarchical"


MODES = tuple(CoordinationMode)


class TaskComplexity(str, Enum):
    DECOMPOSABLE = "decomposable"
    NON_DECOMPOSABLE = "non-decomposable"


@dataclass(frozen=True)
class OrgDesign:
    """Units, their decision blocks and the incentive/communication setup.

    ``incentive_weight`` is the weight on the unit's own block; the rest goes
    to the other blocks. ``communication_error`` is the probability that a
    bit flips while a unit's intent travels to a fellow unit or headquarters.
    ``hq_sigma`` of None makes headquarters judge as noisily as the units.
    """

    blocks: tuple[tuple[int, ...], ...]
    headquarters: bool = True
    incentive_weight: float = 1.0
    communication_error: float = 0.0
    hq_sigma: float | None = None
    hq_implements_all: bool = False

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        if not blocks or any(len(b) == 0 for b in blocks):
            raise ValueError("Every unit must own at least one attribute")
        flat = [i for b in blocks for i in b]
        if flat != list(range(len(flat))):
            raise ValueError(f"Unit blocks {blocks} must be contiguous and partition 0..{len(flat) - 1} in order")
        if not 0.0 <= self.incentive_weight <= 1.0:
            raise ValueError(f"incentive_weight must lie in [0, 1], got {self.incentive_weight}")
        if not 0.0 <= self.communication_error <= 1.0:
            raise ValueError(f"communication_error must lie in [0, 1], got {self.communication_error}")
        if self.hq_sigma is not None and self.hq_sigma < 0.0:
            raise ValueError(f"hq_sigma must be non-negative, got {self.hq_sigma}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], **kwargs) -> "OrgDesign":
        return cls(blocks=contiguous_blocks(sizes), **kwargs)

    @property
    def n(self) -> int:
        return self.blocks[-1][-1] + 1

    @property
    def units(self) -> int:
        return len(self.blocks)

    def with_unit(self, size: int) -> "OrgDesign":
        """The same firm with one more unit owning ``size`` new attributes."""
        new_block = tuple(range(self.n, self.n + size))
        return OrgDesign(
            blocks=self.blocks + (new_block,),
            headquarters=self.headquarters,
            incentive_weight=self.incentive_weight,
            communication_error=self.communication_error,
            hq_sigma=self.hq_sigma,
            hq_implements_all=self.hq_implements_all,
        )


def task_landscape_spec(org: OrgDesign, complexity: TaskComplexity | str, seed: int) -> LandscapeSpec:
    """Decomposable tasks interact only inside unit blocks; non-decomposable ones everywhere."""
    if TaskComplexity(complexity) is TaskComplexity.DECOMPOSABLE:
        return LandscapeSpec.block_diagonal(org.blocks, seed=seed)
    return LandscapeSpec(n_attributes=org.n, k_interactions=org.n - 1, pattern="random", seed=seed)


def check_task(org: OrgDesign, landscape: Landscape, complexity: TaskComplexity | str) -> None:
    if landscape.n != org.n:
        raise ValueError(f"Landscape has N={landscape.n} but the firm's units own {org.n} attributes")
    if TaskComplexity(complexity) is TaskComplexity.DECOMPOSABLE:
        for block in org.blocks:
            for i in block:
                if set(landscape.interaction_sets[i]) != set(block) - {i}:
                    raise ValueError(f"Attribute {i} interacts outside its unit block {block}: not decomposable")
    elif any(len(s) != org.n - 1 for s in landscape.interaction_sets):
        raise ValueError("A non-decomposable task requires K = N-1 for every attribute")


def _mean(values: Sequence[float], indices: Sequence[int]) -> float:
    total = 0.0
    for i in indices:
        total += values[i]
    return total / len(indices)


def unit_objective(org: OrgDesign, unit: int, landscape: Landscape, config: Configuration) -> float:
    """w * own-block mean + (1 - w) * mean over all other blocks.

    A firm with a single unit has no residual blocks; its unit objective is
    the own-block mean, which equals V.
    """
    contributions = landscape.contributions(config)
    own = _mean(contributions, org.blocks[unit])
    others = [i for u, block in enumerate(org.blocks) if u != unit for i in block]
    if not others:
        return own
    w = org.incentive_weight
    return w * own + (1.0 - w) * _mean(contributions, others)


@dataclass(frozen=True)
class UnitDecision:
    unit: int
    proposal: tuple[int, ...]
    moved: bool
    perceived: float


@dataclass(frozen=True)
class OrgStep:
    config: Configuration
    decisions: list[UnitDecision]
    implemented: tuple[int, ...] = field(default=())


def _transmit(bits: tuple[int, ...], error: float, rng: np.random.Generator) -> tuple[int, ...]:
    if error <= 0.0:
        return bits
    flips = rng.random(len(bits)) < error
    return tuple(int(b) ^ int(f) for b, f in zip(bits, flips))


def _with_block(config: Configuration, block: Sequence[int], bits: Sequence[int]) -> Configuration:
    new = list(config)
    for i, b in zip(block, bits):
        new[i] = b
    return tuple(new)


def _unit_choice(org, unit, landscape, strategy, working, rng) -> UnitDecision:
    block = org.blocks[unit]
    evaluator = Evaluator(partial(unit_objective, org, unit, landscape), strategy.sigma_eval, rng)
    choice, perceived = search_step(strategy, working, evaluator, rng, free_bits=block)
    proposal = tuple(choice[i] for i in block)
    return UnitDecision(unit, proposal, choice != working, perceived)


def _decentralized(org, landscape, strategy, config, rng) -> OrgStep:
    decisions = [_unit_choice(org, u, landscape, strategy, config, rng) for u in range(org.units)]
    new = config
    for d in decisions:
        new = _with_block(new, org.blocks[d.unit], d.proposal)
    return OrgStep(new, decisions, tuple(d.unit for d in decisions if d.moved))


def _sequential(org, landscape, strategy, config, rng) -> OrgStep:
    actual, announced = config, config
    decisions = []
    for u, block in enumerate(org.blocks):
        decision = _unit_choice(org, u, landscape, strategy, announced, rng)
        decisions.append(decision)
        actual = _with_block(actual, block, decision.proposal)
        if decision.moved:
            announced = _with_block(announced, block, _transmit(decision.proposal, org.communication_error, rng))
    return OrgStep(actual, decisions, tuple(d.unit for d in decisions if d.moved))


def _hierarchical(org, landscape, strategy, config, rng) -> OrgStep:
    decisions = [_unit_choice(org, u, landscape, strategy, config, rng) for u in range(org.units)]
    received = []
    for d in decisions:
        if not d.moved:
            continue
        bits = _transmit(d.proposal, org.communication_error, rng)
        candidate = _with_block(config, org.blocks[d.unit], bits)
        if candidate != config:
            received.append((d.unit, bits, candidate))
    if not received:
        return OrgStep(config, decisions)

    sigma = strategy.sigma_eval if org.hq_sigma is None else org.hq_sigma
    judge = Evaluator(landscape.fitness, sigma, rng)
    status_quo = judge(config)
    scored = [(unit, bits, judge(candidate)) for unit, bits, candidate in received]

    if org.hq_implements_all:
        approved = [s for s in scored if s[2] > status_quo]
    else:
        best = max(scored, key=lambda s: s[2])
        approved = [best] if best[2] > status_quo else []
    new = config
    for unit, bits, _ in approved:
        new = _with_block(new, org.blocks[unit], bits)
    return OrgStep(new, decisions, tuple(unit for unit, _, _ in approved))


def org_step(org: OrgDesign, mode: CoordinationMode | str, landscape: Landscape, strategy: SearchStrategy,
             config: Configuration, rng: np.random.Generator) -> OrgStep:
    """One short-term search period of the whole firm."""
    mode = CoordinationMode(mode)
    if mode is CoordinationMode.HIERARCHICAL and not org.headquarters:
        raise ValueError("Hierarchical coordination requires a headquarters")
    if len(config) != org.n:
        raise ValueError(f"Configuration has {len(config)} bits, the firm owns {org.n}")
    if org.units == 1:
        # one unit has nobody to coordinate with
        return _decentralized(org, landscape, strategy, tuple(config), rng)
    if mode is CoordinationMode.DECENTRALIZED:
        return _decentralized(org, landscape, strategy, tuple(config), rng)
    if mode is CoordinationMode.SEQUENTIAL:
        return _sequential(org, landscape, strategy, tuple(config), rng)
    return _hierarchical(org, landscape, strategy, tuple(config), rng)


@dataclass(frozen=True)
class OrgRecord:
    period: int
    mode: CoordinationMode
    value: float
    config: Configuration
    objectives: tuple[float, ...]


def objectives(org: OrgDesign, landscape: Landscape, config: Configuration) -> tuple[float, ...]:
    return tuple(unit_objective(org, u, landscape, config) for u in range(org.units))


def run_org(org: OrgDesign, mode: CoordinationMode | str, landscape: Landscape, strategy: SearchStrategy,
            periods: int, rng: np.random.Generator, start: Configuration | None = None) -> list[OrgRecord]:
    """Period 0 (the start) followed by ``periods`` org steps."""
    if periods < 1:
        raise ValueError(f"periods must be at least 1, got {periods}")
    mode = CoordinationMode(mode)
    config = tuple(start) if start is not None else random_configuration(org.n, rng)

    def record(t):
        return OrgRecord(t, mode, landscape.fitness(config), config, objectives(org, landscape, config))

    records = [record(0)]
    for t in range(1, periods + 1):
        config = org_step(org, mode, landscape, strategy, config, rng).config
        records.append(record(t))
    return records
