"""
Cellular automata with synchronous updating.

Each cell holds an integer state. A rule maps the whole time-t grid to the
time-t+1 grid at once: neighbour aggregates are computed from shifted copies
of the old state array and the vectorised update writes a fresh array, so no
cell ever sees a neighbour's new state.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd

TOPOLOGIES = ("line", "ring", "rect", "torus")
NEIGHBORHOODS = ("left-right", "von-neumann", "moore")
WRAPPING = ("ring", "torus")

Update = Callable[[np.ndarray, np.ndarray, "np.ndarray | None"], np.ndarray]


@dataclass(frozen=True, eq=False)
class Grid:
    """Cell states on a line, ring, rectangle or torus.

    ``boundary`` is ``"fixed"`` (cells outside the grid read ``boundary_value``)
    or ``"wrap"``; rings and tori always wrap.
    """

    topology: str
    states: np.ndarray
    alphabet: tuple[int, ...] = (0, 1)
    boundary: str = "fixed"
    boundary_value: int = 0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"Unknown topology '{self.topology}', expected one of {TOPOLOGIES}")
        states = np.array(self.states, dtype=np.int64)
        ndim = 1 if self.topology in ("line", "ring") else 2
        if states.ndim != ndim or 0 in states.shape:
            raise ValueError(f"A {self.topology} grid needs a non-empty {ndim}-D state array, got shape {states.shape}")
        alphabet = tuple(int(s) for s in self.alphabet)
        if not np.isin(states, alphabet).all():
            raise ValueError(f"Grid holds states outside the alphabet {alphabet}")
        boundary = "wrap" if self.topology in WRAPPING else self.boundary
        if boundary not in ("fixed", "wrap"):
            raise ValueError(f"Boundary must be 'fixed' or 'wrap', got '{self.boundary}'")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "boundary", boundary)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.states.shape

    def with_states(self, states: np.ndarray) -> "Grid":
        return Grid(self.topology, states, self.alphabet, self.boundary, self.boundary_value)

    def counts(self) -> dict[int, int]:
        return {s: int(np.count_nonzero(self.states == s)) for s in self.alphabet}

    def to_csv(self) -> str:
        """Dense integer CSV, one line per grid row."""
        rows = self.states.reshape(1, -1) if self.states.ndim == 1 else self.states
        buffer = io.StringIO()
        pd.DataFrame(rows).to_csv(buffer, header=False, index=False, lineterminator="\n")
        return buffer.getvalue()


@dataclass(frozen=True, eq=False)
class Rule:
    """A synchronous update rule.

    ``update(own, aggregate, draws)`` receives whole arrays: the old states,
    the neighbour aggregate (a sum for two-state alphabets, otherwise a
    per-state count array with the state axis last) and, for stochastic
    rules, one Uniform[0, 1) draw per cell.
    """

    update: Update
    alphabet: tuple[int, ...] = (0, 1)
    neighborhood: str = "left-right"
    radius: int = 1
    stochastic: bool = False
    name: str = "custom"
    early_adopters: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        if self.neighborhood not in NEIGHBORHOODS:
            raise ValueError(f"Unknown neighborhood '{self.neighborhood}', expected one of {NEIGHBORHOODS}")
        if self.radius < 1:
            raise ValueError(f"Neighborhood radius must be positive, got {self.radius}")
        object.__setattr__(self, "alphabet", tuple(int(s) for s in self.alphabet))

    def offsets(self, ndim: int) -> list[tuple[int, ...]]:
        r = self.radius
        # on a line every neighbourhood reduces to left-right
        if ndim == 1:
            return [(d,) for d in range(-r, r + 1) if d != 0]
        if self.neighborhood == "left-right":
            raise ValueError("The left-right neighborhood only applies to 1-D grids")
        span = range(-r, r + 1)
        if self.neighborhood == "von-neumann":
            return [(dy, dx) for dy in span for dx in span if (dy, dx) != (0, 0) and abs(dy) + abs(dx) <= r]
        return [(dy, dx) for dy in span for dx in span if (dy, dx) != (0, 0)]

    def neighborhood_size(self, ndim: int) -> int:
        return len(self.offsets(ndim))

    def seed_grid(self, topology: str, shape: Sequence[int], boundary: str = "fixed") -> Grid:
        """An all-zero grid with this rule's early adopters set to 1."""
        states = np.zeros(tuple(shape), dtype=np.int64)
        for cell in self.early_adopters:
            if len(cell) != states.ndim or any(not 0 <= c < n for c, n in zip(cell, states.shape)):
                raise ValueError(f"Early adopter {tuple(cell)} lies outside a grid of shape {states.shape}")
            states[tuple(cell)] = 1
        return Grid(topology, states, self.alphabet, boundary)


def random_grid(topology: str, shape: Sequence[int], density: float, rng: np.random.Generator,
                boundary: str = "fixed") -> Grid:
    """A two-state grid where each cell is 1 with probability ``density``."""
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"Density must lie in [0, 1], got {density}")
    states = (rng.random(tuple(shape)) < density).astype(np.int64)
    return Grid(topology, states, (0, 1), boundary)


def _shifted(grid: Grid, offset: tuple[int, ...], radius: int) -> np.ndarray:
    """Neighbour states at ``offset`` for every cell."""
    states = grid.states
    if grid.boundary == "wrap":
        padded = np.pad(states, radius, mode="wrap")
    else:
        padded = np.pad(states, radius, mode="constant", constant_values=grid.boundary_value)
    window = tuple(slice(radius + d, radius + d + size) for d, size in zip(offset, states.shape))
    return padded[window]


def neighbor_aggregate(grid: Grid, rule: Rule) -> np.ndarray:
    neighbours = [_shifted(grid, offset, rule.radius) for offset in rule.offsets(grid.states.ndim)]
    stacked = np.stack(neighbours, axis=-1)
    if rule.alphabet == (0, 1):
        return stacked.sum(axis=-1)
    return np.stack([(stacked == s).sum(axis=-1) for s in rule.alphabet], axis=-1)


def step(grid: Grid, rule: Rule, rng: np.random.Generator | None = None) -> Grid:
    """One synchronous update of every cell."""
    if grid.alphabet != rule.alphabet:
        raise ValueError(f"Rule alphabet {rule.alphabet} does not match grid alphabet {grid.alphabet}")
    draws = None
    if rule.stochastic:
        if rng is None:
            raise ValueError(f"Stochastic rule '{rule.name}' needs a random stream")
        draws = rng.random(grid.shape)
    aggregate = neighbor_aggregate(grid, rule)
    new_states = np.asarray(rule.update(grid.states, aggregate, draws), dtype=np.int64)
    if new_states.shape != grid.shape:
        raise ValueError(f"Rule '{rule.name}' returned shape {new_states.shape} for a grid of shape {grid.shape}")
    if not np.isin(new_states, rule.alphabet).all():
        raise ValueError(f"Rule '{rule.name}' produced states outside the alphabet {rule.alphabet}")
    return grid.with_states(new_states)


@dataclass
class Trajectory:
    grids: list[Grid]

    @property
    def summaries(self) -> list[dict[int, int]]:
        return [g.counts() for g in self.grids]

    def counts(self) -> pd.DataFrame:
        """Long table of (step, state, count)."""
        rows = [
            {"step": t, "state": state, "count": count}
            for t, summary in enumerate(self.summaries)
            for state, count in summary.items()
        ]
        return pd.DataFrame(rows, columns=["step", "state", "count"])

    def grid_csv(self, step: int) -> str:
        return self.grids[step].to_csv()


def run(grid: Grid, rule: Rule, steps: int, rng: np.random.Generator | None = None) -> Trajectory:
    """``steps`` synchronous updates; the trajectory starts with the input grid."""
    if steps < 0:
        raise ValueError(f"Steps must be non-negative, got {steps}")
    grids = [grid]
    for _ in range(steps):
        grids.append(step(grids[-1], rule, rng))
    return Trajectory(grids)


def time_to_full_adoption(trajectory: Trajectory, state: int = 1) -> int | None:
    """First step at which every cell holds ``state``, or None."""
    for t, g in enumerate(trajectory.grids):
        if np.all(g.states == state):
            return t
    return None


def pair_sum_rule() -> Rule:
    """Two-state rule: a cell becomes 1 iff its left and right neighbours sum to two."""

    def update(own, aggregate, draws):
        return np.where(aggregate == 2, 1, 0)

    return Rule(update=update, neighborhood="left-right", radius=1, name="pair-sum")


def diffusion_preset(
    variant: str,
    early_adopters: Sequence[Sequence[int]] = (),
    threshold: int = 1,
    probability: float = 1.0,
    neighborhood: str = "von-neumann",
    radius: int = 1,
) -> Rule:
    """Innovation diffusion: adopters stay adopters, a non-adopter with at least
    ``threshold`` adopting neighbours adopts (always, or with ``probability``).
    """
    if variant not in ("deterministic", "stochastic"):
        raise ValueError(f"Diffusion variant must be 'deterministic' or 'stochastic', got '{variant}'")
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"Adoption probability must lie in [0, 1], got {probability}")
    if threshold < 1:
        raise ValueError(f"Adoption threshold must be at least 1, got {threshold}")
    stochastic = variant == "stochastic"

    def update(own, aggregate, draws):
        exposed = (own == 0) & (aggregate >= threshold)
        if stochastic:
            exposed &= draws < probability
        return np.where(exposed, 1, own)

    return Rule(
        update=update,
        neighborhood=neighborhood,
        radius=radius,
        stochastic=stochastic,
        name=f"diffusion-{variant}",
        early_adopters=tuple(tuple(int(c) for c in cell) for cell in early_adopters),
    )
