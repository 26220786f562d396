"""
Agentized hidden-action contracting.

A principal offers a linear contract w(x) = f + p * x, an agent chooses a
hidden effort a, and the outcome is x = a + theta with theta ~ N(mu, sigma^2).
The agent has CARA utility with risk aversion eta and effort cost a^2 / 2, so
its certainty equivalent is

    CE = f + p * (a + mu) - eta / 2 * p^2 * sigma^2 - a^2 / 2

In the gifted benchmark both parties know everything and the optimal premium
has the closed form p* = 1 / (1 + eta * sigma^2). In :func:`simulate` both
parties see only part of their decision grid, learn the environment from a
finite memory and widen what they see one cell per period.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

# absorbs rounding in grid arithmetic when comparing premiums
GRID_SLACK = 1e-12

SERIES_COLUMNS = [
    "t", "p", "f", "a", "theta", "x", "wage", "principal_net", "expected_net", "agent_ce", "accepted",
    "visible_p_count", "visible_a_count", "regime_id", "mu_estimate_principal", "mu_estimate_agent",
    "avg_principal_net", "above_optimum", "at_optimum", "efficiency_loss",
]


@dataclass(frozen=True)
class PartyTraits:
    """Visibility v (share of the own grid known at the start), memory m
    (None keeps every observation) and exploration probability q."""

    visibility: float = 0.05
    memory: int | None = 20
    exploration: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in (0, 1], got {self.visibility}")
        if self.memory is not None and self.memory < 1:
            raise ValueError(f"memory must be at least 1 or None, got {self.memory}")
        if not 0.0 <= self.exploration <= 1.0:
            raise ValueError(f"exploration must lie in [0, 1], got {self.exploration}")


@dataclass(frozen=True)
class Turbulence:
    """Every ``every`` periods mu is redrawn from N(mu_0, mu_shift_sd^2) and
    the variance becomes sigma_0^2 * exp(s * z - s^2 / 2), z ~ N(0, 1), with
    s = ``variance_dispersion``; the variance keeps its mean sigma_0^2.

    A shift is news to both parties, its new parameters are not: each drops
    the observations of the old regime and, under pressure to innovate,
    reveals a ``pressure`` share of the grid cells it does not know yet.
    """

    every: int = 10
    mu_shift_sd: float = 0.5
    variance_dispersion: float = 1.0
    pressure: float = 0.5

    def __post_init__(self):
        if self.every < 1:
            raise ValueError(f"Turbulence interval must be at least 1, got {self.every}")
        if self.mu_shift_sd < 0.0:
            raise ValueError(f"mu_shift_sd must be non-negative, got {self.mu_shift_sd}")
        if self.variance_dispersion < 0.0:
            raise ValueError(f"variance_dispersion must be non-negative, got {self.variance_dispersion}")
        if not 0.0 <= self.pressure <= 1.0:
            raise ValueError(f"pressure must lie in [0, 1], got {self.pressure}")

    def shifts_at(self, t: int) -> bool:
        return t > 1 and (t - 1) % self.every == 0

    def draw(self, mu_0: float, sigma_0: float, rng: np.random.Generator) -> tuple[float, float]:
        """(mu, sigma) of the next regime."""
        mu = float(rng.normal(mu_0, self.mu_shift_sd))
        s = self.variance_dispersion
        sigma = sigma_0 * math.exp((s * float(rng.standard_normal()) - s**2 / 2.0) / 2.0)
        return mu, sigma


@dataclass(frozen=True)
class ModelParams:
    effort_levels: int = 101
    effort_max: float = 1.0
    premium_levels: int = 101
    mu_theta: float = 1.0
    sigma_theta: float = 1.0
    eta: float = 1.0
    reservation: float = 0.0
    turbulence: Turbulence | None = None
    principal: PartyTraits = field(default_factory=PartyTraits)
    agent: PartyTraits = field(default_factory=PartyTraits)
    warmup: int = 5
    markup_step: float = 0.05
    acceptance_tolerance: float = 1e-9

    def __post_init__(self):
        if self.effort_levels < 2 or self.premium_levels < 2:
            raise ValueError(
                f"Effort and premium grids need at least 2 levels, got M={self.effort_levels}, P={self.premium_levels}"
            )
        if self.effort_max <= 0.0:
            raise ValueError(f"effort_max must be positive, got {self.effort_max}")
        if self.sigma_theta < 0.0:
            raise ValueError(f"sigma_theta must be non-negative, got {self.sigma_theta}")
        if self.eta < 0.0:
            raise ValueError(f"Risk aversion eta must be non-negative, got {self.eta}")
        if self.warmup < 1:
            raise ValueError(f"Each party needs at least one warm-up observation, got {self.warmup}")
        if self.markup_step < 0.0 or self.acceptance_tolerance < 0.0:
            raise ValueError("markup_step and acceptance_tolerance must be non-negative")

    @property
    def efforts(self) -> np.ndarray:
        return np.linspace(0.0, self.effort_max, self.effort_levels)

    @property
    def premiums(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.premium_levels)

    @property
    def premium_cell(self) -> float:
        return 1.0 / (self.premium_levels - 1)


@dataclass(frozen=True)
class Contract:
    fixed: float
    premium: float

    def wage(self, outcome: float) -> float:
        return self.fixed + self.premium * outcome


def best_response(premium: float | np.ndarray, efforts: np.ndarray) -> np.ndarray:
    """Index of the effort maximising p * a - a^2 / 2; the smallest on ties."""
    p = np.atleast_1d(np.asarray(premium, dtype=np.float64))
    utility = p[:, None] * efforts[None, :] - efforts[None, :] ** 2 / 2.0
    return np.argmax(utility, axis=1)


def participation_fixed(premium, effort, mu: float, variance: float, eta: float, reservation: float):
    """The fixed payment that leaves the agent exactly at its reservation CE."""
    return reservation - premium * (effort + mu) + 0.5 * eta * premium**2 * variance + effort**2 / 2.0


def expected_net(premium, effort, fixed, mu: float):
    """E[x] - E[w(x)] for the principal."""
    return (effort + mu) * (1.0 - premium) - fixed


def certainty_equivalent(fixed, premium, effort, mu: float, variance: float, eta: float):
    return fixed + premium * (effort + mu) - 0.5 * eta * premium**2 * variance - effort**2 / 2.0


@dataclass(frozen=True)
class OracleResult:
    contract: Contract
    effort: float
    expected_outcome: float
    expected_net: float
    premium_index: int
    closed_form_premium: float
    closed_form_effort: float


def _scan(params: ModelParams, premiums: np.ndarray, mu: float, variance: float):
    efforts = params.efforts[best_response(premiums, params.efforts)]
    fixed = participation_fixed(premiums, efforts, mu, variance, params.eta, params.reservation)
    return efforts, fixed, expected_net(premiums, efforts, fixed, mu)


def second_best_oracle(params: ModelParams) -> OracleResult:
    """Exhaustive (p, a(p)) grid scan with binding participation.

    Ties go to the smallest premium.
    """
    premiums = params.premiums
    variance = params.sigma_theta**2
    efforts, fixed, net = _scan(params, premiums, params.mu_theta, variance)
    k = int(np.argmax(net))
    p_star = 1.0 / (1.0 + params.eta * variance)
    return OracleResult(
        contract=Contract(float(fixed[k]), float(premiums[k])),
        effort=float(efforts[k]),
        expected_outcome=float(efforts[k] + params.mu_theta),
        expected_net=float(net[k]),
        premium_index=k,
        closed_form_premium=p_star,
        closed_form_effort=min(p_star, params.effort_max),
    )


class Memory:
    """Running mean/variance of the last ``capacity`` observations.

    ``capacity=None`` keeps every observation via Welford's update.
    """

    def __init__(self, capacity: int | None):
        self.capacity = capacity
        self.window: deque[float] = deque(maxlen=capacity) if capacity is not None else deque()
        self.count = 0
        self._mean = 0.0
        self._m2 = 0.0
        self._prior: tuple[float, float] | None = None

    def restart(self) -> None:
        """Forgets every observation; the last estimate stands in until two new ones arrive."""
        self._prior = self.estimate()
        self.window.clear()
        self.count = 0
        self._mean = 0.0
        self._m2 = 0.0

    def push(self, value: float) -> None:
        if self.capacity is not None:
            self.window.append(float(value))
            return
        self.count += 1
        delta = value - self._mean
        self._mean += delta / self.count
        self._m2 += delta * (value - self._mean)

    def __len__(self) -> int:
        return len(self.window) if self.capacity is not None else self.count

    def estimate(self) -> tuple[float, float]:
        """(mean, sample variance); variance 0 below two observations."""
        if self._prior is not None and len(self) < 2:
            return self._prior
        if self.capacity is not None:
            values = np.fromiter(self.window, dtype=np.float64)
            if values.size == 0:
                return 0.0, 0.0
            variance = float(values.var(ddof=1)) if values.size > 1 else 0.0
            return float(values.mean()), variance
        variance = self._m2 / (self.count - 1) if self.count > 1 else 0.0
        return self._mean, variance


class PartyState:
    """What one party sees of its own grid and remembers of the environment."""

    def __init__(self, grid_size: int, traits: PartyTraits, rng: np.random.Generator):
        self.traits = traits
        self.rng = rng
        self.visible = np.zeros(grid_size, dtype=bool)
        size = max(1, int(round(traits.visibility * grid_size)))
        start = int(rng.integers(0, grid_size - size + 1))
        self.visible[start:start + size] = True
        self.memory = Memory(traits.memory)

    @property
    def visible_count(self) -> int:
        return int(self.visible.sum())

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.visible)

    def expand(self) -> None:
        """Reveals one unknown cell: a neighbour of a known cell with
        probability 1 - q, any other unknown cell with probability q."""
        unknown = ~self.visible
        if not unknown.any():
            return
        touching = np.zeros_like(self.visible)
        touching[1:] |= self.visible[:-1]
        touching[:-1] |= self.visible[1:]
        adjacent = np.flatnonzero(unknown & touching)
        distant = np.flatnonzero(unknown & ~touching)
        explore = self.rng.random() < self.traits.exploration
        pool = distant if (explore and distant.size) or not adjacent.size else adjacent
        self.visible[pool[int(self.rng.integers(pool.size))]] = True

    def burst(self, share: float) -> None:
        """Reveals ``share`` of the unknown cells, drawn uniformly."""
        unknown = np.flatnonzero(~self.visible)
        k = int(round(share * unknown.size))
        if k:
            self.visible[self.rng.choice(unknown, size=k, replace=False)] = True


def simulate(params: ModelParams, horizon: int, rng: np.random.Generator) -> pd.DataFrame:
    """One agentized run of ``horizon`` periods; one row per period.

    Rejected offers produce nothing: the principal nets zero, no one learns
    about the environment and the principal raises its next fixed payment by
    ``markup_step``. Theta is drawn every period so that acceptance never
    shifts later environment draws. Turbulence draws come from their own
    stream, so the first regime plays out exactly as in a stable run.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    principal_rng, agent_rng, env_rng, turbulence_rng = rng.spawn(4)
    premiums, efforts = params.premiums, params.efforts
    oracle = second_best_oracle(params)
    believed_effort = efforts[best_response(premiums, efforts)]

    principal = PartyState(params.premium_levels, params.principal, principal_rng)
    agent = PartyState(params.effort_levels, params.agent, agent_rng)
    mu, sigma = params.mu_theta, params.sigma_theta
    for party in (principal, agent):
        for _ in range(params.warmup):
            party.memory.push(mu + sigma * env_rng.standard_normal())

    markup, regime, total_net = 0.0, 0, 0.0
    # net at binding participation of every premium in the regime in force
    _, _, attainable = _scan(params, premiums, mu, sigma**2)
    rows = []
    for t in range(1, horizon + 1):
        if params.turbulence is not None and params.turbulence.shifts_at(t):
            regime += 1
            mu, sigma = params.turbulence.draw(params.mu_theta, params.sigma_theta, turbulence_rng)
            _, _, attainable = _scan(params, premiums, mu, sigma**2)
            for party in (principal, agent):
                party.memory.restart()
                party.burst(params.turbulence.pressure)

        principal.expand()
        mu_p, var_p = principal.memory.estimate()
        offered = principal.indices()
        a_hat = believed_effort[offered]
        fixed = participation_fixed(premiums[offered], a_hat, mu_p, var_p, params.eta, params.reservation)
        k = int(np.argmax(expected_net(premiums[offered], a_hat, fixed, mu_p)))
        p, a_belief = float(premiums[offered[k]]), float(a_hat[k])
        f = float(fixed[k]) + markup

        agent.expand()
        mu_a, var_a = agent.memory.estimate()
        known = efforts[agent.indices()]
        ce = certainty_equivalent(f, p, known, mu_a, var_a, params.eta)
        j = int(np.argmax(ce))
        agent_ce = float(ce[j])
        accepted = agent_ce >= params.reservation - params.acceptance_tolerance

        theta = mu + sigma * float(env_rng.standard_normal())
        if accepted:
            a = float(known[j])
            x = a + theta
            wage = f + p * x
            net = x - wage
            exp_net = float(expected_net(p, a, f, mu))
            agent.memory.push(x - a)
            principal.memory.push(x - a_belief)
        else:
            a = x = wage = math.nan
            net = exp_net = 0.0
            markup += params.markup_step

        total_net += net
        gap = p - oracle.contract.premium
        rows.append({
            "t": t, "p": p, "f": f, "a": a, "theta": theta, "x": x, "wage": wage,
            "principal_net": net, "expected_net": exp_net, "agent_ce": agent_ce, "accepted": accepted,
            "visible_p_count": principal.visible_count, "visible_a_count": agent.visible_count,
            "regime_id": regime, "mu_estimate_principal": mu_p, "mu_estimate_agent": mu_a,
            "avg_principal_net": total_net / t,
            "above_optimum": gap > params.premium_cell + GRID_SLACK,
            "at_optimum": abs(gap) <= params.premium_cell + GRID_SLACK,
            "efficiency_loss": float(attainable.max() - attainable[offered[k]]),
        })
    return pd.DataFrame(rows, columns=SERIES_COLUMNS)


@dataclass(frozen=True)
class HiddenActionRun:
    params: ModelParams
    series: pd.DataFrame


@dataclass(frozen=True)
class ContractShares:
    below: float
    at: float
    above: float
    runs: int
    turbulent: bool


def classify_emergent_contracts(runs: Sequence[HiddenActionRun], tolerance: float | None = None) -> ContractShares:
    """Buckets the final premium of every run against the oracle premium.

    A run is "at" the optimum when |p_final - p*| <= tolerance (default one
    premium grid cell).
    """
    if not runs:
        raise ValueError("Cannot classify an empty set of runs")
    params = runs[0].params
    if any(run.params != params for run in runs[1:]):
        raise ValueError("All runs must share the same model parameters")
    tau = params.premium_cell if tolerance is None else tolerance
    if tau < 0.0:
        raise ValueError(f"Tolerance must be non-negative, got {tau}")
    p_star = second_best_oracle(params).contract.premium
    finals = np.array([run.series["p"].iloc[-1] for run in runs])
    at = np.abs(finals - p_star) <= tau + GRID_SLACK
    above = ~at & (finals > p_star)
    below = ~at & (finals < p_star)
    n = len(runs)
    return ContractShares(
        below=float(below.sum()) / n,
        at=float(at.sum()) / n,
        above=float(above.sum()) / n,
        runs=n,
        turbulent=params.turbulence is not None,
    )


def early_improvement_share(series: Sequence[pd.DataFrame], fraction: float = 0.2) -> float:
    """Share of the total improvement that is already realised after the
    first ``fraction`` of periods.

    Performance is the mean ``efficiency_loss`` curve across runs: the net
    outcome the offered premium gives up against the best contract of the
    environment in force. Fixed payments, markups and rejections are left
    out, so only the incentive rate the principal has found counts. NaN when
    the loss does not shrink overall.
    """
    if not series:
        raise ValueError("Need at least one run")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    curve = np.mean(np.stack([s["efficiency_loss"].to_numpy(dtype=np.float64) for s in series]), axis=0)
    total = curve[0] - curve[-1]
    if total <= 0.0:
        return math.nan
    cut = max(1, math.ceil(fraction * curve.size)) - 1
    return float((curve[0] - curve[cut]) / total)
