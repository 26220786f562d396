"""
Experiment configuration parser.

One YAML file describes one experiment: the study type, replication and
seeding settings, emission flags and one parameter block per engine module.
Blocks are frozen dataclasses; unknown keys and invalid values raise
:class:`ConfigError` naming the dotted field path and its YAML line.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from src.adaptation import GrowthSchedule, LearningParams, Propensities
from src.automaton import Grid, Rule, diffusion_preset, pair_sum_rule
from src.hiddenaction import ModelParams, PartyTraits, Turbulence
from src.landscape import ENUMERATION_CAP, LandscapeSpec
from src.organization import CoordinationMode, OrgDesign, TaskComplexity, task_landscape_spec
from src.search import SearchStrategy
from src.utils.rng import check_seed

logger = logging.getLogger(__name__)

STUDIES = ("nk-analysis", "automaton", "org-search", "growth-study", "hidden-action")
AUTOMATON_RULES = ("diffusion", "pair-sum")


class ConfigError(ValueError):
    """An invalid experiment configuration, located by field path and line."""

    def __init__(self, message: str, field: str = "", line: int | None = None):
        self.message = message
        self.field = field
        self.line = line
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.field or "<config>"
        if self.line is not None:
            where += f" (line {self.line})"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class EmitFlags:
    series: bool = True
    summary: bool = True
    landscape: bool = True
    grids: bool = False


@dataclass(frozen=True)
class LandscapeBlock:
    n: int = 10
    k: int = 3
    pattern: str = "random"
    blocks: tuple[tuple[int, ...], ...] | None = None
    # hill-climb length in nk-analysis; None climbs until the first halt
    climb_steps: int | None = None

    def spec(self, seed: int) -> LandscapeSpec:
        return LandscapeSpec(self.n, self.k, self.pattern, self.blocks, seed)


@dataclass(frozen=True)
class OrganizationBlock:
    unit_sizes: tuple[int, ...] = (3, 3)
    headquarters: bool = True
    incentive_weight: float = 1.0
    communication_error: float = 0.0
    hq_sigma: float | None = None
    hq_implements_all: bool = False
    complexity: str = "non-decomposable"
    mode: str = "hierarchical"
    periods: int = 50

    def __post_init__(self):
        TaskComplexity(self.complexity)
        CoordinationMode(self.mode)
        if self.periods < 1:
            raise ValueError(f"periods must be at least 1, got {self.periods}")

    def design(self) -> OrgDesign:
        return OrgDesign.from_sizes(
            self.unit_sizes,
            headquarters=self.headquarters,
            incentive_weight=self.incentive_weight,
            communication_error=self.communication_error,
            hq_sigma=self.hq_sigma,
            hq_implements_all=self.hq_implements_all,
        )


@dataclass(frozen=True)
class LearningBlock:
    interval: int = 5
    gain: float = 1.0
    forgetting: float = 0.0
    floor: float = 0.01
    signed_reward: bool = False
    initial_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def params(self) -> LearningParams:
        return LearningParams(self.interval, self.gain, self.forgetting, self.floor, self.signed_reward)

    def propensities(self) -> Propensities:
        return Propensities(self.initial_weights)


@dataclass(frozen=True)
class GrowthBlock:
    periods: tuple[int, ...] = (60, 120)
    n_add: int = 3
    new_bits: str = "random"
    horizon: int = 200

    def schedule(self) -> GrowthSchedule:
        return GrowthSchedule(self.periods, self.n_add, self.new_bits)


@dataclass(frozen=True)
class AutomatonBlock:
    topology: str = "ring"
    shape: tuple[int, ...] = (11,)
    boundary: str = "fixed"
    rule: str = "diffusion"
    variant: str = "deterministic"
    threshold: int = 1
    probability: float = 1.0
    neighborhood: str = "von-neumann"
    radius: int = 1
    early_adopters: tuple[tuple[int, ...], ...] = ((0,),)
    # adopter share of a random start grid; None starts from the early adopters
    initial_density: float | None = None
    steps: int = 10

    def __post_init__(self):
        if self.rule not in AUTOMATON_RULES:
            raise ValueError(f"Unknown automaton rule '{self.rule}', expected one of {AUTOMATON_RULES}")
        if self.initial_density is not None and not 0.0 <= self.initial_density <= 1.0:
            raise ValueError(f"initial_density must lie in [0, 1], got {self.initial_density}")
        if self.steps < 0:
            raise ValueError(f"steps must be non-negative, got {self.steps}")

    def build_rule(self) -> Rule:
        if self.rule == "pair-sum":
            return pair_sum_rule()
        return diffusion_preset(
            self.variant,
            early_adopters=self.early_adopters,
            threshold=self.threshold,
            probability=self.probability,
            neighborhood=self.neighborhood,
            radius=self.radius,
        )

    def seed_grid(self) -> Grid:
        return self.build_rule().seed_grid(self.topology, self.shape, self.boundary)


@dataclass(frozen=True)
class HiddenActionBlock:
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
    horizon: int = 100

    def params(self) -> ModelParams:
        values = {f.name: getattr(self, f.name) for f in dataclasses.fields(ModelParams)}
        return ModelParams(**values)


@dataclass(frozen=True)
class ExperimentConfig:
    study: str
    replications: int = 1
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    enumeration_cap: int = ENUMERATION_CAP
    emit: EmitFlags = field(default_factory=EmitFlags)
    landscape: LandscapeBlock = field(default_factory=LandscapeBlock)
    search: SearchStrategy = field(default_factory=SearchStrategy)
    organization: OrganizationBlock = field(default_factory=OrganizationBlock)
    learning: LearningBlock = field(default_factory=LearningBlock)
    growth: GrowthBlock = field(default_factory=GrowthBlock)
    automaton: AutomatonBlock = field(default_factory=AutomatonBlock)
    hidden_action: HiddenActionBlock = field(default_factory=HiddenActionBlock)
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ValueError(f"Unknown study '{self.study}', expected one of {STUDIES}")
        if self.replications < 1:
            raise ValueError(f"replications must be at least 1, got {self.replications}")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}")
        check_seed(self.seed)

    # --- serialization ---

    def to_dict(self) -> dict:
        data = {f.name: _thaw(getattr(self, f.name)) for f in dataclasses.fields(self) if f.name != "lines"}
        return data

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form, ignoring where outputs go."""
        data = self.to_dict()
        data.pop("output_dir")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    # --- derived copies ---

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """A copy with top-level fields replaced; None values are ignored."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        data = self.to_dict()
        for key, value in changes.items():
            if key not in data:
                raise ConfigError(f"Unknown top-level field '{key}'", field=key)
            data[key] = value
        return from_dict(data, lines=self.lines)

    def with_value(self, path: str, value: Any) -> "ExperimentConfig":
        """A copy with the scalar field at dotted ``path`` set to ``value``."""
        data = self.to_dict()
        parts = path.split(".")
        node = data
        for i, part in enumerate(parts[:-1]):
            if not isinstance(node, dict) or part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"'{'.'.join(parts[:i + 1])}' is not a parameter block", field=path)
            node = node[part]
        leaf = parts[-1]
        if not isinstance(node, dict) or leaf not in node:
            raise ConfigError("Unknown parameter", field=path)
        if isinstance(node[leaf], (dict, list)):
            raise ConfigError("Sweep axis must be a scalar field", field=path)
        node[leaf] = value
        return from_dict(data, lines=self.lines)

    # --- validation ---

    def validate(self) -> None:
        """Builds every domain object the study needs; any precondition
        violation becomes a ConfigError on the offending block."""
        checks = {
            "nk-analysis": self._check_nk,
            "automaton": self._check_automaton,
            "org-search": self._check_org,
            "growth-study": self._check_growth,
            "hidden-action": self._check_hidden_action,
        }
        checks[self.study]()

    def _fail(self, block: str, error: Exception) -> ConfigError:
        return ConfigError(str(error), field=block, line=self.lines.get(block))

    def _check_nk(self):
        try:
            self.landscape.spec(self.seed)
        except ValueError as e:
            raise self._fail("landscape", e) from e
        if self.landscape.n > self.enumeration_cap:
            raise ConfigError(
                f"N={self.landscape.n} exceeds the enumeration cap {self.enumeration_cap}; "
                "raise 'enumeration_cap' to analyse it",
                field="landscape.n",
                line=self.lines.get("landscape.n"),
            )
        if self.landscape.climb_steps is None and self.search.sigma_eval > 0.0:
            raise ConfigError("A noisy climb needs 'climb_steps'", field="landscape.climb_steps",
                              line=self.lines.get("landscape"))

    def _check_automaton(self):
        try:
            grid = self.automaton.seed_grid()
            rule = self.automaton.build_rule()
            rule.offsets(grid.states.ndim)
        except (ValueError, IndexError) as e:
            raise self._fail("automaton", e) from e

    def _check_org(self):
        try:
            org = self.organization.design()
            task_landscape_spec(org, self.organization.complexity, self.seed)
        except ValueError as e:
            raise self._fail("organization", e) from e
        if self.organization.mode == CoordinationMode.HIERARCHICAL.value and not org.headquarters:
            raise ConfigError("Hierarchical coordination requires a headquarters", field="organization.mode",
                              line=self.lines.get("organization.mode"))

    def _check_growth(self):
        self._check_org()
        try:
            self.learning.params()
            self.learning.propensities()
        except ValueError as e:
            raise self._fail("learning", e) from e
        try:
            schedule = self.growth.schedule()
        except ValueError as e:
            raise self._fail("growth", e) from e
        if self.growth.horizon < 1 or (schedule.periods and schedule.periods[-1] > self.growth.horizon):
            raise ConfigError(f"horizon {self.growth.horizon} does not cover the growth schedule",
                              field="growth.horizon", line=self.lines.get("growth.horizon"))
        if not self.organization.headquarters:
            raise ConfigError("Mode learning needs a headquarters", field="organization.headquarters",
                              line=self.lines.get("organization.headquarters"))

    def _check_hidden_action(self):
        try:
            self.hidden_action.params()
        except ValueError as e:
            raise self._fail("hidden_action", e) from e
        if self.hidden_action.horizon < 1:
            raise ConfigError("horizon must be at least 1", field="hidden_action.horizon",
                              line=self.lines.get("hidden_action.horizon"))


# --- building dataclasses from plain data ---

def _thaw(value: Any) -> Any:
    if dataclasses.is_dataclass(value):
        return {f.name: _thaw(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, (list, tuple)):
        return [_thaw(v) for v in value]
    return value


def _freeze(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def _coerce(value: Any, hint: Any, path: str, lines: dict) -> Any:
    line = lines.get(path)
    args = typing.get_args(hint)
    if typing.get_origin(hint) in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (hint,) = [a for a in args if a is not type(None)]
        return _coerce(value, hint, path, lines)
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError("Expected a mapping", field=path, line=line)
        return _build(hint, value, path, lines)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"Expected true/false, got {value!r}", field=path, line=line)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"Expected an integer, got {value!r}", field=path, line=line)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"Expected a number, got {value!r}", field=path, line=line)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"Expected a string, got {value!r}", field=path, line=line)
        return value
    if typing.get_origin(hint) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"Expected a list, got {value!r}", field=path, line=line)
        return _freeze(value)
    return value


def _build(cls: type, data: dict, path: str, lines: dict):
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls) if f.init and f.name != "lines"}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(f"Unknown key '{key}'", field=where, line=lines.get(where))
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        kwargs[key] = _coerce(value, hints[key], where, lines)
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e), field=path, line=lines.get(path)) from e
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field=path or "<config>", line=lines.get(path)) from e


def _line_map(node: yaml.Node, prefix: str = "", lines: dict | None = None) -> dict:
    """Dotted key path -> 1-based line of the key in the YAML text."""
    lines = {} if lines is None else lines
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[path] = key_node.start_mark.line + 1
            _line_map(value_node, path, lines)
    return lines


def from_dict(data: dict, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}
    if not isinstance(data, dict):
        raise ConfigError("The configuration must be a mapping")
    if "study" not in data:
        raise ConfigError("Missing required key 'study'", field="study")
    config = _build(ExperimentConfig, data, "", lines)
    config = dataclasses.replace(config, lines=dict(lines))
    config.validate()
    return config


def loads(text: str) -> ExperimentConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"Invalid YAML: {e}", line=mark.line + 1 if mark else None) from e
    lines = _line_map(root) if root is not None else {}
    config = from_dict(data if data is not None else {}, lines)
    logger.debug("Parsed %s config with %d replications", config.study, config.replications)
    return config


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")
    return loads(path.read_text(encoding="utf-8"))
