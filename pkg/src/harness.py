"""
Monte-Carlo experiment harness.

An experiment runs through a small pipeline graph:

  validate → simulate → aggregate → emit

Replication r of a study draws every random number from streams below
``substream(seed, study, r)``, so adding replications never changes the
draws of existing ones and rows are identical whether replications run in
one process or in a worker pool.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence, TypedDict

import numpy as np
import pandas as pd
import yaml
from colorama import Fore, Style
from langgraph.graph import END, StateGraph

from src import __version__
from src.adaptation import run_growth_study
from src.automaton import random_grid, run
from src.config import ConfigError, ExperimentConfig
from src.hiddenaction import SERIES_COLUMNS, simulate
from src.landscape import bits_to_str, generate, random_configuration
from src.organization import MODES, run_org, task_landscape_spec
from src.search import hill_climb
from src.utils.logger import ActionType, log_experiment
from src.utils.rng import derive_seed, substream

ENGINE_VERSION = __version__
SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
Z_95 = 1.96

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3

MODE_COLUMNS = {
    "decentralized": "weight_decentralized",
    "sequential-lateral": "weight_sequential",
    "hierarchical": "weight_hierarchical",
}

RUN_COLUMNS = {
    "nk-analysis": ["run_id", "step", "value", "bits", "global_optimum", "local_optima"],
    "automaton": ["run_id", "step", "state", "count"],
    "org-search": ["run_id", "period", "mode", "value", "bits", "objectives"],
    "growth-study": ["run_id", "period", "active_mode", "value", "bits", "objectives",
                     *MODE_COLUMNS.values(), "N_current", "units_current"],
    "hidden-action": ["run_id", *SERIES_COLUMNS],
}
SORT_KEYS = {
    "nk-analysis": ["run_id", "step"],
    "automaton": ["run_id", "step", "state"],
    "org-search": ["run_id", "period"],
    "growth-study": ["run_id", "period"],
    "hidden-action": ["run_id", "t"],
}
STRING_COLUMNS = ("bits", "objectives", "mode", "active_mode")
SUMMARY_COLUMNS = ["scope", "run_id", "metric", "value", "n", "mean", "sd", "ci95_half_width",
                   "config_hash", "engine_version", "schema_version"]


def _say(quiet: bool, message: str, color: str = "") -> None:
    if not quiet:
        print(f"{color}{message}{Style.RESET_ALL}" if color else message)


def _floats(values: Iterable[float]) -> str:
    return ";".join(FLOAT_FORMAT % v for v in values)


# ---------------------------------------------------------------------------
# One replication per study
# ---------------------------------------------------------------------------

@dataclass
class Replication:
    run_id: int
    rows: pd.DataFrame
    landscape: str | None = None
    grids: dict[int, str] = field(default_factory=dict)


def _nk_replication(config: ExperimentConfig, r: int) -> Replication:
    study = config.study
    land = generate(config.landscape.spec(derive_seed(config.seed, study, r, "landscape")))
    optimum, best = land.global_optimum(config.enumeration_cap)
    census = land.local_optima_census(config.enumeration_cap)
    start = random_configuration(land.n, substream(config.seed, study, r, "start"))
    path = hill_climb(land.fitness, config.search, start, substream(config.seed, study, r, "search"),
                      steps=config.landscape.climb_steps)
    rows = pd.DataFrame({
        "run_id": r,
        "step": range(len(path)),
        "value": [land.fitness(c) for c in path],
        "bits": [bits_to_str(c) for c in path],
        "global_optimum": best,
        "local_optima": census.count,
    }, columns=RUN_COLUMNS[study])
    return Replication(r, rows, land.dumps())


def _automaton_replication(config: ExperimentConfig, r: int) -> Replication:
    block = config.automaton
    rule = block.build_rule()
    if block.initial_density is None:
        grid = block.seed_grid()
    else:
        start_rng = substream(config.seed, config.study, r, "start")
        grid = random_grid(block.topology, block.shape, block.initial_density, start_rng, block.boundary)
    trajectory = run(grid, rule, block.steps, substream(config.seed, config.study, r, "automaton"))
    rows = trajectory.counts()
    rows.insert(0, "run_id", r)
    grids = {t: trajectory.grid_csv(t) for t in range(len(trajectory.grids))} if config.emit.grids else {}
    return Replication(r, rows, grids=grids)


def _task(config: ExperimentConfig, r: int):
    org = config.organization.design()
    seed = derive_seed(config.seed, config.study, r, "landscape")
    return org, generate(task_landscape_spec(org, config.organization.complexity, seed))


def _org_replication(config: ExperimentConfig, r: int) -> Replication:
    org, land = _task(config, r)
    records = run_org(org, config.organization.mode, land, config.search, config.organization.periods,
                      substream(config.seed, config.study, r, "search"))
    rows = pd.DataFrame([
        {"run_id": r, "period": rec.period, "mode": rec.mode.value, "value": rec.value,
         "bits": bits_to_str(rec.config), "objectives": _floats(rec.objectives)}
        for rec in records
    ], columns=RUN_COLUMNS["org-search"])
    return Replication(r, rows, land.dumps())


def _growth_replication(config: ExperimentConfig, r: int) -> Replication:
    org, land = _task(config, r)
    records = run_growth_study(
        org, land, config.organization.complexity, config.search, config.learning.params(),
        config.growth.schedule(), config.growth.horizon, substream(config.seed, config.study, r),
        propensities=config.learning.propensities(),
    )
    rows = []
    for rec in records:
        row = {"run_id": r, "period": rec.period, "active_mode": rec.mode.value, "value": rec.value,
               "bits": bits_to_str(rec.config), "objectives": _floats(rec.objectives)}
        row.update({MODE_COLUMNS[m.value]: w for m, w in zip(MODES, rec.weights)})
        row.update({"N_current": rec.n, "units_current": rec.units})
        rows.append(row)
    return Replication(r, pd.DataFrame(rows, columns=RUN_COLUMNS["growth-study"]), land.dumps())


def _hidden_action_replication(config: ExperimentConfig, r: int) -> Replication:
    series = simulate(config.hidden_action.params(), config.hidden_action.horizon,
                      substream(config.seed, config.study, r))
    series.insert(0, "run_id", r)
    return Replication(r, series)


REPLICATORS = {
    "nk-analysis": _nk_replication,
    "automaton": _automaton_replication,
    "org-search": _org_replication,
    "growth-study": _growth_replication,
    "hidden-action": _hidden_action_replication,
}


def replicate(config: ExperimentConfig, r: int) -> Replication:
    return REPLICATORS[config.study](config, r)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def _nk_metrics(run: pd.DataFrame) -> dict:
    final = float(run["value"].iloc[-1])
    best = float(run["global_optimum"].iloc[0])
    return {
        "final_value": final,
        "global_optimum": best,
        "local_optima": float(run["local_optima"].iloc[0]),
        "climb_steps": float(len(run) - 1),
        "reached_global": float(final == best),
    }


def _automaton_metrics(run: pd.DataFrame) -> dict:
    total = int(run.loc[run["step"] == run["step"].min(), "count"].sum())
    final = run[run["step"] == run["step"].max()]
    metrics = {f"final_count_{int(s)}": float(c) for s, c in zip(final["state"], final["count"])}
    adopted = run[(run["state"] == 1) & (run["count"] == total)]
    metrics["adoption_time"] = float(adopted["step"].min()) if len(adopted) else math.nan
    return metrics


def _org_metrics(run: pd.DataFrame) -> dict:
    first, last = float(run["value"].iloc[0]), float(run["value"].iloc[-1])
    return {"initial_value": first, "final_value": last, "improvement": last - first}


def _growth_metrics(run: pd.DataFrame) -> dict:
    metrics = _org_metrics(run)
    metrics["final_n"] = float(run["N_current"].iloc[-1])
    terminal = run["active_mode"].iloc[-1]
    for mode in MODES:
        metrics[f"terminal_{mode.value}"] = float(terminal == mode.value)
    return metrics


def _hidden_action_metrics(run: pd.DataFrame) -> dict:
    return {
        "avg_principal_net": float(run["avg_principal_net"].iloc[-1]),
        "mean_expected_net": float(run["expected_net"].mean()),
        "mean_efficiency_loss": float(run["efficiency_loss"].mean()),
        "final_p": float(run["p"].iloc[-1]),
        "acceptance_rate": float(run["accepted"].astype(float).mean()),
        "final_above_optimum": float(bool(run["above_optimum"].iloc[-1])),
        "final_at_optimum": float(bool(run["at_optimum"].iloc[-1])),
    }


TERMINAL_METRICS = {
    "nk-analysis": _nk_metrics,
    "automaton": _automaton_metrics,
    "org-search": _org_metrics,
    "growth-study": _growth_metrics,
    "hidden-action": _hidden_action_metrics,
}


def batch_statistics(values: Sequence[float]) -> dict:
    """n, mean, sample sd (0 for a single run) and the 95 % normal half-width."""
    data = np.array([v for v in values if not math.isnan(v)], dtype=np.float64)
    n = int(data.size)
    if n == 0:
        return {"n": 0, "mean": math.nan, "sd": math.nan, "ci95_half_width": math.nan}
    sd = float(data.std(ddof=1)) if n > 1 else 0.0
    return {"n": n, "mean": float(data.mean()), "sd": sd, "ci95_half_width": Z_95 * sd / math.sqrt(n)}


@dataclass
class Summary:
    study: str
    replications: pd.DataFrame
    batch: pd.DataFrame

    def metric(self, name: str) -> dict:
        row = self.batch[self.batch["metric"] == name]
        if row.empty:
            raise KeyError(f"No metric '{name}' in the {self.study} summary")
        return row.iloc[0].to_dict()

    def to_frame(self, config_hash: str = "", engine_version: str = ENGINE_VERSION) -> pd.DataFrame:
        reps = self.replications.assign(scope="replication")
        batch = self.batch.assign(scope="batch", run_id=pd.NA, value=math.nan)
        frame = pd.concat([reps, batch], ignore_index=True)
        frame["config_hash"] = config_hash
        frame["engine_version"] = engine_version
        frame["schema_version"] = SCHEMA_VERSION
        return frame.reindex(columns=SUMMARY_COLUMNS)


def _sorted_runs(frame: pd.DataFrame, study: str) -> pd.DataFrame:
    keys = SORT_KEYS[study]
    if frame.duplicated(subset=keys).any():
        dup = frame.loc[frame.duplicated(subset=keys), "run_id"].iloc[0]
        raise ValueError(f"Replication {dup} appears more than once in the per-period rows")
    return frame.sort_values(keys, kind="mergesort").reset_index(drop=True)


def summarize(frame: pd.DataFrame, study: str) -> Summary:
    """Terminal metrics per replication plus batch statistics per metric."""
    frame = _sorted_runs(frame, study)
    metrics_of = TERMINAL_METRICS[study]
    rows, order = [], []
    for run_id, run in frame.groupby("run_id", sort=True):
        for metric, value in metrics_of(run).items():
            rows.append({"run_id": int(run_id), "metric": metric, "value": value})
            if metric not in order:
                order.append(metric)
    replications = pd.DataFrame(rows, columns=["run_id", "metric", "value"])
    batch = pd.DataFrame(
        [{"metric": m, **batch_statistics(replications.loc[replications["metric"] == m, "value"])} for m in order],
        columns=["metric", "n", "mean", "sd", "ci95_half_width"],
    )
    return Summary(study, replications, batch)


def study_for_columns(columns: Sequence[str]) -> str:
    """The study whose per-period schema matches ``columns`` exactly."""
    columns = list(columns)
    for study, expected in RUN_COLUMNS.items():
        if columns == expected:
            return study
    closest = max(RUN_COLUMNS, key=lambda s: len(set(RUN_COLUMNS[s]) & set(columns)))
    expected = RUN_COLUMNS[closest]
    for column in columns:
        if column not in expected:
            raise ValueError(f"Unexpected column '{column}' for a {closest} schema")
    for column in expected:
        if column not in columns:
            raise ValueError(f"Missing column '{column}' for a {closest} schema")
    raise ValueError(f"Columns are out of order for a {closest} schema: {columns}")


def read_runs(path: str | os.PathLike) -> tuple[str, pd.DataFrame]:
    header = list(pd.read_csv(path, nrows=0).columns)
    study = study_for_columns(header)
    frame = pd.read_csv(path, dtype={c: str for c in STRING_COLUMNS if c in header}, keep_default_na=False,
                        na_values=[""])
    return study, frame


def aggregate(paths: Sequence[str | os.PathLike]) -> Summary:
    """Summarizes one or more ``runs.csv`` files; input order does not matter."""
    if not paths:
        raise ValueError("No per-period files to aggregate")
    study, frames = None, []
    for path in paths:
        file_study, frame = read_runs(path)
        if study is not None and file_study != study:
            offending = [c for c in frame.columns if c not in RUN_COLUMNS[study]]
            column = offending[0] if offending else frame.columns[0]
            raise ValueError(f"Column '{column}' in {path} does not belong to the {study} schema")
        study = file_study
        frames.append(frame)
    return summarize(pd.concat(frames, ignore_index=True), study)


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pooled two-proportion z statistic for k1/n1 vs k2/n2 and its two-sided p-value."""
    if n1 < 1 or n2 < 1 or not 0 <= k1 <= n1 or not 0 <= k2 <= n2:
        raise ValueError(f"Invalid counts {k1}/{n1}, {k2}/{n2}")
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if se == 0.0:
        return 0.0, 1.0
    z = (k1 / n1 - k2 / n2) / se
    return z, math.erfc(abs(z) / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# Pipeline nodes
# ---------------------------------------------------------------------------

class PipelineState(TypedDict):
    config: ExperimentConfig
    quiet: bool
    replications: list | None
    runs: pd.DataFrame | None
    summary: Summary | None
    files: list
    exit_code: int
    error: str | None


def _parameters(config: ExperimentConfig) -> dict:
    return {"replications": config.replications, "seed": config.seed, "config_hash": config.config_hash()}


def create_validate_node():
    def validate_node(state: PipelineState) -> PipelineState:
        config = state["config"]
        _say(state["quiet"], f"🔍 Validating {config.study} config...")
        try:
            config.validate()
            log_experiment("Harness", config.study, ActionType.CONFIG,
                           {"parameters": _parameters(config), "outcome": "valid"}, "SUCCESS")
            return {**state, "error": None}
        except ConfigError as e:
            _say(state["quiet"], f"❌ {e}", Fore.RED)
            log_experiment("Harness", config.study, ActionType.CONFIG,
                           {"parameters": {"study": config.study}, "outcome": str(e)}, "FAILURE")
            return {**state, "error": str(e), "exit_code": EXIT_CONFIG}

    return validate_node


def create_simulate_node():
    def simulate_node(state: PipelineState) -> PipelineState:
        config = state["config"]
        _say(state["quiet"], f"🎲 Running {config.replications} replication(s) of {config.study}...")
        try:
            if config.workers > 1:
                with ProcessPoolExecutor(max_workers=config.workers) as pool:
                    results = list(pool.map(replicate, [config] * config.replications, range(config.replications)))
            else:
                results = [replicate(config, r) for r in range(config.replications)]
            results.sort(key=lambda rep: rep.run_id)
            runs = _sorted_runs(pd.concat([rep.rows for rep in results], ignore_index=True), config.study)
            log_experiment("Harness", config.study, ActionType.SIMULATION,
                           {"parameters": _parameters(config), "outcome": f"{len(runs)} rows"}, "SUCCESS")
            return {**state, "replications": results, "runs": runs, "error": None}
        except Exception as e:
            error_msg = f"Simulation failed: {e}"
            _say(state["quiet"], f"❌ {error_msg}", Fore.RED)
            log_experiment("Harness", config.study, ActionType.SIMULATION,
                           {"parameters": _parameters(config), "outcome": error_msg}, "FAILURE")
            return {**state, "error": error_msg, "exit_code": EXIT_FAILURE}

    return simulate_node


def create_aggregate_node():
    def aggregate_node(state: PipelineState) -> PipelineState:
        config = state["config"]
        try:
            summary = summarize(state["runs"], config.study)
            log_experiment("Harness", config.study, ActionType.AGGREGATION,
                           {"parameters": _parameters(config), "outcome": summary.batch.to_dict("records")},
                           "SUCCESS")
            return {**state, "summary": summary, "error": None}
        except Exception as e:
            error_msg = f"Aggregation failed: {e}"
            _say(state["quiet"], f"❌ {error_msg}", Fore.RED)
            log_experiment("Harness", config.study, ActionType.AGGREGATION,
                           {"parameters": _parameters(config), "outcome": error_msg}, "FAILURE")
            return {**state, "error": error_msg, "exit_code": EXIT_FAILURE}

    return aggregate_node


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def write_csv(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def create_emit_node():
    def emit_node(state: PipelineState) -> PipelineState:
        config = state["config"]
        out = config.output_dir
        files = []
        try:
            os.makedirs(out, exist_ok=True)
            if config.emit.series:
                files.append(os.path.join(out, "runs.csv"))
                write_csv(state["runs"], files[-1])
            if config.emit.summary:
                files.append(os.path.join(out, "summary.csv"))
                write_csv(state["summary"].to_frame(config.config_hash()), files[-1])
            first = state["replications"][0]
            if config.emit.landscape and first.landscape is not None:
                files.append(os.path.join(out, "landscape.txt"))
                _write(files[-1], first.landscape)
            for t, text in first.grids.items():
                files.append(os.path.join(out, f"grid_{t:04d}.csv"))
                _write(files[-1], text)
            log_experiment("Harness", config.study, ActionType.EMISSION,
                           {"parameters": {"output_dir": out}, "outcome": files}, "SUCCESS")
            _say(state["quiet"], f"✅ Wrote {len(files)} file(s) to {out}", Fore.GREEN)
            return {**state, "files": files, "exit_code": EXIT_OK, "error": None}
        except OSError as e:
            error_msg = f"Could not write outputs: {e}"
            _say(state["quiet"], f"❌ {error_msg}", Fore.RED)
            log_experiment("Harness", config.study, ActionType.EMISSION,
                           {"parameters": {"output_dir": out}, "outcome": error_msg}, "FAILURE")
            return {**state, "files": files, "error": error_msg, "exit_code": EXIT_IO}

    return emit_node


def continue_or_stop(state: PipelineState) -> Literal["continue", "end"]:
    return "end" if state.get("error") else "continue"


def build_pipeline():
    workflow = StateGraph(PipelineState)

    workflow.add_node("validate", create_validate_node())
    workflow.add_node("simulate", create_simulate_node())
    workflow.add_node("aggregate", create_aggregate_node())
    workflow.add_node("emit", create_emit_node())

    workflow.set_entry_point("validate")
    workflow.add_conditional_edges("validate", continue_or_stop, {"continue": "simulate", "end": END})
    workflow.add_conditional_edges("simulate", continue_or_stop, {"continue": "aggregate", "end": END})
    workflow.add_conditional_edges("aggregate", continue_or_stop, {"continue": "emit", "end": END})
    workflow.add_edge("emit", END)

    return workflow.compile()


@dataclass
class ExperimentResult:
    exit_code: int
    output_dir: str
    files: list[str]
    runs: pd.DataFrame | None = None
    summary: Summary | None = None
    error: str | None = None


def run_experiment(config: ExperimentConfig, quiet: bool = False) -> ExperimentResult:
    initial_state: PipelineState = {
        "config": config,
        "quiet": quiet,
        "replications": None,
        "runs": None,
        "summary": None,
        "files": [],
        "exit_code": EXIT_FAILURE,
        "error": None,
    }
    final_state = build_pipeline().invoke(initial_state)
    return ExperimentResult(
        exit_code=final_state["exit_code"],
        output_dir=config.output_dir,
        files=final_state["files"],
        runs=final_state["runs"],
        summary=final_state["summary"],
        error=final_state["error"],
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    exit_code: int
    combined: pd.DataFrame | None
    runs: list[ExperimentResult]


def parse_value(text: str):
    """A CLI sweep value as YAML would read it ("3" -> 3, "0.5" -> 0.5)."""
    return yaml.safe_load(text)


def sweep(config: ExperimentConfig, axis: str, values: Sequence, quiet: bool = False) -> SweepResult:
    """One experiment per value under ``<out>/<axis>=<value>/`` plus ``combined.csv``."""
    if not values:
        raise ConfigError("A sweep needs at least one value", field=axis)
    variants = []
    for value in values:
        out = os.path.join(config.output_dir, f"{axis}={value}")
        variants.append((value, config.with_value(axis, value).with_overrides(output_dir=out)))

    results, tables = [], []
    for value, variant in variants:
        _say(quiet, f"\n📂 {axis} = {value}", Fore.CYAN)
        result = run_experiment(variant, quiet=quiet)
        results.append(result)
        if result.exit_code != EXIT_OK:
            log_experiment("Sweep", config.study, ActionType.SWEEP,
                           {"parameters": {"axis": axis, "value": value}, "outcome": result.error}, "FAILURE")
            return SweepResult(result.exit_code, None, results)
        table = result.summary.batch.copy()
        table.insert(0, axis, value)
        tables.append(table)

    combined = pd.concat(tables, ignore_index=True)
    try:
        os.makedirs(config.output_dir, exist_ok=True)
        write_csv(combined, os.path.join(config.output_dir, "combined.csv"))
    except OSError as e:
        _say(quiet, f"❌ Could not write combined table: {e}", Fore.RED)
        return SweepResult(EXIT_IO, combined, results)
    log_experiment("Sweep", config.study, ActionType.SWEEP,
                   {"parameters": {"axis": axis, "values": list(values)}, "outcome": f"{len(values)} experiments"},
                   "SUCCESS")
    return SweepResult(EXIT_OK, combined, results)
