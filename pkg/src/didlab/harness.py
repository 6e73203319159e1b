"""Monte Carlo experiments over scenarios and analysis methods.

Each replicate draws one panel per scenario-process cell and applies every
requested method to that same panel. Replicates get their own random stream
keyed by (seed, scenario, process, replicate), so results do not depend on
worker count or on which methods are run.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from didlab import __version__
from didlab.dgp import NoiseSwitches, OutcomeProcess, PanelDataset, Scenario, ScenarioSpec, generate, replicate_rng
from didlab.kernels import BACKEND
from didlab.matching import Distance, MatchKind, MatchStrategy, MatchingError, match_panel
from didlab.oracle import true_att
from didlab.regression import EstimationError, ModelKind, ModelSpec, fit_model

__all__ = [
    "AnalysisMethod",
    "ExperimentConfig",
    "ConfigError",
    "CellSummary",
    "ResultTable",
    "ReplicateOutcome",
    "PROTOCOL_CELLS",
    "percent_bias",
    "run_replicate",
    "run_experiment",
    "figure1_demo",
    "Figure1Demo",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class AnalysisMethod(str, enum.Enum):
    SIMPLE = "simple"
    CA = "ca"
    TVA = "tva"
    MATCH_OUTCOMES = "match_outcomes"
    MATCH_DIFFS = "match_diffs"
    MATCH_COVARIATES = "match_covariates"

    @property
    def match_kind(self) -> MatchKind | None:
        return {
            AnalysisMethod.MATCH_OUTCOMES: MatchKind.PRE_OUTCOMES,
            AnalysisMethod.MATCH_DIFFS: MatchKind.PRE_FIRST_DIFFS,
            AnalysisMethod.MATCH_COVARIATES: MatchKind.PRE_COVARIATES,
        }.get(self)

    @property
    def model_kind(self) -> ModelKind:
        if self is AnalysisMethod.CA:
            return ModelKind.CA
        if self is AnalysisMethod.TVA:
            return ModelKind.TVA
        return ModelKind.SIMPLE


PROTOCOL_CELLS = [
    (Scenario.S1, None),
    (Scenario.S2, None),
    (Scenario.S3, None),
    (Scenario.S4, OutcomeProcess.CONSTANT),
    (Scenario.S4, OutcomeProcess.TIME_VARYING),
    (Scenario.S5, OutcomeProcess.CONSTANT),
    (Scenario.S5, OutcomeProcess.TIME_VARYING),
    (Scenario.S6, OutcomeProcess.CONSTANT),
    (Scenario.S6, OutcomeProcess.TIME_VARYING),
]


def _parse_cell(item) -> tuple:
    if isinstance(item, dict):
        scen, proc = item.get("scenario"), item.get("process")
        extra = set(item) - {"scenario", "process"}
        if extra:
            raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
    elif isinstance(item, str):
        s = item.lower()
        scen, proc = (s[:-1], s[-1]) if s[-1] in "ab" and s[:-1] in {x.value for x in Scenario} else (s, None)
    else:
        scen, proc = item
    try:
        scen = Scenario(scen.lower() if isinstance(scen, str) else scen)
        proc = OutcomeProcess(proc) if scen.time_varying else None
    except ValueError as exc:
        raise ConfigError(f"bad scenario entry {item!r}: {exc}") from exc
    return scen, proc


@dataclass
class ExperimentConfig:
    scenarios: list = field(default_factory=lambda: list(PROTOCOL_CELLS))
    methods: list = field(default_factory=lambda: list(AnalysisMethod))
    reps: int = 400
    n_units: int = 800
    n_times: int = 10
    first_post_time: int = 6
    master_seed: int = 20200
    parallelism: int = 1
    matching_distance: Distance = Distance.EUCLIDEAN
    matching_replacement: bool = True
    out_csv: str | None = None
    out_json: str | None = None

    def __post_init__(self):
        self.scenarios = [_parse_cell(c) for c in self.scenarios]
        try:
            self.methods = [AnalysisMethod(m) for m in self.methods]
            self.matching_distance = Distance(self.matching_distance)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.reps < 1:
            raise ConfigError("reps must be positive")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if not self.methods or not self.scenarios:
            raise ConfigError("need at least one scenario and one method")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenarios"] = [[s.value, None if p is None else p.value] for s, p in self.scenarios]
        d["methods"] = [m.value for m in self.methods]
        d["matching_distance"] = self.matching_distance.value
        return d

    def spec_for(self, scenario, process, replicate_index: int = 0) -> ScenarioSpec:
        return ScenarioSpec.protocol_default(
            scenario,
            process,
            n_units=self.n_units,
            n_times=self.n_times if Scenario(scenario) is not Scenario.TOY else 2,
            first_post_time=self.first_post_time if Scenario(scenario) is not Scenario.TOY else 2,
            master_seed=self.master_seed,
            replicate_index=replicate_index,
        )


def percent_bias(estimates, truth: float) -> float:
    """100 * (mean estimate - truth) / truth."""
    if truth == 0:
        raise ValueError("percent bias is undefined for a zero truth; report absolute bias")
    return 100.0 * (float(np.mean(estimates)) - truth) / truth


@dataclass(frozen=True)
class ReplicateOutcome:
    estimate: float = math.nan
    se: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def apply_method(data: PanelDataset, method, distance=Distance.EUCLIDEAN, replacement: bool = True) -> ReplicateOutcome:
    method = AnalysisMethod(method)
    try:
        if method.match_kind is not None:
            strategy = MatchStrategy(method.match_kind, distance=distance, replacement=replacement)
            data, _ = match_panel(data, strategy)
        fit = fit_model(data, ModelSpec(method.model_kind, matched=method.match_kind is not None), method=method.value)
        return ReplicateOutcome(fit.att_hat, fit.se_att)
    except (MatchingError, EstimationError, np.linalg.LinAlgError) as exc:
        return ReplicateOutcome(error=f"{type(exc).__name__}: {exc}")


def run_replicate(
    spec: ScenarioSpec,
    methods,
    noise: NoiseSwitches | None = None,
    rng: np.random.Generator | None = None,
    distance=Distance.EUCLIDEAN,
    replacement: bool = True,
):
    """Generate one panel and apply each method to it.

    Returns a :class:`ReplicateOutcome` for a single method, or a dict keyed
    by method for a list. Failures (matching or estimation errors) are
    captured in the outcome instead of raised.
    """
    single = isinstance(methods, (str, AnalysisMethod))
    method_list = [methods] if single else list(methods)
    data = generate(spec, noise, rng)
    out = {AnalysisMethod(m): apply_method(data, m, distance, replacement) for m in method_list}
    return out[AnalysisMethod(methods)] if single else out


@dataclass
class CellSummary:
    scenario: Scenario
    process: OutcomeProcess | None
    method: AnalysisMethod
    reps_used: int
    failures: int
    mean_att_hat: float
    true_att: float
    pct_bias: float
    mean_se: float
    mc_sd: float
    mc_se_of_bias: float
    estimates: np.ndarray = field(repr=False, default=None)

    @property
    def failed(self) -> bool:
        return self.reps_used == 0

    @property
    def key(self) -> tuple:
        return self.scenario, self.process, self.method

    @classmethod
    def from_outcomes(cls, scenario, process, method, outcomes, truth) -> "CellSummary":
        est = np.array([o.estimate for o in outcomes if o.ok])
        ses = np.array([o.se for o in outcomes if o.ok])
        used = len(est)
        failures = len(outcomes) - used
        if used == 0:
            nan = math.nan
            return cls(scenario, process, method, 0, failures, nan, truth, nan, nan, nan, nan, est)
        mean_est = float(est.mean())
        mc_sd = float(est.std(ddof=1)) if used > 1 else math.nan
        if truth != 0:
            pct = percent_bias(est, truth)
            mc_se_bias = 100.0 * mc_sd / (abs(truth) * math.sqrt(used))
        else:
            pct = mc_se_bias = math.nan
        return cls(scenario, process, method, used, failures, mean_est, truth, pct, float(ses.mean()), mc_sd, mc_se_bias, est)


CSV_HEADER = "scenario,process,method,reps,failures,mean_est,true_att,pct_bias,mc_se_bias,mean_se,mc_sd"


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.17g}"


@dataclass
class ResultTable:
    cells: list
    config: dict
    version: str = __version__
    backend: str = BACKEND
    wall_seconds: float = 0.0

    def cell(self, scenario, process=None, method=AnalysisMethod.SIMPLE) -> CellSummary:
        scenario = Scenario(scenario)
        process = OutcomeProcess(process) if process is not None and scenario.time_varying else None
        method = AnalysisMethod(method)
        for c in self.cells:
            if c.key == (scenario, process, method):
                return c
        raise KeyError((scenario, process, method))

    @property
    def all_failed(self) -> bool:
        return all(c.failed for c in self.cells)

    def to_csv(self, path=None) -> str:
        lines = [CSV_HEADER]
        for c in self.cells:
            proc = "-" if c.process is None else c.process.value
            lines.append(
                ",".join(
                    [c.scenario.value, proc, c.method.value, str(c.reps_used), str(c.failures)]
                    + [_fmt(v) for v in (c.mean_att_hat, c.true_att, c.pct_bias, c.mc_se_of_bias, c.mean_se, c.mc_sd)]
                )
            )
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self, path=None) -> dict:
        doc = {
            "version": self.version,
            "kernel_backend": self.backend,
            "wall_seconds": self.wall_seconds,
            "config": self.config,
            "cells": [
                {
                    "scenario": c.scenario.value,
                    "process": None if c.process is None else c.process.value,
                    "method": c.method.value,
                    "reps": c.reps_used,
                    "failures": c.failures,
                    "mean_est": c.mean_att_hat,
                    "true_att": c.true_att,
                    "pct_bias": c.pct_bias,
                    "mc_se_bias": c.mc_se_of_bias,
                    "mean_se": c.mean_se,
                    "mc_sd": c.mc_sd,
                }
                for c in self.cells
            ],
        }
        if path is not None:
            Path(path).write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n")
        return doc


def _run_job(job):
    config_dict, cell_idx, rep = job
    config = ExperimentConfig.from_dict(config_dict)
    scen, proc = config.scenarios[cell_idx]
    spec = config.spec_for(scen, proc, rep)
    rng = replicate_rng(config.master_seed, scen, proc, rep)
    try:
        res = run_replicate(
            spec, config.methods, rng=rng, distance=config.matching_distance, replacement=config.matching_replacement
        )
    except ValueError as exc:
        err = ReplicateOutcome(error=f"{type(exc).__name__}: {exc}")
        res = {m: err for m in config.methods}
    return cell_idx, rep, res


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run every replicate of every cell and summarize per method.

    Replicates are spread over ``config.parallelism`` processes. Output is
    identical for any worker count.
    """
    start = time.perf_counter()
    cfg = config.to_dict()
    jobs = [(cfg, ci, r) for ci in range(len(config.scenarios)) for r in range(config.reps)]
    store = [[None] * config.reps for _ in config.scenarios]
    if config.parallelism == 1:
        results = map(_run_job, jobs)
        for ci, r, res in results:
            store[ci][r] = res
    else:
        chunk = max(1, len(jobs) // (config.parallelism * 8))
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            for ci, r, res in pool.map(_run_job, jobs, chunksize=chunk):
                store[ci][r] = res

    cells = []
    for ci, (scen, proc) in enumerate(config.scenarios):
        truth = true_att(scen, proc, n_times=config.n_times, first_post_time=config.first_post_time)
        for m in config.methods:
            outcomes = [store[ci][r][m] for r in range(config.reps)]
            summary = CellSummary.from_outcomes(scen, proc, m, outcomes, truth)
            if summary.failures:
                log.warning("%s %s %s: %d failed replicates", scen.value, proc, m.value, summary.failures)
            cells.append(summary)
    table = ResultTable(cells, cfg, wall_seconds=time.perf_counter() - start)
    if config.out_csv:
        table.to_csv(config.out_csv)
    if config.out_json:
        table.to_json(config.out_json)
    return table


@dataclass
class Figure1Demo:
    """Toy panel with residuals from three covariate-free-of-group models."""

    data: PanelDataset
    residuals: dict

    MODELS = ("time", "time_x", "time_x_interaction")

    def group_means(self) -> dict:
        """Mean outcome and residuals by (group, period)."""
        period = self.data.time - 1
        out = {}
        for name, values in [("y", self.data.y)] + [(m, self.residuals[m]) for m in self.MODELS]:
            for a in (0, 1):
                for t in np.unique(period):
                    mask = (self.data.group == a) & (period == t)
                    out[(name, a, int(t))] = float(values[mask].mean())
        return out

    def gap(self, name: str, period: int) -> float:
        gm = self.group_means()
        return gm[(name, 1, period)] - gm[(name, 0, period)]

    def to_csv(self, path=None) -> str:
        lines = ["unit,period,group,x,y," + ",".join(f"resid_{m}" for m in self.MODELS)]
        d = self.data
        for i in range(len(d)):
            res = ",".join(f"{self.residuals[m][i]:.17g}" for m in self.MODELS)
            lines.append(f"{d.unit[i]},{d.time[i] - 1},{d.group[i]},{d.x[i]:.17g},{d.y[i]:.17g},{res}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def figure1_demo(noise_sd: float = 1.0, seed: int = 0, n_units: int = 800, covariate_sd: float = 0.2) -> Figure1Demo:
    """Toy panel and residuals from time-only, time + x, and time * x fits.

    ``noise_sd`` is the outcome error sd; unit intercepts are off. None of
    the models include the group indicator, so residual group gaps expose
    what each adjustment leaves unexplained.
    """
    spec = ScenarioSpec.protocol_default(Scenario.TOY, n_units=n_units, master_seed=seed)
    noise = NoiseSwitches(unit_intercept_sd=0.0, outcome_error_sd=noise_sd, covariate_noise_sd=0.0, toy_covariate_sd=covariate_sd)
    data = generate(spec, noise)
    d1 = (data.time == 2).astype(float)
    one = np.ones(len(data))
    designs = {
        "time": np.column_stack([one, d1]),
        "time_x": np.column_stack([one, d1, data.x]),
        "time_x_interaction": np.column_stack([one, d1, data.x, data.x * d1]),
    }
    residuals = {}
    for name, A in designs.items():
        beta, *_ = np.linalg.lstsq(A, data.y, rcond=None)
        residuals[name] = data.y - A @ beta
    return Figure1Demo(data, residuals)
