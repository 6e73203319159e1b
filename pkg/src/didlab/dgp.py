"""Panel data generation for the confounding scenarios.

Scenarios 1-3 carry a time-invariant baseline covariate; scenarios 4-6 carry
a covariate that evolves over time, and each comes in two outcome processes
(constant or time-varying covariate effect). ``Toy`` is the two-period
example with no treatment effect used to illustrate residual divergence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "Scenario",
    "OutcomeProcess",
    "ScenarioSpec",
    "NoiseSwitches",
    "PanelRow",
    "PanelDataset",
    "TOY_PARAMS",
    "f_time",
    "g_interaction",
    "baseline_covariate_params",
    "covariate_path",
    "outcome_mean",
    "replicate_rng",
    "generate",
]


class Scenario(str, enum.Enum):
    TOY = "toy"
    S1 = "s1"
    S2 = "s2"
    S3 = "s3"
    S4 = "s4"
    S5 = "s5"
    S6 = "s6"

    @property
    def time_varying(self) -> bool:
        return self in (Scenario.S4, Scenario.S5, Scenario.S6)

    @property
    def code(self) -> int:
        return list(Scenario).index(self)


class OutcomeProcess(str, enum.Enum):
    CONSTANT = "a"
    TIME_VARYING = "b"

    @property
    def code(self) -> int:
        return 1 if self is OutcomeProcess.CONSTANT else 2


TOY_PARAMS = {
    "alpha0": 1.0,
    "alpha1": -1.0,
    "zeta": (1.0, 2.0),
    "lambda": (0.0, 1.0),
    "tau": (0.0, 1.0),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Complete parameterization of one data-generating process.

    ``outcome_process`` is only meaningful for scenarios 4-6 and is forced to
    ``None`` elsewhere. Use :meth:`protocol_default` for the simulation protocol
    (800 units, 10 times, treatment from t=6).
    """

    scenario_id: Scenario
    outcome_process: OutcomeProcess | None = None
    n_units: int = 800
    n_times: int = 10
    first_post_time: int = 6
    treat_prob: float = 0.5
    gamma: float = 1.0
    master_seed: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario_id", Scenario(self.scenario_id))
        proc = self.outcome_process
        if self.scenario_id.time_varying:
            if proc is None:
                raise ValueError(f"{self.scenario_id.value} requires an outcome process ('a' or 'b')")
            object.__setattr__(self, "outcome_process", OutcomeProcess(proc))
        else:
            object.__setattr__(self, "outcome_process", None)
        if self.n_units < 1 or self.n_times < 1:
            raise ValueError("n_units and n_times must be positive")
        if not 2 <= self.first_post_time <= self.n_times:
            raise ValueError("first_post_time must lie in [2, n_times] so there is a pre period")
        if not 0.0 < self.treat_prob < 1.0:
            raise ValueError("treat_prob must lie in (0, 1)")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be non-negative")

    @classmethod
    def protocol_default(cls, scenario, process=None, **overrides) -> "ScenarioSpec":
        scenario = Scenario(scenario)
        if scenario is Scenario.TOY:
            base = dict(n_times=2, first_post_time=2, gamma=0.0)
        else:
            base = {}
        base.update(overrides)
        return cls(scenario, process, **base)

    def with_replicate(self, replicate_index: int) -> "ScenarioSpec":
        return replace(self, replicate_index=replicate_index)

    @property
    def label(self) -> str:
        if self.outcome_process is None:
            return self.scenario_id.value
        return f"{self.scenario_id.value}{self.outcome_process.value}"


@dataclass(frozen=True)
class NoiseSwitches:
    """Standard deviations of every random component.

    ``baseline_covariate_sd_scale`` multiplies the group-specific baseline
    covariate sd; at zero every unit sits exactly at its group mean.
    ``toy_covariate_sd`` is the spread of the toy covariate around its group
    mean. With every field at zero the dataset is deterministic.
    """

    unit_intercept_sd: float = 0.25
    outcome_error_sd: float = 1.0
    covariate_noise_sd: float = 0.1
    baseline_covariate_sd_scale: float = 1.0
    toy_covariate_sd: float = 0.2

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")

    @classmethod
    def zero(cls) -> "NoiseSwitches":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def outcome_free(cls) -> "NoiseSwitches":
        """No intercepts, errors or z noise; covariate spread retained."""
        return cls(unit_intercept_sd=0.0, outcome_error_sd=0.0, covariate_noise_sd=0.0)


class PanelRow(NamedTuple):
    unit_id: int
    time: int
    group: int
    post: int
    covariate: float
    outcome: float


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced long-format panel, rows sorted by (unit, time).

    Stored column-wise. ``cluster`` defaults to ``unit`` and differs only for
    matched subsets in which comparison units are reused under new ids.
    """

    unit: np.ndarray
    time: np.ndarray
    group: np.ndarray
    post: np.ndarray
    x: np.ndarray
    y: np.ndarray
    spec: ScenarioSpec | None = None
    cluster: np.ndarray | None = field(default=None)

    def __post_init__(self):
        n = len(self.unit)
        for name in ("time", "group", "post", "x", "y"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name!r} has length {len(getattr(self, name))}, expected {n}")
        if self.cluster is None:
            object.__setattr__(self, "cluster", self.unit)
        elif len(self.cluster) != n:
            raise ValueError("cluster column length mismatch")

    def __len__(self) -> int:
        return len(self.unit)

    @cached_property
    def unit_ids(self) -> np.ndarray:
        return np.unique(self.unit)

    @property
    def n_units(self) -> int:
        return len(self.unit_ids)

    @cached_property
    def times(self) -> np.ndarray:
        return np.unique(self.time)

    @property
    def n_times(self) -> int:
        return len(self.times)

    @cached_property
    def first_post_time(self) -> int:
        post_times = self.time[self.post == 1]
        if len(post_times) == 0:
            raise ValueError("panel has no post-treatment rows")
        return int(post_times.min())

    @cached_property
    def _balanced(self) -> bool:
        n_u, n_t = self.n_units, self.n_times
        if len(self) != n_u * n_t:
            return False
        wide_unit = self.unit.reshape(n_u, n_t)
        if not np.all(wide_unit == wide_unit[:, :1]) or not np.all(np.diff(wide_unit[:, 0]) > 0):
            return False
        return bool(np.all(self.time.reshape(n_u, n_t) == self.times))

    def is_balanced(self) -> bool:
        """One row per (unit, time), sorted by unit then time."""
        return self._balanced

    def wide(self, column: str) -> np.ndarray:
        """Return ``column`` as a (units, times) array. Requires balance."""
        if not self.is_balanced():
            raise ValueError("panel is not balanced")
        return np.asarray(getattr(self, column)).reshape(self.n_units, self.n_times)

    def unit_groups(self) -> np.ndarray:
        return self.wide("group")[:, 0]

    def iter_rows(self) -> Iterator[PanelRow]:
        for u, t, a, p, x, y in zip(self.unit, self.time, self.group, self.post, self.x, self.y):
            yield PanelRow(int(u), int(t), int(a), int(p), float(x), float(y))

    def to_csv(self, path) -> None:
        lines = ["unit,time,group,post,x,y"]
        for r in self.iter_rows():
            lines.append(f"{r.unit_id},{r.time},{r.group},{r.post},{r.covariate:.17g},{r.outcome:.17g}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path, spec: ScenarioSpec | None = None) -> "PanelDataset":
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        with open(path) as fh:
            header = fh.readline().strip()
        if header != "unit,time,group,post,x,y":
            raise ValueError(f"unexpected CSV header: {header!r}")
        ints = raw[:, :4].astype(np.int64)
        order = np.lexsort((ints[:, 1], ints[:, 0]))
        return cls(
            unit=ints[order, 0],
            time=ints[order, 1],
            group=ints[order, 2],
            post=ints[order, 3],
            x=raw[order, 4].copy(),
            y=raw[order, 5].copy(),
            spec=spec,
        )


def f_time(t):
    """Common time trend ``(t - 2.5)^2 / 10``."""
    return (np.asarray(t, dtype=float) - 2.5) ** 2 / 10.0


def g_interaction(x, t):
    """Covariate-by-time interaction ``x * t / 10``."""
    return np.asarray(x, dtype=float) * np.asarray(t, dtype=float) / 10.0


def baseline_covariate_params(group, scenario: Scenario | str | None = None) -> tuple:
    """Mean and sd of the baseline covariate for ``group``.

    Scenario 3 draws the covariate from N(1, 1) in both groups; every other
    scenario uses mean = sd = 1.5 - 0.5 * group.
    """
    if scenario is not None and Scenario(scenario) is Scenario.S3:
        ones = np.ones_like(np.asarray(group, dtype=float))
        return ones, ones
    m = 1.5 - 0.5 * np.asarray(group, dtype=float)
    return m, m


def covariate_path(spec: ScenarioSpec, group, x1, z_draws, t, counterfactual_untreated=False):
    """Covariate value at time ``t``.

    ``z_draws`` holds one z value per time (index ``t - 1``); the entry for
    t=1 is ignored. The path is anchored at ``x1`` rather than recursive.
    ``counterfactual_untreated`` switches off the post-treatment decrement of
    scenario 6, giving the covariate the treated group would have had untreated.
    """
    scen = spec.scenario_id
    x1 = np.asarray(x1, dtype=float)
    if not scen.time_varying:
        return x1
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > spec.n_times):
        raise ValueError("t outside [1, n_times]")
    z = np.asarray(z_draws, dtype=float)
    z_t = np.take(z, t - 1, axis=-1) if z.ndim else z
    step = (t - 1) / 10.0 * z_t
    group = np.asarray(group, dtype=float)
    if scen is Scenario.S4:
        return x1 + step
    if scen is Scenario.S5:
        return x1 + (2.0 * group - 1.0) * step
    if scen is Scenario.S6:
        path = x1 + step
        if not counterfactual_untreated:
            t0 = spec.first_post_time
            path = path - group * (t >= t0) * (t - t0 + 1) / 20.0
        return path
    raise ValueError(f"unknown scenario {scen!r}")


def outcome_mean(spec: ScenarioSpec, group, post, x, t):
    """Systematic part of the outcome (no intercepts or errors).

    For the toy scenario ``t`` is the period index 0 or 1.
    """
    scen = spec.scenario_id
    a = np.asarray(group, dtype=float)
    p = np.asarray(post, dtype=float)
    x = np.asarray(x, dtype=float)
    effect = spec.gamma * a * p
    if scen is Scenario.TOY:
        tt = np.asarray(t, dtype=int)
        zeta = np.asarray(TOY_PARAMS["zeta"])[tt]
        lam = np.asarray(TOY_PARAMS["lambda"])[tt]
        return TOY_PARAMS["alpha0"] + TOY_PARAMS["alpha1"] * a + zeta + lam * x + effect
    base = 1.0 + a + effect + f_time(t)
    if scen is Scenario.S1:
        return base + x
    if scen in (Scenario.S2, Scenario.S3):
        return base + x + g_interaction(x, t)
    if scen.time_varying:
        if spec.outcome_process is OutcomeProcess.CONSTANT:
            return base + x
        return base + g_interaction(x, t)
    raise ValueError(f"unknown scenario {scen!r}")


def replicate_rng(master_seed: int, scenario, process, replicate_index: int) -> np.random.Generator:
    """Independent stream for one replicate of one scenario-process cell."""
    scen = Scenario(scenario)
    proc_code = 0 if process is None else OutcomeProcess(process).code
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, scen.code, proc_code, int(replicate_index)])
    return np.random.Generator(np.random.PCG64(ss))


def generate(spec: ScenarioSpec, noise: NoiseSwitches | None = None, rng: np.random.Generator | None = None) -> PanelDataset:
    """Draw one balanced panel.

    Draws are taken in a fixed order: group assignment, unit intercepts,
    baseline covariates, z increments (unit-major, times 2..T), outcome errors
    (unit-major). Every draw happens whatever the noise level so that streams
    stay aligned across noise settings.
    """
    if noise is None:
        noise = NoiseSwitches()
    if spec.n_units < 2 or spec.n_times < 2:
        raise ValueError("generate needs n_units >= 2 and n_times >= 2")
    if rng is None:
        rng = replicate_rng(spec.master_seed, spec.scenario_id, spec.outcome_process, spec.replicate_index)
    n, T = spec.n_units, spec.n_times

    group = (rng.random(n) < spec.treat_prob).astype(np.int64)
    n_treated = int(group.sum())
    if n_treated == 0 or n_treated == n:
        raise ValueError("treatment assignment left one group empty")
    u = noise.unit_intercept_sd * rng.standard_normal(n)
    x_std = rng.standard_normal(n)
    z = np.ones((n, T))
    z[:, 1:] += noise.covariate_noise_sd * rng.standard_normal((n, T - 1))
    err = noise.outcome_error_sd * rng.standard_normal((n, T))

    times = np.arange(1, T + 1)
    post = (times >= spec.first_post_time).astype(np.int64)
    a_col = group[:, None]
    if spec.scenario_id is Scenario.TOY:
        tau = np.asarray(TOY_PARAMS["tau"])[group]
        x1 = tau + noise.toy_covariate_sd * x_std
        X = np.repeat(x1[:, None], T, axis=1)
        # toy periods are labelled 0, 1, ... in the outcome model
        mean = outcome_mean(spec, a_col, post[None, :], X, times[None, :] - 1)
    else:
        m, sd = baseline_covariate_params(group, spec.scenario_id)
        x1 = m + noise.baseline_covariate_sd_scale * sd * x_std
        X = covariate_path(spec, a_col, x1[:, None], z, times)
        X = np.broadcast_to(X, (n, T)).astype(float)
        mean = outcome_mean(spec, a_col, post[None, :], X, times[None, :])
    Y = mean + u[:, None] + err

    unit = np.repeat(np.arange(1, n + 1), T)
    return PanelDataset(
        unit=unit,
        time=np.tile(times, n),
        group=np.repeat(group, T),
        post=np.tile(post, n),
        x=np.ascontiguousarray(X).ravel(),
        y=Y.ravel(),
        spec=spec,
    )
