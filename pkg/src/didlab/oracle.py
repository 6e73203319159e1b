"""Closed-form ground truth.

Two-period confounding algebra (how a covariate breaks parallel trends and
what the unadjusted and adjusted estimators converge to), the counterfactual
group-time mean tables for scenario 6, and the true ATT of every scenario.

Nothing here calls into :mod:`didlab.dgp`; these formulas are written out
independently so they can serve as a check on the generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from didlab.dgp import OutcomeProcess, Scenario

__all__ = [
    "TwoPeriodParams",
    "MeanTable",
    "pt_divergence",
    "pt_divergence_time_invariant",
    "att_true_two_period",
    "att_unadjusted_two_period",
    "att_adjusted_two_period",
    "expected_means_scenario6",
    "true_att",
]

ARMS = ("treated_untreated", "treated_treated", "comparison")


@dataclass(frozen=True)
class TwoPeriodParams:
    """Coefficients and covariate means of the two-period model.

    ``tau_at`` is the observed mean of the covariate in group ``a`` at time
    ``t``; ``tau1_cf_treated`` / ``tau1_cf_untreated`` are the treated group's
    post-period means with and without treatment.
    """

    gamma: float = 0.0
    lambda0: float = 0.0
    lambda1: float = 0.0
    tau00: float = 0.0
    tau01: float = 0.0
    tau10: float = 0.0
    tau11: float = 0.0
    tau1_cf_treated: float = 0.0
    tau1_cf_untreated: float = 0.0


def pt_divergence(params: TwoPeriodParams) -> float:
    """Differential change in untreated outcomes, treated minus comparison."""
    p = params
    return p.lambda1 * (p.tau11 - p.tau01) - p.lambda0 * (p.tau10 - p.tau00)


def pt_divergence_time_invariant(lambda0, lambda1, tau0, tau1) -> float:
    return (lambda1 - lambda0) * (tau1 - tau0)


def att_true_two_period(params: TwoPeriodParams) -> float:
    return params.gamma + params.lambda1 * (params.tau1_cf_treated - params.tau1_cf_untreated)


def att_unadjusted_two_period(params: TwoPeriodParams) -> float:
    """Limit of the raw two-by-two difference in differences."""
    return params.gamma + pt_divergence(params)


def att_adjusted_two_period(params: TwoPeriodParams) -> float:
    """Limit of the correctly specified covariate-adjusted regression.

    The regression recovers the direct effect only, so this is ``gamma``
    regardless of how treatment moves the covariate.
    """
    return params.gamma


@dataclass(frozen=True)
class MeanTable:
    """Group-time means, one row per arm, one column per time.

    Arms are the treated group without treatment, the treated group with
    treatment, and the comparison group.
    """

    times: np.ndarray
    first_post_time: int
    covariate: dict
    outcome: dict

    def _averages(self, row: np.ndarray) -> tuple:
        pre = self.times < self.first_post_time
        return float(row[pre].mean()), float(row[~pre].mean())

    def avg_pre(self, quantity: str, arm: str) -> float:
        return self._averages(getattr(self, quantity)[arm])[0]

    def avg_post(self, quantity: str, arm: str) -> float:
        return self._averages(getattr(self, quantity)[arm])[1]

    def to_csv(self, path=None) -> str:
        cols = ",".join(f"t{t}" for t in self.times)
        lines = [f"quantity,arm,{cols},avg_pre,avg_post"]
        for quantity in ("covariate", "outcome"):
            for arm in ARMS:
                row = getattr(self, quantity)[arm]
                pre, post = self._averages(row)
                vals = ",".join(f"{v:.17g}" for v in row)
                lines.append(f"{quantity},{arm},{vals},{pre:.17g},{post:.17g}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def expected_means_scenario6(process, n_times: int = 10, first_post_time: int = 6, gamma: float = 1.0) -> MeanTable:
    """Noise-free group-time means for scenario 6.

    The covariate starts at its group mean (1 treated, 1.5 comparison), rises
    by a tenth per period, and in the treated group falls by a further
    twentieth per post period under treatment.
    """
    process = OutcomeProcess(process)
    t = np.arange(1, n_times + 1, dtype=float)
    post = (t >= first_post_time).astype(float)
    drift = (t - 1) / 10
    drop = post * (t - first_post_time + 1) / 20

    x_untreated = 1.0 + drift
    x_treated = 1.0 + drift - drop
    x_comparison = 1.5 + drift
    trend = (t - 2.5) ** 2 / 10

    def y(x, trt, treated):
        if process is OutcomeProcess.CONSTANT:
            cov_term = x
        else:
            cov_term = x * t / 10
        return 1 + cov_term + trt + gamma * treated + trend

    return MeanTable(
        times=t.astype(int),
        first_post_time=first_post_time,
        covariate={
            "treated_untreated": x_untreated,
            "treated_treated": x_treated,
            "comparison": x_comparison,
        },
        outcome={
            "treated_untreated": y(x_untreated, 1.0, 0.0),
            "treated_treated": y(x_treated, 1.0, post),
            "comparison": y(x_comparison, 0.0, 0.0),
        },
    )


def true_att(scenario, process=None, gamma: float = 1.0, n_times: int = 10, first_post_time: int = 6) -> float:
    """ATT of a scenario: gamma except where treatment moves the covariate.

    In scenario 6 it is the average over post periods of the treated group's
    treated minus untreated mean outcome: gamma less the mediated covariate
    drop times its effect. Summed in exact rationals so 0.85 and 0.87 come
    out as the nearest floats. The toy example has no effect.
    """
    scenario = Scenario(scenario)
    if scenario is Scenario.TOY:
        return 0.0
    if scenario is not Scenario.S6:
        return float(gamma)
    process = OutcomeProcess(process)
    post = range(first_post_time, n_times + 1)
    mediated = Fraction(0)
    for t in post:
        effect = 1 if process is OutcomeProcess.CONSTANT else Fraction(t, 10)
        mediated += Fraction(t - first_post_time + 1, 20) * effect
    return float(Fraction(gamma) - mediated / len(post))
