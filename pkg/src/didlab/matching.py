"""Nearest-neighbour matching of treated to comparison units.

Units are matched 1:1 on one of three per-unit feature vectors built from
the pre-treatment periods: outcome levels, outcome first differences, or
covariate values. The matched panel keeps every period of each matched unit
and is then analysed with the simple regression.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from didlab.dgp import PanelDataset
from didlab.kernels import greedy_match_core

__all__ = [
    "MatchKind",
    "Distance",
    "MatchStrategy",
    "MatchResult",
    "MatchingError",
    "PropensitySeparationError",
    "feature_matrix",
    "propensity_log_odds",
    "greedy_match",
    "subset_panel",
    "match_panel",
]

SEPARATION_LOG_ODDS = 30.0


class MatchingError(ValueError):
    pass


class PropensitySeparationError(MatchingError):
    pass


class MatchKind(str, enum.Enum):
    PRE_OUTCOMES = "pre_outcomes"
    PRE_FIRST_DIFFS = "pre_first_diffs"
    PRE_COVARIATES = "pre_covariates"


class Distance(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    PROPENSITY_LOGIT = "propensity"


@dataclass(frozen=True)
class MatchStrategy:
    """What to match on and how.

    Matching is always 1:1. With ``replacement`` (the default) every treated
    unit takes its nearest comparison unit and comparison units may be reused;
    without it, units are matched greedily and each is used at most once.
    """

    kind: MatchKind = MatchKind.PRE_OUTCOMES
    distance: Distance = Distance.EUCLIDEAN
    replacement: bool = True
    ratio: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", MatchKind(self.kind))
        object.__setattr__(self, "distance", Distance(self.distance))
        if self.ratio != 1:
            raise ValueError("only 1:1 matching is supported")


@dataclass(frozen=True)
class MatchResult:
    treated_ids: np.ndarray
    comparison_ids: np.ndarray
    distances: np.ndarray
    unmatched: np.ndarray
    replacement: bool = True

    @property
    def pairs(self) -> list:
        return list(zip(self.treated_ids.tolist(), self.comparison_ids.tolist()))

    def __len__(self) -> int:
        return len(self.treated_ids)

    def to_csv(self, path=None) -> str:
        lines = ["treated_id,comparison_id,distance"]
        for t, c, d in zip(self.treated_ids, self.comparison_ids, self.distances):
            lines.append(f"{int(t)},{int(c)},{float(d):.17g}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _is_time_invariant(wide_x: np.ndarray) -> bool:
    return bool(np.all(wide_x == wide_x[:, :1]))


def feature_matrix(data: PanelDataset, strategy: MatchStrategy) -> tuple:
    """Per-unit matching features from the pre-treatment periods.

    Returns ``(unit_ids, groups, features)`` with one row per unit. The
    covariate features collapse to the single baseline value when the
    covariate does not change over time.
    """
    if not data.is_balanced():
        raise MatchingError("matching needs a balanced panel")
    n_pre = int(np.sum(data.times < data.first_post_time))
    if n_pre < 1:
        raise MatchingError("no pre-treatment periods")
    unit_ids = data.wide("unit")[:, 0]
    groups = data.wide("group")[:, 0]
    if strategy.kind is MatchKind.PRE_OUTCOMES:
        F = data.wide("y")[:, :n_pre]
    elif strategy.kind is MatchKind.PRE_FIRST_DIFFS:
        if n_pre < 2:
            raise MatchingError("first differences need at least 2 pre-treatment periods")
        F = np.diff(data.wide("y")[:, :n_pre], axis=1)
    else:
        X = data.wide("x")
        spec = data.spec
        if spec is not None:
            invariant = not spec.scenario_id.time_varying
        else:
            invariant = _is_time_invariant(X)
        F = X[:, :1] if invariant else X[:, :n_pre]
    return unit_ids, groups, np.ascontiguousarray(F, dtype=float)


def _standardize(F: np.ndarray) -> np.ndarray:
    sd = F.std(axis=0, ddof=1) if len(F) > 1 else np.ones(F.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return (F - F.mean(axis=0)) / sd


def propensity_log_odds(features, groups, max_iter: int = 50, tol: float = 1e-8) -> np.ndarray:
    """Fitted log-odds of treatment from a logistic regression by IRLS.

    Raises :class:`PropensitySeparationError` when any fitted log-odds exceeds
    30 in absolute value.
    """
    Z = np.column_stack([np.ones(len(groups)), _standardize(np.asarray(features, dtype=float))])
    a = np.asarray(groups, dtype=float)
    beta = np.zeros(Z.shape[1])
    eta = Z @ beta
    for _ in range(max_iter):
        prob = 1.0 / (1.0 + np.exp(-eta))
        w = prob * (1.0 - prob)
        hess = Z.T @ (Z * w[:, None])
        try:
            step = np.linalg.solve(hess, Z.T @ (a - prob))
        except np.linalg.LinAlgError as exc:
            raise PropensitySeparationError("singular logistic information matrix; use euclidean distance") from exc
        beta = beta + step
        new_eta = Z @ beta
        if np.max(np.abs(new_eta)) > SEPARATION_LOG_ODDS:
            raise PropensitySeparationError(
                "propensity model separates the groups (|log-odds| > 30); use euclidean distance"
            )
        change = np.max(np.abs(new_eta - eta))
        eta = new_eta
        if change < tol:
            break
    else:
        warnings.warn("propensity IRLS did not converge in %d iterations" % max_iter, RuntimeWarning)
    return eta


def greedy_match(features, groups, strategy: MatchStrategy, unit_ids=None) -> MatchResult:
    """Match every treated unit to a comparison unit.

    Features are standardized by their pooled sd (Euclidean mode) or replaced
    by propensity log-odds. Treated units are processed hardest first: in
    descending distance from the comparison centroid, ties by ascending id.
    Each takes the nearest comparison unit still available, ties by ascending
    id. Without replacement, treated units left over once comparisons run out
    are reported as unmatched.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    groups = np.asarray(groups).astype(int)
    if unit_ids is None:
        unit_ids = np.arange(len(groups))
    unit_ids = np.asarray(unit_ids)
    if not (len(F) == len(groups) == len(unit_ids)):
        raise MatchingError("features, groups and unit_ids must align")
    # canonical row order so float sums, and hence ties, do not depend on input order
    order = np.argsort(unit_ids, kind="stable")
    F, groups, unit_ids = F[order], groups[order], unit_ids[order]
    treated = np.flatnonzero(groups == 1)
    comparison = np.flatnonzero(groups == 0)
    if len(treated) == 0 or len(comparison) == 0:
        raise MatchingError("both groups must be non-empty")

    if strategy.distance is Distance.PROPENSITY_LOGIT:
        S = propensity_log_odds(F, groups)[:, None]
    else:
        S = _standardize(F)

    comparison = comparison[np.argsort(unit_ids[comparison], kind="stable")]
    centroid = S[comparison].mean(axis=0)
    hardness = np.sqrt(((S[treated] - centroid) ** 2).sum(axis=1))
    treated = treated[np.lexsort((unit_ids[treated], -hardness))]

    idx, dist = greedy_match_core(
        np.ascontiguousarray(S[treated]), np.ascontiguousarray(S[comparison]), bool(strategy.replacement)
    )
    ok = idx >= 0
    return MatchResult(
        treated_ids=unit_ids[treated[ok]],
        comparison_ids=unit_ids[comparison[idx[ok]]],
        distances=dist[ok],
        unmatched=unit_ids[treated[~ok]],
        replacement=strategy.replacement,
    )


def subset_panel(data: PanelDataset, match: MatchResult) -> PanelDataset:
    """All periods of the matched units.

    A comparison unit used ``k`` times appears ``k`` times: the first copy
    keeps its id, later copies get fresh ids above the current maximum. The
    ``cluster`` column keeps the original id so reused units stay one cluster.
    """
    if len(match) == 0:
        raise MatchingError("empty match")
    unit_ids = data.wide("unit")[:, 0]
    counts = {}
    for uid in np.concatenate([match.treated_ids, match.comparison_ids]).tolist():
        counts[uid] = counts.get(uid, 0) + 1
    row_of = {int(u): i for i, u in enumerate(unit_ids)}
    missing = [u for u in counts if u not in row_of]
    if missing:
        raise MatchingError(f"matched units not in panel: {missing[:5]}")

    next_id = int(unit_ids.max()) + 1
    src_rows, new_ids = [], []
    for uid in sorted(counts):
        src_rows.append(row_of[uid])
        new_ids.append(uid)
    for uid in sorted(counts):
        for _ in range(counts[uid] - 1):
            src_rows.append(row_of[uid])
            new_ids.append(next_id)
            next_id += 1

    src = np.asarray(src_rows)
    T = data.n_times

    def pick(col):
        return data.wide(col)[src].ravel()

    return PanelDataset(
        unit=np.repeat(np.asarray(new_ids), T),
        time=pick("time"),
        group=pick("group"),
        post=pick("post"),
        x=pick("x"),
        y=pick("y"),
        spec=data.spec,
        cluster=np.repeat(unit_ids[src], T),
    )


def match_panel(data: PanelDataset, strategy: MatchStrategy) -> tuple:
    """Features, match and subset in one step; returns ``(subset, match)``."""
    unit_ids, groups, F = feature_matrix(data, strategy)
    match = greedy_match(F, groups, strategy, unit_ids)
    return subset_panel(data, match), match
