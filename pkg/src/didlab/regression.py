"""Difference-in-differences regressions on a panel.

Three specifications share the same core of intercept, group, post,
group-by-post and time dummies:

* ``SIMPLE``: the core only;
* ``CA``: core plus a covariate main effect;
* ``TVA``: core plus the covariate and its interaction with every time dummy.

The treatment effect estimate is the group-by-post coefficient, with a
cluster-robust (by unit) standard error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from didlab.dgp import PanelDataset
from didlab.kernels import cluster_score_sums

__all__ = [
    "ModelKind",
    "ModelSpec",
    "DesignMatrix",
    "FitResult",
    "EstimationError",
    "ALIAS_TOL",
    "build_design",
    "ols_fit",
    "cluster_robust_vcov",
    "extract_att",
    "fit_model",
]

ALIAS_TOL = 1e-10
ATT_LABEL = "a:p"


class EstimationError(ValueError):
    pass


class ModelKind(str, enum.Enum):
    SIMPLE = "simple"
    CA = "ca"
    TVA = "tva"


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind = ModelKind.SIMPLE
    matched: bool = False
    time_reference: int | None = None  # defaults to the first time level

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))


@dataclass(frozen=True)
class DesignMatrix:
    """Retained design columns plus a record of what was aliased away."""

    labels: list
    values: np.ndarray
    dropped: list
    nominal_labels: list

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]


@dataclass
class FitResult:
    labels: list
    coef: np.ndarray
    resid: np.ndarray
    df_resid: int
    dropped: list
    xtx_inv: np.ndarray
    method: str = ""
    vcov: np.ndarray | None = None
    n_clusters: int | None = None
    small_sample: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.resid)

    @property
    def k(self) -> int:
        return len(self.coef)

    @property
    def att_hat(self) -> float:
        if ATT_LABEL not in self.labels:
            raise EstimationError("a:p coefficient is not in the fit")
        return float(self.coef[self.labels.index(ATT_LABEL)])

    @property
    def se_att(self) -> float | None:
        if self.vcov is None:
            return None
        j = self.labels.index(ATT_LABEL)
        return float(np.sqrt(max(self.vcov[j, j], 0.0)))

    def coefficients(self) -> dict:
        return dict(zip(self.labels, map(float, self.coef)))

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "coefficients": [{"label": lab, "estimate": float(b)} for lab, b in zip(self.labels, self.coef)],
            "dropped": list(self.dropped),
            "att": {"estimate": self.att_hat, "se": self.se_att},
            "n": self.n,
            "k": self.k,
            "g": self.n_clusters,
        }


def _nominal_columns(data: PanelDataset, model: ModelSpec):
    a = data.group.astype(float)
    p = data.post.astype(float)
    t = data.time
    levels = np.unique(t)
    if len(levels) < 2:
        raise EstimationError("need at least 2 time levels")
    ref = levels[0] if model.time_reference is None else model.time_reference
    if ref not in levels:
        raise EstimationError(f"time reference {ref} is not a time level")
    others = [lev for lev in levels if lev != ref]

    cols = [("1", np.ones(len(a))), ("a", a), ("p", p), (ATT_LABEL, a * p)]
    dummies = [(f"t{lev}", (t == lev).astype(float)) for lev in others]
    cols += dummies
    if model.kind in (ModelKind.CA, ModelKind.TVA):
        x = np.asarray(data.x, dtype=float)
        cols.append(("x", x))
        if model.kind is ModelKind.TVA:
            cols += [(f"x:{lab}", x * d) for lab, d in dummies]
    return cols


def _elimination_order(labels: list) -> list:
    # a:p first so it is never the aliased one; p last so it absorbs any
    # collinearity with the time dummies
    head = [labels.index("1"), labels.index(ATT_LABEL), labels.index("a")]
    tail = [labels.index("p")]
    middle = [i for i in range(len(labels)) if i not in head and i not in tail]
    return head + middle + tail


def build_design(data: PanelDataset, model: ModelSpec) -> DesignMatrix:
    """Assemble the design and drop exactly collinear columns.

    Columns are screened in a fixed priority order (intercept, a:p, a, time
    dummies, covariate terms, then p) with a QR factorization; a column whose
    diagonal pivot falls below ``ALIAS_TOL`` times the largest is aliased.
    With a full set of time dummies p is therefore always the column dropped.
    """
    cols = _nominal_columns(data, model)
    labels = [lab for lab, _ in cols]
    M = np.column_stack([v for _, v in cols])
    n_rows, n_cols = M.shape
    # p is always a combination of the time dummies, so at most n_cols - 1 survive
    if n_rows < n_cols - 1:
        raise EstimationError(f"underdetermined: {n_rows} rows for {n_cols - 1} estimable columns")
    order = _elimination_order(labels)
    ordered = M[:, order]
    if n_rows < n_cols:
        # zero rows leave the column dependencies unchanged
        ordered = np.vstack([ordered, np.zeros((n_cols - n_rows, n_cols))])
    r = np.linalg.qr(ordered, mode="r")
    diag = np.abs(np.diag(r))
    keep_sorted = diag > ALIAS_TOL * diag.max()
    if not keep_sorted[1]:
        raise EstimationError("a:p is aliased with other design columns; the effect is not estimable")
    kept = sorted(order[i] for i in range(len(order)) if keep_sorted[i])
    dropped = [labels[order[i]] for i in range(len(order)) if not keep_sorted[i]]
    dropped.sort(key=labels.index)
    return DesignMatrix(
        labels=[labels[i] for i in kept],
        values=np.ascontiguousarray(M[:, kept]),
        dropped=dropped,
        nominal_labels=labels,
    )


def ols_fit(X: DesignMatrix, y, method: str = "") -> FitResult:
    """Least squares through a column-pivoted QR.

    Any further column whose pivot is below ``ALIAS_TOL`` of the largest is
    dropped and recorded; the fit is then solved on the remaining columns.
    """
    y = np.asarray(y, dtype=float)
    A = X.values
    if A.shape[0] != len(y):
        raise EstimationError(f"design has {A.shape[0]} rows but y has {len(y)}")
    if A.shape[1] == 0:
        raise EstimationError("design has no columns")
    q, r, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > ALIAS_TOL * diag[0])) if diag[0] > 0 else 0
    if rank == 0:
        raise EstimationError("design has no non-degenerate column")
    keep_piv = piv[:rank]
    keep = np.sort(keep_piv)
    labels = [X.labels[i] for i in keep]
    newly_dropped = [X.labels[i] for i in sorted(piv[rank:])]

    r1 = r[:rank, :rank]
    beta_piv = scipy.linalg.solve_triangular(r1, q[:, :rank].T @ y)
    rinv = scipy.linalg.solve_triangular(r1, np.eye(rank))
    xtx_inv_piv = rinv @ rinv.T
    # back to ascending column order
    pos = np.argsort(keep_piv)
    coef = beta_piv[pos]
    xtx_inv = xtx_inv_piv[np.ix_(pos, pos)]
    resid = y - A[:, keep] @ coef
    dropped = list(X.dropped) + newly_dropped
    dropped.sort(key=lambda lab: X.nominal_labels.index(lab) if lab in X.nominal_labels else len(X.nominal_labels))
    return FitResult(
        labels=labels,
        coef=coef,
        resid=resid,
        df_resid=len(y) - rank,
        dropped=dropped,
        xtx_inv=xtx_inv,
        method=method,
        extra={"columns": keep},
    )


def cluster_robust_vcov(fit: FitResult, X: DesignMatrix, cluster_ids, small_sample: bool = True) -> np.ndarray:
    """Sandwich covariance clustered on ``cluster_ids``.

    ``small_sample=True`` applies the CR1 factor
    ``G/(G-1) * (N-1)/(N-K)``; ``False`` gives the plain CR0 sandwich.
    """
    cluster_ids = np.asarray(cluster_ids)
    n, k = fit.n, fit.k
    if len(cluster_ids) != n:
        raise EstimationError("one cluster id per row is required")
    _, codes = np.unique(cluster_ids, return_inverse=True)
    n_clusters = int(codes.max()) + 1
    if n_clusters < 2:
        raise EstimationError("need at least 2 clusters")
    if k >= n:
        raise EstimationError("need more rows than coefficients")
    cols = fit.extra.get("columns")
    if cols is None:
        cols = [X.labels.index(lab) for lab in fit.labels]
    A = np.ascontiguousarray(X.values[:, cols])
    scores = cluster_score_sums(A, np.ascontiguousarray(fit.resid), codes.astype(np.int64), n_clusters)
    meat = scores.T @ scores
    vcov = fit.xtx_inv @ meat @ fit.xtx_inv
    if small_sample:
        vcov *= (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - k))
    return vcov


def extract_att(fit: FitResult) -> tuple:
    if ATT_LABEL not in fit.labels:
        raise EstimationError("a:p was aliased away")
    if fit.vcov is None:
        raise EstimationError("fit has no covariance; call cluster_robust_vcov first")
    return fit.att_hat, fit.se_att


def fit_model(data: PanelDataset, model: ModelSpec | ModelKind | str, small_sample: bool = True, method: str | None = None) -> FitResult:
    """Build, solve and attach the unit-clustered covariance in one call."""
    if not isinstance(model, ModelSpec):
        model = ModelSpec(model)
    X = build_design(data, model)
    fit = ols_fit(X, data.y, method=method or model.kind.value)
    vcov = cluster_robust_vcov(fit, X, data.cluster, small_sample=small_sample)
    _, codes = np.unique(data.cluster, return_inverse=True)
    return replace(fit, vcov=vcov, n_clusters=int(codes.max()) + 1, small_sample=small_sample)
