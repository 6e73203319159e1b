"""Pure-Python/numpy versions of the compiled kernels.

Same signatures and results as ``didlab._kernels``; used when the extension
is not built or ``DIDLAB_PURE_PYTHON=1`` is set.
"""

import numpy as np


def greedy_match_core(treated, comparison, replace):
    treated = np.asarray(treated, dtype=float)
    comparison = np.asarray(comparison, dtype=float)
    n_t = treated.shape[0]
    if replace:
        sq = ((treated[:, None, :] - comparison[None, :, :]) ** 2).sum(axis=2)
        best = np.argmin(sq, axis=1).astype(np.int64)  # first minimum, so ties go to the lowest index
        return best, np.sqrt(sq[np.arange(n_t), best])
    idx = np.full(n_t, -1, dtype=np.int64)
    dist = np.full(n_t, np.nan)
    available = np.ones(comparison.shape[0], dtype=bool)
    for i in range(n_t):
        sq = ((comparison - treated[i]) ** 2).sum(axis=1)
        sq[~available] = np.inf
        if not np.isfinite(sq).any():
            continue
        best = int(np.argmin(sq))  # first minimum, so ties go to the lowest index
        idx[i] = best
        dist[i] = np.sqrt(sq[best])
        available[best] = False
    return idx, dist


def cluster_score_sums(X, resid, codes, n_clusters):
    scores = np.asarray(X, dtype=float) * np.asarray(resid, dtype=float)[:, None]
    out = np.zeros((n_clusters, scores.shape[1]))
    np.add.at(out, np.asarray(codes, dtype=np.int64), scores)
    return out
