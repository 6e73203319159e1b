import numpy as np

from didlab.dgp import PanelDataset


def panel_from_wide(groups, x, y, first_post_time, times=None):
    """Balanced panel from unit-by-time arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, T = y.shape
    times = np.arange(1, T + 1) if times is None else np.asarray(times)
    time = np.tile(times, n)
    return PanelDataset(
        unit=np.repeat(np.arange(1, n + 1), T),
        time=time,
        group=np.repeat(np.asarray(groups, dtype=int), T),
        post=(time >= first_post_time).astype(int),
        x=x.ravel(),
        y=y.ravel(),
    )


def brute_force_cr(X, e, clusters, small_sample=True):
    X = np.asarray(X, dtype=float)
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((X.shape[1], X.shape[1]))
    levels = sorted(set(np.asarray(clusters).tolist()))
    for g in levels:
        rows = [i for i, c in enumerate(clusters) if c == g]
        s = np.zeros(X.shape[1])
        for i in rows:
            s += X[i] * e[i]
        meat += np.outer(s, s)
    V = bread @ meat @ bread
    if small_sample:
        G, (N, K) = len(levels), X.shape
        V *= G / (G - 1) * (N - 1) / (N - K)
    return V
