"""Kernel backend selection.

Uses the compiled extension when it is importable, otherwise the numpy
fallback. ``DIDLAB_PURE_PYTHON=1`` forces the fallback.
"""

import os

from didlab import _kernels_py

BACKEND = "python"
if os.environ.get("DIDLAB_PURE_PYTHON") != "1":
    try:
        from didlab import _kernels as _compiled
    except ImportError:
        _compiled = None
    else:
        BACKEND = "cython"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _kernels_py

greedy_match_core = _impl.greedy_match_core
cluster_score_sums = _impl.cluster_score_sums


def backends():
    """Available implementations, keyed by name."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
