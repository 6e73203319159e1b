import numpy as np
import pytest

from didlab import _kernels_py, kernels


def test_backend_selection():
    assert kernels.BACKEND in kernels.backends()
    assert "python" in kernels.backends()


@pytest.mark.parametrize("replace", [True, False])
def test_greedy_core_backends_agree(replace):
    rng = np.random.default_rng(4)
    impls = kernels.backends()
    for _ in range(20):
        nt, nc, k = rng.integers(1, 40), rng.integers(1, 40), rng.integers(1, 6)
        T = rng.integers(0, 3, size=(nt, k)).astype(float)
        C = rng.integers(0, 3, size=(nc, k)).astype(float)
        ref = _kernels_py.greedy_match_core(T, C, replace)
        for impl in impls.values():
            idx, dist = impl.greedy_match_core(T, C, replace)
            np.testing.assert_array_equal(idx, ref[0])
            np.testing.assert_allclose(dist, ref[1], rtol=0, atol=1e-12)


def test_greedy_core_ties_to_lowest_index(backend):
    T = np.array([[0.0]])
    C = np.array([[1.0], [-1.0], [1.0]])
    idx, dist = backend.greedy_match_core(T, C, False)
    assert idx.tolist() == [0] and dist.tolist() == [1.0]


def test_greedy_core_runs_out(backend):
    idx, _ = backend.greedy_match_core(np.zeros((3, 1)), np.zeros((1, 1)), False)
    assert idx.tolist() == [0, -1, -1]


def test_cluster_sums_backends_agree(backend):
    rng = np.random.default_rng(9)
    X = rng.normal(size=(200, 7))
    e = rng.normal(size=200)
    codes = rng.integers(0, 25, size=200).astype(np.int64)
    out = backend.cluster_score_sums(X, e, codes, 25)
    ref = np.zeros((25, 7))
    np.add.at(ref, codes, X * e[:, None])
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


@pytest.mark.skipif("cython" not in kernels.backends(), reason="compiled backend not built")
def test_pipeline_backends_agree():
    import os
    import subprocess
    import sys

    cmd = [sys.executable, "-m", "didlab.cli", "run", "--scenario", "s3", "--reps", "3", "--n-units", "100", "--method", "all"]
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, DIDLAB_PURE_PYTHON=flag)
        out[flag] = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True).stdout.splitlines()
    assert out["0"][0] == out["1"][0]
    for a, b in zip(out["0"][1:], out["1"][1:]):
        ra, rb = a.split(","), b.split(",")
        assert ra[:5] == rb[:5]
        np.testing.assert_allclose(np.array(ra[5:], float), np.array(rb[5:], float), rtol=1e-10)
