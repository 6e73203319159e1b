"""Compare the compiled and pure-Python kernel backends.

Sizes default to one replicate at full scale: 400 treated against 400
comparison units on 5 pre-period features, and an 8000 x 22 design with
800 clusters.

    python benchmarks/bench_kernels.py --repeat 20
"""

import argparse
import timeit

import numpy as np

from didlab import kernels


def cases(n_units, n_features, n_rows, n_cols, n_clusters, seed=0):
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(n_units // 2, n_features))
    C = rng.normal(size=(n_units // 2, n_features))
    X = rng.normal(size=(n_rows, n_cols))
    e = rng.normal(size=n_rows)
    codes = np.repeat(np.arange(n_clusters, dtype=np.int64), n_rows // n_clusters)
    return {
        "greedy_match (replace)": lambda m: m.greedy_match_core(T, C, True),
        "greedy_match (no replace)": lambda m: m.greedy_match_core(T, C, False),
        "cluster_score_sums": lambda m: m.cluster_score_sums(X, e, codes, n_clusters),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeat", type=int, default=10)
    parser.add_argument("--n-units", type=int, default=800)
    parser.add_argument("--features", type=int, default=5)
    parser.add_argument("--rows", type=int, default=8000)
    parser.add_argument("--cols", type=int, default=22)
    parser.add_argument("--clusters", type=int, default=800)
    args = parser.parse_args(argv)

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled backend not built; only the python fallback is timed")
    print(f"{'kernel':<28}" + "".join(f"{name:>14}" for name in impls) + ("     speedup" if len(impls) > 1 else ""))
    for label, fn in cases(args.n_units, args.features, args.rows, args.cols, args.clusters).items():
        best = {}
        for name, mod in impls.items():
            fn(mod)  # warm up
            best[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{label:<28}" + "".join(f"{best[n] * 1e3:>11.3f} ms" for n in impls)
        if "cython" in best:
            row += f"{best['python'] / best['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
