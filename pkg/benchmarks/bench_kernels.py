"""Time the numba and numpy kernel backends on stage-sized problems.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each case is run once per backend to warm the JIT, checked for agreement,
then timed as the best of ``--repeat`` runs.
"""
import argparse
import platform
import timeit

import numpy as np

from bayal import kernels


def make_case(M, p, n_base, n_cand, seed=0):
    rng = np.random.default_rng(seed)
    betas = np.column_stack([rng.normal(size=M), rng.gamma(2.0, 1.0, size=(M, p))])
    r = rng.dirichlet(np.ones(M))
    aug = lambda n: np.column_stack([np.ones(n), rng.normal(size=(n, p))])
    return betas, r, aug(n_base), aug(n_cand), rng.integers(0, 2, n_base).astype(float)


CASES = {
    # synthetic pool: p = 2, M = 1000 prior draws, k_n up to 8 candidates
    "phi1 p=2 M=1000 n=20 k=8": lambda b, r, X, C, y: kernels.phi1_scores(b, r, X, C),
    "loglik p=2 M=1000 n=20": lambda b, r, X, C, y: kernels.loglik(b, X, y),
    "logdet_info p=2 M=1000 n=20": lambda b, r, X, C, y: kernels.logdet_info(b, X),
}
WIDE = {
    # WDBC-sized stage: p = 30 and a rank-deficient labeled set
    "phi1 p=30 M=1000 n=20 k=120": lambda b, r, X, C, y: kernels.phi1_scores(b, r, X, C),
}


def bench(cases, data, repeat):
    rows = []
    for name, fn in cases.items():
        times, outs = {}, {}
        for backend in ("numba", "numpy"):
            if backend == "numba" and not kernels.NUMBA_AVAILABLE:
                continue
            kernels.set_backend(backend)
            outs[backend] = fn(*data)  # warm-up / JIT compile
            times[backend] = min(timeit.repeat(lambda: fn(*data), number=1, repeat=repeat))
        if len(outs) == 2:
            a, b = (np.asarray(o, dtype=float) for o in outs.values())
            fin = np.isfinite(a)
            assert np.array_equal(fin, np.isfinite(b)) and np.allclose(a[fin], b[fin], rtol=1e-8)
        rows.append((name, times))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    original = kernels.get_backend()
    print(f"python {platform.python_version()}, numpy {np.__version__}, numba available: {kernels.NUMBA_AVAILABLE}")
    rows = bench(CASES, make_case(1000, 2, 20, 8), args.repeat)
    rows += bench(WIDE, make_case(1000, 30, 20, 120), max(1, args.repeat // 2))
    kernels.set_backend(original)
    print(f"{'case':34s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, t in rows:
        nb, npy = t.get("numba"), t["numpy"]
        sp = f"{npy / nb:8.1f}" if nb else "     n/a"
        print(f"{name:34s} {1e3 * nb if nb else float('nan'):11.2f} {1e3 * npy:11.2f} {sp}")


if __name__ == "__main__":
    main()
