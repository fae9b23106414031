"""Timing of the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel is called once untimed (JIT compilation, caches), then the best
of ``repeat`` runs is reported together with the max deviation between the
two results.
"""
import argparse
import time

import numpy as np

from mch_istx import kernels
from mch_istx.contour import legendre_matrix
from mch_istx.profiles import build_profile
from mch_istx.rhp import build_rhdata
from mch_istx.spectral import _k


def best_of(fn, repeat):
    fn()
    t = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        t.append(time.perf_counter() - t0)
    return min(t), out


def case_exp_recursion(n=200_000):
    rng = np.random.default_rng(1)
    decay = np.exp(-rng.uniform(0.01, 0.03, n))
    inc = rng.normal(size=n)
    return lambda b: kernels.exp_recursion(decay, inc, backend=b)


def case_jost(nlam=64):
    p = build_profile({"family": "tanh", "A1": 1, "A2": 2, "w": 2})
    lam = np.linspace(1.05, 8.0, nlam) + 0j
    k = _k(1.0, lam, 1)
    xs = np.array([0.0, 10.0])
    return lambda b: kernels.jost_batch(p.x, p.m_coef(), 1.0, lam, k, p.x[0], xs, backend=b)


def case_cauchy():
    p = build_profile({"family": "tanh", "A1": 1, "A2": 2, "w": 2})
    d = build_rhdata(p, y_max=5)
    arr = d.contour.arrays()
    q = d.contour.q
    L = legendre_matrix(q)
    return lambda b: kernels.cauchy_matrix(arr["base"], arr["pan"], arr["tloc"], arr, q, L,
                                           toff=arr["off"], backend=b)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'kernel':<16s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, make in [("exp_recursion", case_exp_recursion), ("jost_batch", case_jost),
                       ("cauchy_matrix", case_cauchy)]:
        fn = make()
        tn, a = best_of(lambda: fn("numba"), args.repeat)
        tp, b = best_of(lambda: fn("numpy"), args.repeat)
        diff = float(np.nanmax(np.abs(np.asarray(a) - np.asarray(b))))
        print(f"{name:<16s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
