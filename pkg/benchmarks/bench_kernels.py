"""Time the hot kernels under both backends.

    python benchmarks/bench_kernels.py [--sizes 50 250 500] [--repeat 5]

Each kernel is called once per backend before timing so numba compilation
is excluded.  Reported numbers are the best of ``--repeat`` runs.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fwdegd import _kernels
from fwdegd.grid import Grid1D, uniform_density
from fwdegd.hjb import HjbParams
from fwdegd.utility import UtilitySpec, eval_utility_1d


def cases(n: int):
    grid = Grid1D(n)
    mu = uniform_density(grid).masses
    u = eval_utility_1d(UtilitySpec("resource"), grid, uniform_density(grid))
    lam = np.full(n, 1.0 / n)
    p = HjbParams(epsilon=0.375)
    w = (p.delta / (p.delta + 1.0)) * u
    phi = u.copy()
    return {
        "pairwise_rhs": lambda k: k.pairwise_rhs(mu, phi, 0.1, lam),
        "quadratic_solve": lambda k: k.quadratic_solve(u, lam, p.delta, p.epsilon, p.chi, p.xi, p.relax,
                                                       p.phi_relax, p.tol, p.max_iter, p.eta_init),
        "logit_eta": lambda k: k.logit_eta(w, p.epsilon, grid.cell_area, p.relax, p.tol, p.max_iter, p.eta_init),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 250, 500])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    before = _kernels.BACKEND

    print(f"{'kernel':<16} {'N':>5} " + " ".join(f"{b + ' ms':>12}" for b in backends) + "   speedup")
    try:
        for n in args.sizes:
            for name, call in cases(n).items():
                times = []
                for b in backends:
                    _kernels.use_backend(b)
                    call(_kernels)  # warm up (jit compile)
                    loops = 1
                    while timeit.timeit(lambda: call(_kernels), number=loops) < 0.05:
                        loops *= 2
                    best = min(timeit.repeat(lambda: call(_kernels), number=loops, repeat=args.repeat))
                    times.append(1e3 * best / loops)
                speed = f"{times[0] / times[1]:8.1f}x" if len(times) == 2 else ""
                print(f"{name:<16} {n:>5} " + " ".join(f"{t:12.3f}" for t in times) + f"   {speed}")
    finally:
        _kernels.use_backend(before)


if __name__ == "__main__":
    main()
