"""Wall-clock comparison of the compiled and NumPy stepping loops.

    python benchmarks/bench_imex.py [--sizes 32 64 128] [--steps 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from attractor_lab.hull import HullPoint, NamedPiecewise
from attractor_lab.kernels import backends
from attractor_lab.parabolic import Grid, LinearCoefficientSpec, PurePower, evolve, principal_eigenpair


def bench(n: int, steps: int, repeat: int, dt: float = 0.01) -> dict:
    grid = Grid(n)
    coeff = LinearCoefficientSpec(principal_eigenpair(grid)[0], HullPoint(NamedPiecewise("p1"), -50.0))
    g = PurePower(1.0, 3.0)
    z0 = np.linspace(0.5, 1.5, grid.n_nodes)
    t = steps * dt
    out, finals = {}, {}
    for name in backends():
        best = float("inf")
        for _ in range(repeat):
            t0 = time.perf_counter()
            finals[name] = evolve(coeff, g, grid, z0, t, dt, backend=name).values
            best = min(best, time.perf_counter() - t0)
        out[name] = best
    if len(finals) == 2:
        out["max_diff"] = float(np.max(np.abs(finals["cython"] - finals["python"])))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    names = list(backends())
    print(f"{'n':>5} " + " ".join(f"{k + ' [s]':>12}" for k in names) + f" {'speedup':>8} {'max diff':>9}")
    for n in args.sizes:
        r = bench(n, args.steps, args.repeat)
        speed = r["python"] / r["cython"] if "cython" in r else float("nan")
        diff = r.get("max_diff", float("nan"))
        print(f"{n:>5} " + " ".join(f"{r[k]:>12.4f}" for k in names) + f" {speed:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
