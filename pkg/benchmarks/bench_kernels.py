"""Time the compiled and numpy stencil kernels on the same inputs.

    python benchmarks/bench_kernels.py [--sizes 64 128 256] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from hypslab import _kernels_py
from hypslab.hgeom import build_grid
from hypslab.target import poincare_disk_target

try:
    from hypslab import _kernels_cy
except ImportError:
    _kernels_cy = None


def inputs(n: int, seed: int = 0):
    g = build_grid(n, n, 8.0)
    rng = np.random.default_rng(seed)
    w = 0.3 * (rng.random(g.shape) + 1j * rng.random(g.shape))
    b = w[-1].copy()
    t = poincare_disk_target()
    lap = (w, b, g.cr, g.cb, g.ct, g.vol)
    ten = (w, b, t.rho2(w), t.rho2(b), t.christoffel(w).conj(), g.cr, g.cb, g.ct, g.vol)
    return lap, ten


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = [("python", _kernels_py)] + ([("cython", _kernels_cy)] if _kernels_cy else [])
    print(f"{'kernel':<10}{'n':>6}" + "".join(f"{name + ' ms':>14}" for name, _ in backends)
          + f"{'max diff':>12}")
    for n in args.sizes:
        lap, ten = inputs(n)
        for kname, a in (("laplacian", lap), ("tension", ten)):
            times, outs = [], []
            for _, mod in backends:
                fn = getattr(mod, kname)
                outs.append(fn(*a))
                times.append(min(timeit.repeat(lambda: fn(*a), number=1, repeat=args.repeat)) * 1e3)
            diff = max(float(np.max(np.abs(o - outs[0]))) for o in outs)
            print(f"{kname:<10}{n:>6}" + "".join(f"{t:>14.3f}" for t in times) + f"{diff:>12.2e}")


if __name__ == "__main__":
    main()
