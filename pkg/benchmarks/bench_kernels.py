"""Compiled vs numpy kernels, per call and for a short reference run.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--horizon 1.0]

Each timing is the best of ``--repeat`` runs.  The full-run comparison swaps
the module-level kernel aliases, so everything above the kernels is shared.
"""
import argparse
import timeit
from pathlib import Path

import numpy as np

from fvtaxis import kernels
from fvtaxis.config import load
from fvtaxis.field import Grid, as3d
from fvtaxis.runner import simulate

KERNEL_NAMES = ("laplacian", "flux_update", "gradient_energy", "v_operator", "cg_v")
REFERENCE = Path(__file__).resolve().parents[1] / "configs" / "reference_2d.json"


def kernel_calls(mod, grid):
    rng = np.random.default_rng(0)
    u, w, out = (as3d(rng.random(grid.shape)) for _ in range(3))
    c = grid.inv_h2()

    def cg():
        x = u.copy()
        mod.cg_v(u, w, 1e-3, *c, x, 1e-10, 10_000)

    return {
        "laplacian": lambda: mod.laplacian(u, out, *c),
        "flux_update": lambda: mod.flux_update(u, w, 1e-5, *c, out),
        "gradient_energy": lambda: mod.gradient_energy(u, *c, grid.cell_volume),
        "v_operator": lambda: mod.v_operator(u, w, 1e-3, *c, out),
        "cg_v": cg,
    }


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def use(name):
    mod = kernels.load(name)
    for fn in KERNEL_NAMES:
        setattr(kernels, fn, getattr(mod, fn))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--horizon", type=float, default=1.0)
    args = ap.parse_args()
    backends = kernels.available()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy backend is available")
    grids = [Grid.uniform(2, 64, 4.0), Grid.uniform(2, 256, 4.0), Grid.uniform(3, 48, 1.0)]
    print(f"{'kernel':16s} {'grid':>12s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup")
    for g in grids:
        calls = {b: kernel_calls(kernels.load(b), g) for b in backends}
        for k in KERNEL_NAMES:
            number = 3 if k == "cg_v" else 50
            t = {b: best(calls[b][k], args.repeat, number) for b in backends}
            shape = "x".join(map(str, g.cells))
            row = f"{k:16s} {shape:>12s} " + " ".join(f"{t[b] * 1e6:10.1f}us" for b in backends)
            if len(backends) == 2:
                row += f"   {t['python'] / t['cython']:6.1f}x"
            print(row)

    cfg = load(REFERENCE).replace(T=args.horizon, dt_out=args.horizon / 10)
    print(f"\nreference run, 64x64, T={args.horizon:g}:")
    walls = {}
    for b in backends:
        use(b)
        walls[b] = best(lambda: simulate(cfg), max(1, args.repeat // 2), 1)
        print(f"  {b:8s} {walls[b]:8.3f} s")
    if len(backends) == 2:
        print(f"  speedup  {walls['python'] / walls['cython']:8.2f}x")


if __name__ == "__main__":
    main()
