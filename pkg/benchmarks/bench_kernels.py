"""Time the numba kernels against their numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Each pair is checked for agreement before timing.  Numba timings exclude
the first (compiling) call.
"""
import argparse
import json
import timeit

import numpy as np

from mublab import kernels


def _state(n, rng):
    psi = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return psi / np.linalg.norm(psi)


def cases(rng):
    for n in (10, 14, 18):
        psi = _state(n, rng)
        yield f"walsh_hadamard n={n}", kernels.walsh_hadamard_nb, kernels.walsh_hadamard_np, \
            lambda psi=psi: (psi.copy(),)
        thetas = rng.uniform(0, np.pi, n)
        yield f"rx_layer n={n}", kernels.rx_layer_nb, kernels.rx_layer_np, \
            lambda psi=psi, t=thetas: (psi.copy(), t)
        cost = rng.standard_normal(1 << n)
        g, b = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        yield f"qaoa_layers p=2 n={n}", kernels.qaoa_layers_nb, kernels.qaoa_layers_np, \
            lambda psi=psi, c=cost, g=g, b=b: (psi.copy(), c, g, b)
    for d, blocks in ((4, 5), (16, 17)):
        z = rng.standard_normal((20_000, blocks, d))
        yield f"centered_block_max d={d}", kernels.centered_block_max_nb, \
            kernels.centered_block_max_np, lambda z=z: (z,)
    z = rng.standard_normal((20_000, 16))
    f = rng.standard_normal((16, 20))
    yield "rowmax_matmul 16x20", kernels.rowmax_matmul_nb, kernels.rowmax_matmul_np, \
        lambda z=z, f=f: (z, f)


def run(repeat=5):
    rng = np.random.default_rng(0)
    rows = []
    for name, fast, slow, make in cases(rng):
        a, b = fast(*make()), slow(*make())
        if not np.allclose(a, b, atol=1e-10):
            raise AssertionError(f"{name}: numba and numpy disagree")
        t_nb = min(timeit.repeat(lambda: fast(*make()), number=1, repeat=repeat))
        t_np = min(timeit.repeat(lambda: slow(*make()), number=1, repeat=repeat))
        rows.append({"kernel": name, "numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    rows = run(args.repeat)
    print(f"{'kernel':<28}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}")
    for r in rows:
        print(f"{r['kernel']:<28}{1e3 * r['numba_s']:>10.3f}{1e3 * r['numpy_s']:>10.3f}{r['speedup']:>8.2f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
