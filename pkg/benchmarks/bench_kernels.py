"""Time the batched shifted banded solves on both backends.

    python3 benchmarks/bench_kernels.py [--n-t 64] [--repeat 3]

Systems are the inner quasi-Newton matrices of a Cahn-Hilliard run
(``l1 I + D + eps^2 D^2`` with a complex time shift), on 1D and 2D meshes.
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from pint4th import kernels
from pint4th.circulant import build_circulants, diagonalize
from pint4th.spatial import Mesh1D, Mesh2D, assemble_operator, sparse_bandwidth, to_band


def make_batch(mesh, n_t, seed=0):
    lap = assemble_operator("laplacian_only", mesh).sparse
    mats = [sp.identity(mesh.n_dof, format="csr"), (lap + 0.01 * lap @ lap).tocsr()]
    kl = max(sparse_bandwidth(m)[0] for m in mats)
    ku = max(sparse_bandwidth(m)[1] for m in mats)
    bands = np.stack([to_band(m, kl, ku) for m in mats])
    circ = diagonalize(build_circulants(n_t, 0.01, 1e-4, 1.0))
    coefs = np.stack([circ.eigs_c1, np.ones(n_t)], axis=1)
    rng = np.random.default_rng(seed)
    rhs = rng.standard_normal((n_t, mesh.n_dof)) + 1j * rng.standard_normal((n_t, mesh.n_dof))
    return bands, coefs, rhs, kl, ku


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-t", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    meshes = [("1D n_x=129", Mesh1D(129, 1 / 128)), ("1D n_x=1025", Mesh1D(1025, 1 / 1024)),
              ("2D 17x17", Mesh2D(17, 1 / 16)), ("2D 33x33", Mesh2D(33, 1 / 32))]
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}; n_t={args.n_t}; best of {args.repeat}")
    print(f"{'mesh':<14}" + "".join(f"{b + ' [s]':>14}" for b in backends) + f"{'speedup':>10}")
    for label, mesh in meshes:
        bands, coefs, rhs, kl, ku = make_batch(mesh, args.n_t)
        timings, outs = {}, {}
        for b in backends:
            timings[b], outs[b] = best_time(
                lambda: kernels.solve_shifted_batch(bands, coefs, rhs, kl, ku, backend=b),
                args.repeat)
        row = f"{label:<14}" + "".join(f"{timings[b]:>14.4f}" for b in backends)
        if len(backends) == 2:
            diff = np.abs(outs["cython"] - outs["python"]).max() / np.abs(outs["python"]).max()
            assert diff < 1e-12, diff
            row += f"{timings['python'] / timings['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
