"""Compare the numba and numpy backends of the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is first called
once per backend (numba compilation is excluded from the timings), then timed
over ``--repeat`` calls; results of the two backends are checked to agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hamflow import catalog, kernels, specflow
from hamflow.symplectic import standard_J


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        tic = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - tic)
    return min(times), out


def bench_propagate(repeat: int, span: float):
    fam = catalog.build("poschl_teller")
    n_steps = int(span / 0.01)
    hs, t_mid = kernels.substep_schedule(-span / 2, span / 2, n_steps)
    J = standard_J(1)
    K = J @ fam.matrices(0.4, t_mid)
    F0 = np.eye(2)
    rows = []
    outs = {}
    for backend in ("numba", "numpy"):
        t, out = _best(lambda: kernels.propagate(K, hs, F0, J, backend=backend), repeat)
        rows.append((f"propagate ({n_steps} steps)", backend, t))
        outs[backend] = out[0]
    err = float(np.max(np.abs(outs["numba"] - outs["numpy"])))
    return rows, err


def bench_inertia(repeat: int, N: int):
    fam = catalog.build("block_direct_sum")
    disc = specflow.default_discretization(fam, T_num=12.0, N=N)
    band = disc.assemble(0.6)
    rows = []
    counts = {}
    for backend in ("numba", "numpy"):
        t, c = _best(lambda: kernels.count_below(band, 0.1, backend), repeat)
        rows.append((f"inertia count (size {disc.size})", backend, t))
        counts[backend] = c
    for backend in ("numba", "numpy"):
        t, e = _best(lambda: disc.eigenvalues(0.6, 0.25, backend), repeat)
        rows.append((f"window eigenvalues (size {disc.size})", backend, t))
        counts[f"eig_{backend}"] = e
    err = float(np.max(np.abs(counts["eig_numba"] - counts["eig_numpy"]), initial=0.0))
    return rows, counts["numba"] == counts["numpy"], err


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--span", type=float, default=25.0, help="integration interval length")
    parser.add_argument("--gridpoints", type=int, default=1200)
    args = parser.parse_args(argv)

    rows, prop_err = bench_propagate(args.repeat, args.span)
    more, same_count, eig_err = bench_inertia(args.repeat, args.gridpoints)
    rows += more
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  backend  best [ms]")
    for name, backend, t in rows:
        print(f"{name.ljust(width)}  {backend:<7}  {1e3 * t:9.3f}")
    print(f"propagate max |numba - numpy|      {prop_err:.3e}")
    print(f"inertia counts equal               {same_count}")
    print(f"window eigenvalues max difference  {eig_err:.3e}")


if __name__ == "__main__":
    main()
