"""Benchmark the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--quick]

The two backends are bit-identical (checked here on the fly); the point of
the extension is the throughput of forest sampling and relaxation on
production-size lattices.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from avforest import _kernels_py as pyk
from avforest.grid import build_folded_cylinder
from avforest.randomness import RandomSource

try:
    from avforest import _speedups as cyk
except ImportError:
    cyk = None


def timed(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        out = fn()
    return (time.perf_counter() - t0) / reps, out


def bench(lx, ly, py_reps, cy_reps):
    g = build_folded_cylinder(lx, ly)
    order = np.arange(g.n_sites, dtype=np.int64)
    print(f"\nfolded cylinder {lx}x{ly} ({g.n_sites} sites)")
    header = f"{'kernel':<22}{'python':>12}"
    if cyk is not None:
        header += f"{'cython':>12}{'speedup':>10}"
    print(header)

    rows = []
    st_py = RandomSource(7, 0).kernel_state()
    t_py, parent_py = timed(
        lambda: pyk.wilson_forest(g.inc_ptr, g.inc_kind, g.inc_target, st_py.copy(), order),
        py_reps,
    )
    row = ["wilson_forest", t_py]
    if cyk is not None:
        st_cy = RandomSource(7, 0).kernel_state()
        t_cy, parent_cy = timed(
            lambda: cyk.wilson_forest(g.inc_ptr, g.inc_kind, g.inc_target, st_cy.copy(), order),
            cy_reps,
        )
        assert np.array_equal(parent_py, parent_cy), "backends diverged"
        row += [t_cy]
    rows.append(row)

    t_dep, (depths, ok) = timed(
        lambda: pyk.forest_depths(g.inc_ptr, g.inc_kind, g.inc_target, parent_py), py_reps
    )
    h = pyk.forest_heights(g.inc_ptr, g.inc_kind, g.inc_target, parent_py, depths)

    def relax_py():
        hh = h + g.frame_identity()
        top = np.zeros(g.n_sites, dtype=np.int64)
        pyk.relax(g.inc_ptr, g.inc_kind, g.inc_target, hh, top)
        return hh

    t_py, h_py = timed(relax_py, py_reps)
    row = ["relax(frame identity)", t_py]
    if cyk is not None:

        def relax_cy():
            hh = h + g.frame_identity()
            top = np.zeros(g.n_sites, dtype=np.int64)
            cyk.relax(g.inc_ptr, g.inc_kind, g.inc_target, hh, top)
            return hh

        t_cy, h_cy = timed(relax_cy, cy_reps)
        assert np.array_equal(h_py, h_cy)
        row += [t_cy]
    rows.append(row)

    t_py, burn_py = timed(
        lambda: pyk.burn(g.inc_ptr, g.inc_kind, g.inc_target, h), py_reps
    )
    row = ["burning_test", t_py]
    if cyk is not None:
        t_cy, burn_cy = timed(
            lambda: cyk.burn(g.inc_ptr, g.inc_kind, g.inc_target, h), cy_reps
        )
        assert np.array_equal(burn_py[1], burn_cy[1])
        row += [t_cy]
    rows.append(row)

    for row in rows:
        line = f"{row[0]:<22}{row[1]*1e3:>10.2f}ms"
        if len(row) > 2:
            line += f"{row[2]*1e3:>10.3f}ms{row[1]/row[2]:>9.1f}x"
        print(line)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    if cyk is None:
        print("compiled extension not available; timing the fallback only")
    if args.quick:
        bench(32, 50, py_reps=2, cy_reps=50)
    else:
        bench(64, 100, py_reps=2, cy_reps=100)
        bench(101, 158, py_reps=1, cy_reps=100)


if __name__ == "__main__":
    main()
