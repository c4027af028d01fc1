"""Experiment runner: build geometries, run processes at scale, check oracles.

Subcommands: run | oracle | greens | plot | stats.  Runs are deterministic
given (seed, samples): realization i draws its randomness from
SeedSequence(seed, spawn_key=(i,)) regardless of how realizations are
spread over workers.  Exit codes: 0 all checks pass, 1 a scientific check
failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import __version__, grid, kernels
from .exact import random_multigraph, verify_process_equivalence
from .grid import BUILTIN_GRAPHS, GeometryError
from .greens import (
    interface_density,
    triple_point_density,
    vandermonde_ratio,
    z_ruv_determinant,
)
from .processes import (
    bt_process,
    interface_row_counts,
    partition_topology,
    permutation_process,
    single_site_avalanche,
    triple_point_row_counts,
)
from .randomness import RandomSource
from .sandpile import burning_test, forest_to_config
from .stats import (
    fit_tail_exponent,
    giant_fraction,
    kth_largest_profile,
    mean_size_check,
    read_sizes_csv,
    write_profile_csv,
)
from .svgplot import partition_svg, rank_size_svg
from .wilson import sample_forest

GEOMETRIES = {
    "open-rect": grid.build_open_rect,
    "cylinder": grid.build_cylinder,
    "folded-cylinder": grid.build_folded_cylinder,
}

_WORKER_CFG = None


def _default_seed() -> int:
    return int(os.environ.get("AVF_SEED", "1"))


@dataclass
class RunConfig:
    geometry: str
    lx: int
    ly: int
    process: str
    samples: int
    seed: int
    workers: int = 1
    out: str = "."
    snapshots: int = 0
    row_stats: bool = False

    def build_graph(self):
        return GEOMETRIES[self.geometry](self.lx, self.ly)


def _init_worker(cfg_dict):
    global _WORKER_CFG
    cfg = RunConfig(**cfg_dict)
    _WORKER_CFG = (cfg, cfg.build_graph())


def _run_one(index: int) -> dict:
    cfg, g = _WORKER_CFG
    rs = RandomSource(cfg.seed, index)
    state = rs.kernel_state()
    forest = sample_forest(g, state)
    out: dict = {"index": index}
    if cfg.process == "single-site":
        z = forest_to_config(g, forest)
        b = index % g.n_boundary
        rec = single_site_avalanche(g, z, b)
        out["sizes"] = [rec.size]
        out["boundary_edge"] = b
        return out

    if cfg.process == "bt":
        z = forest_to_config(g, forest)
        part, _ = bt_process(g, z)
        sigma = None
    else:  # permutation
        z = forest_to_config(g, forest)
        sigma = rs.generator().permutation(g.n_boundary).astype(np.int64)
        part, _ = permutation_process(g, z, sigma)
    out["sizes"] = [int(s) for s in part.sizes]
    if index < cfg.snapshots:
        out["labels"] = [int(v) for v in part.label]
        out["sigma"] = None if sigma is None else [int(s) for s in sigma]
    if cfg.row_stats:
        c3, c4 = triple_point_row_counts(g, part)
        out["triple3"] = [int(v) for v in c3]
        out["triple4"] = [int(v) for v in c4]
        out["interface"] = [int(v) for v in interface_row_counts(g, part)]
        if g.geometry in ("folded-cylinder", "open-rect"):
            t = partition_topology(g, part)
            out["topology"] = [
                t.pieces, t.boundary_changes, t.top_changes, t.triple3,
                t.triple4, t.multi_sum, t.euler_expected, int(t.euler_ok),
            ]
    return out


def cmd_run(args) -> int:
    cfg = _load_run_config(args)
    try:
        g = cfg.build_graph()
    except GeometryError as exc:
        print(f"invalid geometry: {exc}", file=sys.stderr)
        return 2
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)

    cfg_dict = cfg.__dict__.copy()
    indices = range(cfg.samples)
    if cfg.workers > 1:
        ctx = get_context()
        with ctx.Pool(cfg.workers, initializer=_init_worker, initargs=(cfg_dict,)) as pool:
            results = pool.map(_run_one, indices, chunksize=max(1, cfg.samples // (8 * cfg.workers)))
    else:
        _init_worker(cfg_dict)
        results = [_run_one(i) for i in indices]
    results.sort(key=lambda r: r["index"])

    with open(outdir / "sizes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["realization", "boundaryEdge", "size"])
        for r in results:
            if "boundary_edge" in r:
                w.writerow([r["index"], r["boundary_edge"], r["sizes"][0]])
            else:
                for b, s in enumerate(r["sizes"]):
                    w.writerow([r["index"], b, s])

    meta = {
        "geometry": cfg.geometry,
        "lx": cfg.lx,
        "ly": cfg.ly,
        "sites": g.n_sites,
        "boundaryEdges": g.n_boundary,
        "process": cfg.process,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "streamSplit": "SeedSequence(seed, spawn_key=(realization,))",
        "backend": kernels.BACKEND,
        "version": __version__,
    }
    with open(outdir / "run-metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2)

    for r in results:
        if "labels" in r:
            snap = {
                "geometry": cfg.geometry,
                "lx": cfg.lx,
                "ly": cfg.ly,
                "realization": r["index"],
                "sigma": r["sigma"],
                "labels": r["labels"],
            }
            with open(outdir / f"partition-{r['index']:04d}.json", "w") as fh:
                json.dump(snap, fh)

    if cfg.row_stats and cfg.process != "single-site":
        with open(outdir / "rows.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["realization", "kind", "y", "count"])
            for r in results:
                for j, v in enumerate(r["triple3"]):
                    w.writerow([r["index"], "triple3", j + 1, v])
                for j, v in enumerate(r["triple4"]):
                    w.writerow([r["index"], "triple4", j + 1, v])
                for j, v in enumerate(r["interface"]):
                    w.writerow([r["index"], "interface", j, v])
        if any("topology" in r for r in results):
            with open(outdir / "topology.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(
                    ["realization", "pieces", "bottomChanges", "topChanges",
                     "triple3", "triple4", "multiSum", "eulerExpected", "eulerOk"]
                )
                for r in results:
                    if "topology" in r:
                        w.writerow([r["index"]] + r["topology"])
    print(f"wrote {cfg.samples} realizations to {outdir}")
    return 0


def _load_run_config(args) -> RunConfig:
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(json.load(fh))
    for name in ("geometry", "lx", "ly", "process", "samples", "seed",
                 "workers", "out", "snapshots"):
        v = getattr(args, name)
        if v is not None:
            fields[name] = v
    if args.row_stats:
        fields["row_stats"] = True
    fields.setdefault("seed", _default_seed())
    fields.setdefault("workers", 1)
    fields.setdefault("out", ".")
    missing = [k for k in ("geometry", "lx", "ly", "process", "samples") if k not in fields]
    if missing:
        raise SystemExit(f"missing run parameters: {', '.join(missing)}")
    if fields["geometry"] not in GEOMETRIES:
        raise SystemExit(f"unknown geometry {fields['geometry']!r}")
    if fields["process"] not in ("bt", "permutation", "single-site"):
        raise SystemExit(f"unknown process {fields['process']!r}")
    return RunConfig(**fields)


def cmd_oracle(args) -> int:
    try:
        if args.builtin:
            g = BUILTIN_GRAPHS[args.builtin]()
            label = args.builtin
        elif args.rect:
            g = grid.build_open_rect(*args.rect)
            label = f"rect-{args.rect[0]}x{args.rect[1]}"
        elif args.graph:
            g = grid.build_custom(Path(args.graph).read_text())
            label = args.graph
        else:
            print("oracle needs --builtin, --rect or --graph", file=sys.stderr)
            return 2
    except (KeyError, OSError, GeometryError) as exc:
        print(f"cannot build oracle graph: {exc}", file=sys.stderr)
        return 2

    rng = np.random.default_rng(args.seed if args.seed is not None else _default_seed())
    sigmas = [list(range(g.n_boundary)), list(range(g.n_boundary))[::-1]]
    for _ in range(max(0, args.sigmas - 2)):
        sigmas.append([int(v) for v in rng.permutation(g.n_boundary)])
    report = verify_process_equivalence(g, sigmas, label=label)

    # bijection round trip over every enumerated forest
    from .exact import enumerate_forests

    roundtrip_ok = True
    for f in enumerate_forests(g).forests:
        z = forest_to_config(g, f)
        f2 = burning_test(g, z)
        if f2 is None or not np.array_equal(f2.parent, f.parent):
            roundtrip_ok = False
            break

    print(report.to_json())
    print(f"bijection round-trip: {'pass' if roundtrip_ok else 'FAIL'}")
    if args.json:
        Path(args.json).write_text(report.to_json())
    if report.ok and roundtrip_ok:
        print(f"oracle {label}: pass")
        return 0
    print(f"oracle {label}: FAIL ({report.mismatch})", file=sys.stderr)
    return 1


def cmd_greens(args) -> int:
    failed = False
    ys = args.y or [1.0, 2.0, 5.0, 10.0]
    if args.triple:
        print("triple-point density: y, quadrature, closed form 1/(2 pi y^2), rel")
        for y in ys:
            got = triple_point_density(y)
            ref = 1.0 / (2 * math.pi * y * y)
            rel = abs(got / ref - 1)
            failed |= rel > 1e-4
            print(f"  {y:g} {got:.10g} {ref:.10g} {rel:.2e}")
    if args.interface:
        print("interface density: y, quadrature, closed form 1/(pi y), rel")
        for y in ys:
            got = interface_density(y)
            ref = 1.0 / (math.pi * y)
            rel = abs(got / ref - 1)
            failed |= rel > 1e-4
            print(f"  {y:g} {got:.10g} {ref:.10g} {rel:.2e}")
    if args.vandermonde:
        triples = [(-1, 0, 1), (-2, 0.5, 1.5), (0, 1, 3), (-3, -1, 2), (0.2, 0.9, 1.1)]
        ratios = [vandermonde_ratio(t) for t in triples]
        spread = (max(ratios) - min(ratios)) / abs(np.mean(ratios))
        failed |= spread > 0.01
        print(f"vandermonde ratios: {['%.6f' % r for r in ratios]} spread {spread:.2e}")
    if args.oracle:
        from .exact import signed_forest_sum, tip

        rng = np.random.default_rng(args.seed if args.seed is not None else _default_seed())
        matches = 0
        for _ in range(args.graphs):
            g = random_multigraph(rng, max_sites=args.max_sites)
            nb = g.n_boundary
            k = int(rng.integers(0, min(3, nb, g.n_sites) + 1))
            upper = [tip(g, b) for b in range(k)]
            roots = [tip(g, b) for b in range(k, nb)]
            if not roots:
                roots, upper = [tip(g, 0)], upper[1:] if upper else []
                k = len(upper)
            lower = [int(v) for v in rng.choice(g.n_sites, size=k, replace=False)] if k else []
            zd = z_ruv_determinant(g, roots, upper, lower)
            zb = signed_forest_sum(g, roots, upper, lower)
            if abs(zd - zb) <= 1e-6 * max(1.0, abs(zb)):
                matches += 1
        print(f"determinant vs enumeration: {matches}/{args.graphs} exact")
        failed |= matches != args.graphs
    if not (args.triple or args.interface or args.vandermonde or args.oracle):
        print("nothing to do: pass --triple/--interface/--vandermonde/--oracle",
              file=sys.stderr)
        return 2
    return 1 if failed else 0


def cmd_plot(args) -> int:
    did = False
    if args.sizes:
        try:
            sample = read_sizes_csv(args.sizes, metadata_path=args.metadata)
        except (OSError, ValueError) as exc:
            print(f"cannot read sizes: {exc}", file=sys.stderr)
            return 2
        rank_size_svg(sample.flat, args.out, title=f"{sample.geometry} avalanche sizes")
        print(f"wrote {args.out}")
        did = True
    elif args.partition:
        try:
            snap = json.loads(Path(args.partition).read_text())
            labels = snap["labels"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"cannot read partition: {exc}", file=sys.stderr)
            return 2
        partition_svg(labels, snap["lx"], snap["ly"], args.out,
                      sigma=snap.get("sigma"), title="boundary partition")
        print(f"wrote {args.out}")
        did = True
    if not did:
        print("plot needs --sizes or --partition", file=sys.stderr)
        return 2
    return 0


def cmd_stats(args) -> int:
    try:
        sample = read_sizes_csv(args.sizes, metadata_path=args.metadata)
    except (OSError, ValueError) as exc:
        print(f"cannot read sizes: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(sample.metadata(), indent=2))
    frac = giant_fraction(sample)
    print(f"giant fraction (> V/2): {frac:.6g}")
    try:
        window = tuple(args.window) if args.window else None
        fit = fit_tail_exponent(sample, window=window)
        print(fit.to_json())
        if args.fit_out:
            Path(args.fit_out).write_text(fit.to_json())
    except ValueError as exc:
        print(f"tail fit skipped: {exc}")
    if sample.boundary_edge is None and args.kmax:
        profile = kth_largest_profile(sample, args.kmax)
        if args.profile_out:
            write_profile_csv(profile, args.profile_out)
        print("k-th largest profile (k, mean, k^2-rescaled):")
        for p in profile:
            print(f"  {p.k} {p.mean:.2f} {p.rescaled:.3f}")
    rep = mean_size_check(sample)
    print(f"mean size {rep.overall_mean:.3f} vs V/B = {rep.expected:.3f} "
          f"(+- {3 * rep.overall_stderr:.3f} at 3se)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avf", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sampling experiment")
    run.add_argument("--config", help="JSON run configuration (flags override)")
    run.add_argument("--geometry", choices=sorted(GEOMETRIES))
    run.add_argument("--lx", type=int)
    run.add_argument("--ly", type=int)
    run.add_argument("--process", choices=["bt", "permutation", "single-site"])
    run.add_argument("--samples", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out")
    run.add_argument("--snapshots", type=int,
                     help="write partition JSON for the first N realizations")
    run.add_argument("--row-stats", action="store_true",
                     help="write per-height triple point and interface counts")
    run.set_defaults(func=cmd_run)

    orc = sub.add_parser("oracle", help="exhaustive process-equivalence check")
    orc.add_argument("--builtin", choices=sorted(BUILTIN_GRAPHS))
    orc.add_argument("--rect", type=int, nargs=2, metavar=("LX", "LY"))
    orc.add_argument("--graph", help="custom graph JSON file")
    orc.add_argument("--sigmas", type=int, default=3,
                     help="number of permutations to test (identity and reversal included)")
    orc.add_argument("--seed", type=int)
    orc.add_argument("--json", help="write the report to this file")
    orc.set_defaults(func=cmd_oracle)

    gr = sub.add_parser("greens", help="continuum observables and determinant oracle")
    gr.add_argument("--triple", action="store_true")
    gr.add_argument("--interface", action="store_true")
    gr.add_argument("--vandermonde", action="store_true")
    gr.add_argument("--y", type=float, nargs="+")
    gr.add_argument("--oracle", action="store_true")
    gr.add_argument("--graphs", type=int, default=20)
    gr.add_argument("--max-sites", type=int, default=7)
    gr.add_argument("--seed", type=int)
    gr.set_defaults(func=cmd_greens)

    pl = sub.add_parser("plot", help="SVG figures from run outputs")
    pl.add_argument("--sizes", help="sizes.csv from a run")
    pl.add_argument("--metadata", help="run-metadata.json (optional)")
    pl.add_argument("--partition", help="partition snapshot JSON")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)

    st = sub.add_parser("stats", help="fits and summaries from sizes.csv")
    st.add_argument("--sizes", required=True)
    st.add_argument("--metadata")
    st.add_argument("--window", type=float, nargs=2, metavar=("NMIN", "NMAX"))
    st.add_argument("--kmax", type=int, default=0)
    st.add_argument("--fit-out")
    st.add_argument("--profile-out")
    st.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except BrokenPipeError:
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
