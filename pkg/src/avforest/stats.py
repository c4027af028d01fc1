"""Ensemble statistics of avalanche/polyomino sizes.

Size data is kept with its per-realization structure: one row of B sizes
per full frame-identity realization (bt or permutation process), or one
(boundary edge, size) pair per single-grain avalanche.

Conventions worth spelling out once:

* the giant avalanche is anything larger than half the volume; it is
  excluded from tail fits and from the k-th largest profile;
* the tail exponent gamma refers to p(n) ~ n^-gamma inside the scaling
  window.  On a log-log plot of rank against size (the ordered-size plot:
  x = size, y = how many avalanches are at least that large) the window
  shows slope -(gamma - 1); gamma = 3/2 gives the -1/2 reference line.
  Equivalently, size against rank has slope -1/(gamma - 1) = -2.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

DEFAULT_TAIL_NMIN = 30


class InsufficientDataError(ValueError):
    pass


@dataclass
class SizeSample:
    """Avalanche sizes with geometry metadata.

    ``sizes`` has one row per realization.  For full-identity processes a
    row holds the B per-boundary-edge sizes; for single-grain runs rows
    have one entry and ``boundary_edge`` records which edge was hit.
    """

    sizes: np.ndarray  # int64 (R, B) or (R, 1)
    geometry: str
    lx: int
    ly: int
    n_sites: int
    n_boundary: int
    process: str
    seed: int
    boundary_edge: np.ndarray | None = None  # (R,), single-site runs only

    @property
    def n_realizations(self) -> int:
        return self.sizes.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.sizes.ravel()

    @property
    def giant_cut(self) -> float:
        return self.n_sites / 2.0

    def non_giant(self) -> np.ndarray:
        f = self.flat
        return f[f <= self.giant_cut]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["realization", "boundaryEdge", "size"])
            for r in range(self.n_realizations):
                if self.boundary_edge is not None:
                    w.writerow([r, int(self.boundary_edge[r]), int(self.sizes[r, 0])])
                else:
                    for b in range(self.sizes.shape[1]):
                        w.writerow([r, b, int(self.sizes[r, b])])

    def metadata(self) -> dict:
        return {
            "geometry": self.geometry,
            "lx": self.lx,
            "ly": self.ly,
            "sites": self.n_sites,
            "boundaryEdges": self.n_boundary,
            "process": self.process,
            "seed": self.seed,
            "realizations": self.n_realizations,
        }


def read_sizes_csv(path, geometry="unknown", lx=0, ly=0, n_sites=0,
                   n_boundary=0, process="unknown", seed=0,
                   metadata_path=None) -> SizeSample:
    """Load a sizes.csv; if a run-metadata.json is next to it, prefer that."""
    if metadata_path is not None:
        with open(metadata_path) as fh:
            meta = json.load(fh)
        geometry = meta.get("geometry", geometry)
        lx = meta.get("lx", lx)
        ly = meta.get("ly", ly)
        n_sites = meta.get("sites", n_sites)
        n_boundary = meta.get("boundaryEdges", n_boundary)
        process = meta.get("process", process)
        seed = meta.get("seed", seed)
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                (int(rec["realization"]), int(rec["boundaryEdge"]), int(rec["size"]))
            )
    if not rows:
        raise InsufficientDataError(f"no size records in {path}")
    n_real = max(r for r, _, _ in rows) + 1
    per_real = [r for r, _, _ in rows]
    if process == "single-site" or len(rows) == n_real:
        sizes = np.zeros((n_real, 1), dtype=np.int64)
        bedge = np.zeros(n_real, dtype=np.int64)
        for r, b, s in rows:
            sizes[r, 0] = s
            bedge[r] = b
        return SizeSample(sizes, geometry, lx, ly, n_sites, n_boundary,
                          process, seed, boundary_edge=bedge)
    nb = max(b for _, b, _ in rows) + 1
    sizes = np.zeros((n_real, nb), dtype=np.int64)
    for r, b, s in rows:
        sizes[r, b] = s
    return SizeSample(sizes, geometry, lx, ly, n_sites, n_boundary, process, seed)


@dataclass(frozen=True)
class TailFit:
    gamma_hat: float
    n_min: float
    n_max: float
    stderr: float
    n_window: int
    rank_slope: float
    method: str = "truncated-mle"

    def to_json(self) -> str:
        return json.dumps(
            {
                "gammaHat": self.gamma_hat,
                "window": [self.n_min, self.n_max],
                "stderr": self.stderr,
                "nWindow": self.n_window,
                "rankSlope": self.rank_slope,
                "method": self.method,
            },
            indent=2,
        )


def _truncated_loglik(gamma, logs, a, b):
    n = len(logs)
    if abs(gamma - 1.0) < 1e-9:
        norm = math.log(math.log(b / a))
    else:
        norm = math.log((a ** (1 - gamma) - b ** (1 - gamma)) / (gamma - 1))
    return -gamma * float(np.sum(logs)) - n * norm


def fit_tail_exponent(sample, window=None) -> TailFit:
    """Maximum-likelihood exponent of a truncated power law.

    Continuous-approximation (Hill-type) likelihood on the window
    [n_min, n_max]; fine for integer sizes once n_min is well above 1.
    Giants (> V/2) are excluded before windowing.  The rank-plot slope over
    the same window is reported as a cross-check; see the module docstring
    for the slope conventions.
    """
    if isinstance(sample, SizeSample):
        data = sample.non_giant().astype(float)
        default_max = (sample.lx ** 2) / 4.0 if sample.lx else float(data.max())
    else:
        data = np.asarray(sample, dtype=float)
        default_max = float(data.max()) if data.size else 0.0
    if window is None:
        window = (DEFAULT_TAIL_NMIN, default_max)
    a, b = float(window[0]), float(window[1])
    if not (0 < a < b):
        raise ValueError(f"bad window {window}")
    xs = data[(data >= a) & (data <= b)]
    if len(xs) < 100:
        raise InsufficientDataError(
            f"{len(xs)} sizes inside window [{a}, {b}]; need at least 100"
        )
    logs = np.log(xs)

    def score(gamma, eps=1e-6):
        return (
            _truncated_loglik(gamma + eps, logs, a, b)
            - _truncated_loglik(gamma - eps, logs, a, b)
        ) / (2 * eps)

    lo, hi = 1.000001, 12.0
    if score(lo) < 0:  # flatter than any power law in range
        gamma_hat = lo
    elif score(hi) > 0:
        gamma_hat = hi
    else:
        gamma_hat = float(brentq(score, lo, hi, xtol=1e-9))
    eps = 1e-4
    d2 = (
        _truncated_loglik(gamma_hat + eps, logs, a, b)
        - 2 * _truncated_loglik(gamma_hat, logs, a, b)
        + _truncated_loglik(gamma_hat - eps, logs, a, b)
    ) / eps**2
    stderr = 1.0 / math.sqrt(max(-d2, 1e-300))

    # rank over the whole non-giant sample, regress inside the window only
    order = np.sort(data)[::-1]
    ranks = np.arange(1, len(order) + 1, dtype=float)
    sel = (order >= a) & (order <= b)
    slope = np.polyfit(np.log(order[sel]), np.log(ranks[sel]), 1)[0]
    return TailFit(
        gamma_hat=gamma_hat,
        n_min=a,
        n_max=b,
        stderr=stderr,
        n_window=len(xs),
        rank_slope=float(slope),
    )


def truncated_power_law_sample(gamma, a, b, size, rng, integer=False):
    """Inverse-CDF draws from p(x) ~ x^-gamma on [a, b] (the fit oracle)."""
    u = rng.random(size)
    if abs(gamma - 1.0) < 1e-12:
        x = a * (b / a) ** u
    else:
        e = 1.0 - gamma
        x = (a**e + u * (b**e - a**e)) ** (1.0 / e)
    return np.rint(x).astype(np.int64) if integer else x


def giant_fraction(sample: SizeSample, threshold=0.5) -> float:
    """Fraction of avalanches exceeding threshold * V."""
    cut = threshold * sample.n_sites
    return float(np.count_nonzero(sample.flat > cut)) / sample.flat.size


def giants_per_realization(sample: SizeSample, threshold=0.5) -> np.ndarray:
    cut = threshold * sample.n_sites
    return (sample.sizes > cut).sum(axis=1)


@dataclass(frozen=True)
class ProfilePoint:
    k: int
    mean: float
    rescaled: float


def kth_largest_profile(sample: SizeSample, k_max: int) -> list[ProfilePoint]:
    """Mean k-th largest non-giant size per realization, k = 1..k_max,
    with the k^2-rescaled profile normalized to 1 at k = 1."""
    if k_max >= sample.n_boundary:
        raise ValueError(f"k_max {k_max} must be below B = {sample.n_boundary}")
    cut = sample.giant_cut
    rows = []
    for r in range(sample.n_realizations):
        vals = sample.sizes[r]
        vals = np.sort(vals[vals <= cut])[::-1]
        if len(vals) < k_max:
            raise InsufficientDataError("realization with fewer sizes than k_max")
        rows.append(vals[:k_max])
    means = np.mean(rows, axis=0)
    base = means[0] if means[0] > 0 else 1.0
    return [
        ProfilePoint(k=k, mean=float(means[k - 1]),
                     rescaled=float(means[k - 1] * k * k / base))
        for k in range(1, k_max + 1)
    ]


def write_profile_csv(points: list[ProfilePoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "mean", "rescaled"])
        for p in points:
            w.writerow([p.k, repr(p.mean), repr(p.rescaled)])


@dataclass(frozen=True)
class MeanSizeReport:
    per_edge_mean: np.ndarray
    per_edge_stderr: np.ndarray
    expected: float  # V / B
    overall_mean: float
    overall_stderr: float
    partition_exact: bool  # every realization's sizes sum to V (full runs)

    @property
    def edges_within_3se(self) -> bool:
        dev = np.abs(self.per_edge_mean - self.expected)
        return bool(np.all(dev <= 3 * np.maximum(self.per_edge_stderr, 1e-300)))

    @property
    def overall_within_3se(self) -> bool:
        return abs(self.overall_mean - self.expected) <= 3 * self.overall_stderr


def mean_size_check(sample: SizeSample) -> MeanSizeReport:
    """Per-boundary-edge mean sizes against the exact V/B law."""
    expected = sample.n_sites / sample.n_boundary
    if sample.boundary_edge is not None:
        edges = np.asarray(sample.boundary_edge)
        vals = sample.sizes[:, 0].astype(float)
        means = np.zeros(sample.n_boundary)
        errs = np.zeros(sample.n_boundary)
        for b in range(sample.n_boundary):
            sel = vals[edges == b]
            if len(sel):
                means[b] = sel.mean()
                errs[b] = sel.std(ddof=1) / math.sqrt(len(sel)) if len(sel) > 1 else np.inf
            else:
                means[b], errs[b] = np.nan, np.inf
        partition_exact = False
        overall = vals
    else:
        means = sample.sizes.mean(axis=0)
        errs = sample.sizes.std(axis=0, ddof=1) / math.sqrt(sample.n_realizations)
        partition_exact = bool(
            np.all(sample.sizes.sum(axis=1) == sample.n_sites)
        )
        overall = sample.sizes.ravel().astype(float)
    return MeanSizeReport(
        per_edge_mean=means,
        per_edge_stderr=errs,
        expected=expected,
        overall_mean=float(overall.mean()),
        overall_stderr=float(overall.std(ddof=1) / math.sqrt(len(overall)))
        if len(overall) > 1
        else float("inf"),
        partition_exact=partition_exact,
    )
