"""Green functions and the analytic observables of the partition process.

Two layers live here:

* exact finite-graph quantities: the sparse reduced-Laplacian solve whose
  boundary columns are absorption probabilities, and the determinant
  evaluation of the signed forest sums (matrix-tree plus complementary
  minors) that ``exact.signed_forest_sum`` cross-checks;
* continuum asymptotics: the boundary kernel y / (pi (x^2 + y^2)), the 3x3
  and 2x2 observation matrices built from it, and the quadratures that
  integrate their determinants over root positions.

Matrix entries use the normalized kernel (the absorption density, mass 1
per row of sites), which makes the two closed forms come out with unit
constant: the triple-point density integrates to 1 / (2 pi y^2) and the
signed interface density to 1 / (pi y), with no leftover scale factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .grid import KIND_BOUNDARY, KIND_INTERNAL, Graph

# correction for a unit-density triangular lattice; recorded for reference,
# unused on the square lattice
TRIANGULAR_LATTICE_FACTOR = 2.0 ** 0.5 * 3.0 ** -0.25


class QuadratureError(RuntimeError):
    """Adaptive refinement failed to reach the requested tolerance."""


class IllConditionedError(RuntimeError):
    """The reduced linear system is numerically unreliable."""


# ---------------------------------------------------------------------------
# exact finite-graph layer


def _laplacian_coo(g: Graph):
    rows, cols, vals = [], [], []
    for v in range(g.n_sites):
        diag = 0.0
        for s in g.slots_of(v):
            k = g.inc_kind[s]
            if k == KIND_INTERNAL:
                rows.append(v)
                cols.append(int(g.inc_target[s]))
                vals.append(-1.0)
                diag += 1.0
            elif k == KIND_BOUNDARY:
                diag += 1.0
        rows.append(v)
        cols.append(v)
        vals.append(diag)
    return sparse.coo_matrix(
        (vals, (rows, cols)), shape=(g.n_sites, g.n_sites)
    ).tocsc()


@dataclass
class GreenTable:
    """Inverse of the reduced Laplacian, factorized once per graph.

    ``boundary(u, b)`` is the probability that the walk from site u is
    absorbed through half-edge b; these are the boundary Green values and
    they sum to one over b for every u.
    """

    graph: Graph
    _lu: spla.SuperLU
    _site_columns: dict = field(default_factory=dict)

    def site_column(self, v: int) -> np.ndarray:
        v = int(v)
        if v not in self._site_columns:
            e = np.zeros(self.graph.n_sites)
            e[v] = 1.0
            col = self._lu.solve(e)
            col.setflags(write=False)
            self._site_columns[v] = col
        return self._site_columns[v]

    def site(self, u: int, v: int) -> float:
        return float(self.site_column(v)[u])

    def boundary(self, u: int, b: int) -> float:
        return float(self.site_column(int(self.graph.boundary_site[b]))[u])

    def boundary_matrix(self) -> np.ndarray:
        """(V, B) array of absorption probabilities."""
        g = self.graph
        out = np.empty((g.n_sites, g.n_boundary))
        for b in range(g.n_boundary):
            out[:, b] = self.site_column(int(g.boundary_site[b]))
        return out

    def boundary_row_sums(self) -> np.ndarray:
        sums = np.zeros(self.graph.n_sites)
        for s in self.graph.boundary_site:
            sums += self.site_column(int(s))
        return sums

    def residual(self, columns=None) -> float:
        """max |L G - I| over the requested (default: all) columns."""
        g = self.graph
        L = _laplacian_coo(g)
        if columns is None:
            columns = range(g.n_sites)
        worst = 0.0
        for v in columns:
            r = L @ self.site_column(int(v))
            r[int(v)] -= 1.0
            worst = max(worst, float(np.abs(r).max()))
        return worst

    def write_csv(self, path) -> None:
        g = self.graph
        mat = self.boundary_matrix()
        with open(path, "w") as fh:
            fh.write("site,boundaryEdge,value\n")
            for u in range(g.n_sites):
                for b in range(g.n_boundary):
                    fh.write(f"{u},{b},{mat[u, b]!r}\n")


def solve_green(g: Graph) -> GreenTable:
    L = _laplacian_coo(g)
    try:
        lu = spla.splu(L)
    except RuntimeError as exc:  # singular: no dissipation
        raise IllConditionedError(f"reduced Laplacian not invertible: {exc}") from exc
    return GreenTable(graph=g, _lu=lu)


def extended_laplacian(g: Graph) -> np.ndarray:
    """Dense Laplacian of the graph with boundary tips as extra vertices.

    Vertex order: sites 0..V-1, then tip of half-edge b at V + b.  Singular
    by construction; root deletions make it invertible.
    """
    n = g.n_sites + g.n_boundary
    L = np.zeros((n, n))
    for v in range(g.n_sites):
        for s in g.slots_of(v):
            k = g.inc_kind[s]
            if k == KIND_INTERNAL:
                L[v, int(g.inc_target[s])] -= 1.0
                L[v, v] += 1.0
            elif k == KIND_BOUNDARY:
                t = g.n_sites + int(g.inc_target[s])
                L[v, t] -= 1.0
                L[t, v] -= 1.0
                L[v, v] += 1.0
                L[t, t] += 1.0
    return L


def z_ruv_determinant(g: Graph, roots, upper, lower) -> float:
    """Signed forest sum by determinants.

    det of the root-deleted extended Laplacian times the determinant of the
    complementary minor of its inverse on (lower, upper); agrees exactly
    with ``exact.signed_forest_sum``.
    """
    roots = [int(r) for r in roots]
    upper = [int(u) for u in upper]
    lower = [int(v) for v in lower]
    if len(upper) != len(lower):
        raise ValueError("upper and lower lists must have equal length")
    if set(roots) & set(upper) or set(roots) & set(lower):
        raise ValueError("roots must be disjoint from the pairing lists")
    if not roots and not upper:
        raise ValueError("need at least one root or pair")
    L = extended_laplacian(g)
    keep = [i for i in range(L.shape[0]) if i not in set(roots)]
    remap = {orig: i for i, orig in enumerate(keep)}
    A = L[np.ix_(keep, keep)]
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditionedError(f"condition estimate {cond:.3e}")
    detA = float(np.linalg.det(A))
    if not upper:
        return detA
    rhs = np.zeros((len(keep), len(upper)))
    for j, u in enumerate(upper):
        rhs[remap[u], j] = 1.0
    X = np.linalg.solve(A, rhs)
    B = X[[remap[v] for v in lower], :]
    return detA * float(np.linalg.det(B))


# ---------------------------------------------------------------------------
# continuum layer


def asymptotic_bd_green(x, y):
    """Boundary kernel y / (pi (x^2 + y^2)): the absorption density on a
    straight boundary far from everything else.  Unit mass in x for any y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x == 0) & (y == 0)):
        raise ValueError("kernel undefined at the origin")
    out = y / (np.pi * (x * x + y * y))
    return float(out) if out.ndim == 0 else out


def bd_green_dx(x, y):
    """d/dx of the boundary kernel in the observation point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    out = -2.0 * x * y / (np.pi * r2 * r2)
    return float(out) if out.ndim == 0 else out


def bd_green_dy(x, y):
    """d/dy of the boundary kernel in the observation point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    out = (x * x - y * y) / (np.pi * r2 * r2)
    return float(out) if out.ndim == 0 else out


def triple_point_matrix(x: float, y: float, xs) -> np.ndarray:
    """Rows (kernel, d/dx, d/dy) at observation (x, y) for roots x1, x2, x3.

    Its determinant, integrated over root positions, is the density of
    points where three polyominoes meet.
    """
    x1, x2, x3 = (float(v) for v in xs)
    rows = []
    for xi in (x1, x2, x3):
        u = x - xi
        rows.append(
            [asymptotic_bd_green(u, y), bd_green_dx(u, y), bd_green_dy(u, y)]
        )
    return np.array(rows)


def pair_point_matrix(x: float, y: float, xs) -> np.ndarray:
    """Rows (kernel, d/dx) for two roots; det gives the signed pair density."""
    x1, x2 = (float(v) for v in xs)
    rows = []
    for xi in (x1, x2):
        u = x - xi
        rows.append([asymptotic_bd_green(u, y), bd_green_dx(u, y)])
    return np.array(rows)


def _det3(r1, r2, r3):
    a, b, c = r1
    d, e, f = r2
    g_, h, i = r3
    return a * (e * i - f * h) - b * (d * i - f * g_) + c * (d * h - e * g_)


def _triple_det_at(y, t1, t2, t3):
    """det of the triple matrix at observation (0, y), roots y*tan(t_i),
    including the Jacobian of the tangent substitution (t1 may be a vector)."""
    rows = []
    jac = np.asarray(1.0)
    for t in (t1, t2, t3):
        xi = y * np.tan(t)
        rows.append(
            (asymptotic_bd_green(xi, y), bd_green_dx(-xi, y), bd_green_dy(-xi, y))
        )
        jac = jac * y / np.cos(t) ** 2
    return _det3(*rows) * jac


def _pair_det_at(y, t1, t2):
    rows = []
    jac = np.asarray(1.0)
    for t in (t1, t2):
        xi = y * np.tan(t)
        rows.append((asymptotic_bd_green(xi, y), bd_green_dx(-xi, y)))
        jac = jac * y / np.cos(t) ** 2
    a, b = rows[0]
    c, d = rows[1]
    return (a * d - b * c) * jac


def _ordered_triple_integral(f, n: int) -> float:
    """Integral of f over -pi/2 < t1 < t2 < t3 < pi/2 by nested Gauss rules;
    the innermost variable is evaluated vectorized."""
    half = math.pi / 2.0
    nodes, weights = leggauss(n)
    total = 0.0
    for x3, w3 in zip(nodes, weights):
        t3 = half * x3
        j3 = half
        span2 = (t3 + half) / 2.0
        mid2 = (t3 - half) / 2.0
        for x2, w2 in zip(nodes, weights):
            t2 = mid2 + span2 * x2
            span1 = (t2 + half) / 2.0
            mid1 = (t2 - half) / 2.0
            t1 = mid1 + span1 * nodes
            vals = f(t1, t2, t3)
            total += w3 * j3 * w2 * span2 * span1 * float(np.dot(weights, vals))
    return total


def _ordered_pair_integral(f, n: int) -> float:
    half = math.pi / 2.0
    nodes, weights = leggauss(n)
    total = 0.0
    for x2, w2 in zip(nodes, weights):
        t2 = half * x2
        span1 = (t2 + half) / 2.0
        mid1 = (t2 - half) / 2.0
        t1 = mid1 + span1 * nodes
        vals = f(t1, t2)
        total += half * w2 * span1 * float(np.dot(weights, vals))
    return total


def _refine(compute, orders, rtol, what):
    prev = None
    for n in orders:
        val = compute(n)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        prev = val
    raise QuadratureError(f"{what} did not converge to rtol={rtol}")


def triple_point_density(y: float, rtol: float = 1e-6) -> float:
    """Probability density of triple points at height y: integrates the
    triple-matrix determinant over ordered root positions.  Closed form
    1 / (2 pi y^2); computed numerically and checked against it in tests."""
    if y <= 0:
        raise ValueError("height must be positive")
    return _refine(
        lambda n: _ordered_triple_integral(
            lambda t1, t2, t3: _triple_det_at(y, t1, t2, t3), n
        ),
        orders=(32, 48, 64),
        rtol=rtol,
        what="triple point density",
    )


def interface_density(y: float, rtol: float = 1e-6) -> float:
    """Signed density of pair interfaces crossing height y, per unit
    boundary length.  Closed form 1 / (pi y)."""
    if y <= 0:
        raise ValueError("height must be positive")
    return _refine(
        lambda n: _ordered_pair_integral(
            lambda t1, t2: _pair_det_at(y, t1, t2), n
        ),
        orders=(32, 48, 64),
        rtol=rtol,
        what="interface density",
    )


def triple_root_integral(xs, epsrel: float = 1e-8) -> float:
    """Integral of det M[x, y, xs] over the whole observation half-plane.

    Proportional to the inverse Vandermonde factor of the three roots;
    the proportionality constant is checked for invariance in tests.
    """
    x1, x2, x3 = (float(v) for v in xs)

    def det_at(x, y):
        return _det3(
            *(
                (
                    asymptotic_bd_green(x - xi, y),
                    bd_green_dx(x - xi, y),
                    bd_green_dy(x - xi, y),
                )
                for xi in (x1, x2, x3)
            )
        )

    def inner(x):
        # near-zero integrand swings both signs: the absolute floor keeps
        # the subdivision from chasing pure roundoff
        val, _ = quad(
            lambda phi: det_at(x, math.tan(phi)) / math.cos(phi) ** 2,
            0.0,
            math.pi / 2,
            epsabs=1e-13,
            epsrel=epsrel,
            limit=200,
        )
        return val

    marks = sorted(math.atan(v) for v in (x1, x2, x3))
    val, err = quad(
        lambda psi: inner(math.tan(psi)) / math.cos(psi) ** 2,
        -math.pi / 2,
        math.pi / 2,
        points=marks,
        epsabs=0.0,
        epsrel=epsrel,
        limit=200,
    )
    if abs(err) > 100 * epsrel * abs(val):
        raise QuadratureError(f"root integral error estimate {err:.2e}")
    return val


def vandermonde_ratio(xs, epsrel: float = 1e-8) -> float:
    """triple_root_integral times the Vandermonde factor of the roots."""
    x1, x2, x3 = sorted(float(v) for v in xs)
    vdm = (x3 - x2) * (x3 - x1) * (x2 - x1)
    if vdm == 0:
        raise ValueError("roots must be distinct")
    return triple_root_integral((x1, x2, x3), epsrel=epsrel) * vdm
