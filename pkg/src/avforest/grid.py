"""Finite multigraphs with boundary half-edges: the arenas for all dynamics.

A graph is stored as a flat incidence structure.  For every site the
incident edge *instances* are listed consecutively in a fixed total order
(the per-site edge ordering used by the burning test and the walk kernels):

* boundary half-edges first, in global index order,
* then internal edges in compass order N, E, S, W (parallel instances by
  instance index; custom graphs use their input order),
* retention self-loops last.

Self-loops model folded rows: they count towards the toppling threshold
d(v) but a toppling returns that grain to the site, and a random-walk step
along one is a no-op.

Sites are indexed row-major (``site = y * lx + x``, row 0 at the open
bottom).  Boundary half-edges are indexed by attachment site, then local
order, which makes ids stable for serialization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

KIND_INTERNAL = 0
KIND_BOUNDARY = 1
KIND_SELF = 2

OPEN_RECT = "open-rect"
CYLINDER = "cylinder"
FOLDED_CYLINDER = "folded-cylinder"
CUSTOM = "custom"


class GeometryError(ValueError):
    """Invalid dimensions or a malformed custom graph description."""


@dataclass(frozen=True)
class Graph:
    """Immutable incidence structure; safe to share across workers."""

    geometry: str
    lx: int | None
    ly: int | None
    n_sites: int
    n_boundary: int
    inc_ptr: np.ndarray  # int64, (V+1,): slot range of site v is ptr[v]:ptr[v+1]
    inc_kind: np.ndarray  # int8, (slots,): KIND_* per instance
    inc_target: np.ndarray  # int32: neighbour site / boundary index / own site
    boundary_site: np.ndarray  # int32, (B,): attachment site per half-edge
    degree: np.ndarray = field(init=False)  # int64, (V,): d(v), self-loops included

    def __post_init__(self):
        for name in ("inc_ptr", "inc_kind", "inc_target", "boundary_site"):
            getattr(self, name).setflags(write=False)
        deg = np.diff(self.inc_ptr)
        deg.setflags(write=False)
        object.__setattr__(self, "degree", deg)

    @property
    def n_instances(self) -> int:
        return int(self.inc_ptr[-1])

    def frame_identity(self) -> np.ndarray:
        """Grain addition with one grain per incident boundary half-edge."""
        return np.bincount(self.boundary_site, minlength=self.n_sites).astype(np.int64)

    def selfloop_count(self) -> np.ndarray:
        out = np.zeros(self.n_sites, dtype=np.int64)
        sites = np.repeat(np.arange(self.n_sites), np.diff(self.inc_ptr))
        np.add.at(out, sites[self.inc_kind == KIND_SELF], 1)
        return out

    def site_index(self, x: int, y: int) -> int:
        if self.lx is None:
            raise ValueError("not a lattice geometry")
        if self.geometry in (CYLINDER, FOLDED_CYLINDER):
            x %= self.lx
        if not (0 <= x < self.lx and 0 <= y < self.ly):
            raise IndexError((x, y))
        return y * self.lx + x

    def site_xy(self, v: int) -> tuple[int, int]:
        if self.lx is None:
            raise ValueError("not a lattice geometry")
        return v % self.lx, v // self.lx

    def slots_of(self, v: int) -> range:
        return range(int(self.inc_ptr[v]), int(self.inc_ptr[v + 1]))

    def to_json(self) -> str:
        edges = []
        selfloops = []
        for v in range(self.n_sites):
            for s in self.slots_of(v):
                k = self.inc_kind[s]
                if k == KIND_INTERNAL:
                    u = int(self.inc_target[s])
                    if u > v or (u == v):
                        edges.append([v, u])
                elif k == KIND_SELF:
                    selfloops.append(v)
        return json.dumps(
            {
                "sites": self.n_sites,
                "edges": edges,
                "boundary": [int(s) for s in self.boundary_site],
                "selfloops": selfloops,
            }
        )


def _assemble(geometry, lx, ly, per_site) -> Graph:
    """per_site: list over sites of lists of (kind, target) in final order."""
    n_sites = len(per_site)
    ptr = np.zeros(n_sites + 1, dtype=np.int64)
    kinds = []
    targets = []
    boundary_site = []
    for v, inc in enumerate(per_site):
        ptr[v + 1] = ptr[v] + len(inc)
        for kind, target in inc:
            kinds.append(kind)
            targets.append(target)
            if kind == KIND_BOUNDARY:
                boundary_site.append(v)
    g = Graph(
        geometry=geometry,
        lx=lx,
        ly=ly,
        n_sites=n_sites,
        n_boundary=len(boundary_site),
        inc_ptr=ptr,
        inc_kind=np.array(kinds, dtype=np.int8),
        inc_target=np.array(targets, dtype=np.int32),
        boundary_site=np.array(boundary_site, dtype=np.int32),
    )
    _validate(g)
    return g


def _validate(g: Graph) -> None:
    if g.n_sites < 1:
        raise GeometryError("graph needs at least one site")
    if np.any(g.degree < 1):
        raise GeometryError("every site needs at least one incident edge instance")
    if g.n_boundary < 1:
        raise GeometryError("dynamics need at least one boundary half-edge")
    # boundary index = position in (site, local order): enforced by assembly,
    # checked here because custom input goes through the same path.
    if not np.all(np.diff(g.boundary_site) >= 0):
        raise GeometryError("boundary half-edges must be indexed by site")
    # every internal component must reach a boundary half-edge ("connected
    # through the outside"); otherwise relaxation cannot terminate.
    comp = np.full(g.n_sites, -1, dtype=np.int64)
    n_comp = 0
    for start in range(g.n_sites):
        if comp[start] >= 0:
            continue
        comp[start] = n_comp
        stack = [start]
        while stack:
            v = stack.pop()
            for s in g.slots_of(v):
                if g.inc_kind[s] == KIND_INTERNAL:
                    u = int(g.inc_target[s])
                    if comp[u] < 0:
                        comp[u] = n_comp
                        stack.append(u)
        n_comp += 1
    has_boundary = np.zeros(n_comp, dtype=bool)
    has_boundary[comp[g.boundary_site]] = True
    if not has_boundary.all():
        raise GeometryError("a connected component has no boundary half-edge")


def _lattice(lx: int, ly: int, geometry: str) -> Graph:
    if lx < 1 or ly < 1:
        raise GeometryError(f"dimensions must be positive, got {lx}x{ly}")
    periodic = geometry in (CYLINDER, FOLDED_CYLINDER)
    if periodic and lx < 2:
        raise GeometryError("periodic direction needs lx >= 2")

    per_site = []
    for y in range(ly):
        for x in range(lx):
            boundary = []
            internal = []
            selfloops = []
            # compass order N, E, S, W
            for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                nx, ny = x + dx, y + dy
                if periodic:
                    nx %= lx
                if 0 <= nx < lx and 0 <= ny < ly:
                    internal.append((KIND_INTERNAL, ny * lx + nx))
                elif ny >= ly and geometry == FOLDED_CYLINDER:
                    selfloops.append((KIND_SELF, y * lx + x))
                else:
                    boundary.append((KIND_BOUNDARY, 0))  # index patched by assembly
            per_site.append(boundary + internal + selfloops)

    g = _assemble(geometry, lx, ly, per_site)
    # patch boundary targets to the global half-edge index
    targets = np.array(g.inc_target)
    b = 0
    for s in range(g.n_instances):
        if g.inc_kind[s] == KIND_BOUNDARY:
            targets[s] = b
            b += 1
    object.__setattr__(g, "inc_target", targets)
    targets.setflags(write=False)
    return g


def build_open_rect(lx: int, ly: int) -> Graph:
    """Open lx x ly rectangle: d(v) = 4 everywhere, rim sites carry the
    missing directions as boundary half-edges (corners two, edges one)."""
    return _lattice(lx, ly, OPEN_RECT)


def build_cylinder(lx: int, ly: int) -> Graph:
    """x-periodic strip, open boundary rows at bottom and top; B = 2*lx."""
    return _lattice(lx, ly, CYLINDER)


def build_folded_cylinder(lx: int, ly: int) -> Graph:
    """x-periodic strip, open bottom row, folded top row.

    A folded site has threshold 4 but a toppling keeps one grain (the
    self-loop) and sends one each W, S, E.  B = lx.
    """
    return _lattice(lx, ly, FOLDED_CYLINDER)


def build_custom(spec) -> Graph:
    """Build a graph from an explicit description.

    Accepts a dict (or its JSON text) of the form::

        {"sites": N, "edges": [[u, v], ...], "boundary": [site, ...],
         "selfloops": [site, ...]}

    with 0-based indices.  Parallel edges are repeated entries; the
    ``selfloops`` list holds retention loops (an edge entry with u == v is
    rejected so the two kinds cannot be confused).
    """
    if isinstance(spec, (str, bytes)):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise GeometryError(f"unparseable graph description: {exc}") from exc
    try:
        n = int(spec["sites"])
        edges = [(int(u), int(v)) for u, v in spec.get("edges", [])]
        boundary = [int(s) for s in spec.get("boundary", [])]
        selfloops = [int(s) for s in spec.get("selfloops", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"malformed graph description: {exc}") from exc
    if n < 1:
        raise GeometryError("graph needs at least one site")
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GeometryError(f"edge ({u},{v}) out of range")
        if u == v:
            raise GeometryError("use 'selfloops' for retention loops, not edges")
    for s in boundary + selfloops:
        if not (0 <= s < n):
            raise GeometryError(f"site {s} out of range")

    per_site = [[] for _ in range(n)]
    # boundary half-edges indexed by (site, occurrence): stable sort by site
    for b, s in enumerate(sorted(boundary)):
        per_site[s].append((KIND_BOUNDARY, b))
    for u, v in edges:  # internal instances in input order at both endpoints
        per_site[u].append((KIND_INTERNAL, v))
        per_site[v].append((KIND_INTERNAL, u))
    for s in selfloops:
        per_site[s].append((KIND_SELF, s))
    return _assemble(CUSTOM, None, None, per_site)


def figure_example_graph() -> Graph:
    """Three sites in a path, a double edge on one link, one boundary
    half-edge at each end; d = (3, 3, 2) and exactly 7 recurrent states."""
    return build_custom(
        {"sites": 3, "edges": [[0, 1], [0, 1], [1, 2]], "boundary": [0, 2]}
    )


BUILTIN_GRAPHS = {
    "figure1": figure_example_graph,
}


def shuffle_edge_order(g: Graph, rng: np.random.Generator) -> Graph:
    """Return a copy of ``g`` with each site's edge ordering permuted.

    Boundary half-edge identities are untouched; only the per-site total
    order changes.  Used to test that laws of interest are independent of
    the ordering.
    """
    kinds = np.array(g.inc_kind)
    targets = np.array(g.inc_target)
    for v in range(g.n_sites):
        lo, hi = int(g.inc_ptr[v]), int(g.inc_ptr[v + 1])
        perm = rng.permutation(hi - lo)
        kinds[lo:hi] = kinds[lo:hi][perm]
        targets[lo:hi] = targets[lo:hi][perm]
    return Graph(
        geometry=g.geometry,
        lx=g.lx,
        ly=g.ly,
        n_sites=g.n_sites,
        n_boundary=g.n_boundary,
        inc_ptr=np.array(g.inc_ptr),
        inc_kind=kinds,
        inc_target=targets,
        boundary_site=np.array(g.boundary_site),
    )


def reduced_laplacian(g: Graph) -> np.ndarray:
    """Dense reduced Laplacian: diagonal d(v) minus self-loops, off-diagonal
    minus edge multiplicity.  Its determinant counts boundary-rooted
    spanning forests."""
    L = np.zeros((g.n_sites, g.n_sites))
    for v in range(g.n_sites):
        for s in g.slots_of(v):
            k = g.inc_kind[s]
            if k == KIND_INTERNAL:
                L[v, g.inc_target[s]] -= 1.0
                L[v, v] += 1.0
            elif k == KIND_BOUNDARY:
                L[v, v] += 1.0
    return L
