"""The two boundary-avalanche processes and geometric partition features.

Both processes decompose the domain into labelled polyominoes, one per
boundary half-edge:

* the permutation process adds the frame identity one boundary grain at a
  time in a given order, relaxing after each grain and labelling every
  site by the avalanche that toppled it;
* the bt process adds the whole frame identity at once; colour inheritance
  along the parent rule reproduces exactly the burning-test forest of the
  starting configuration, so its partition is the forest's component map.

The two are the same probabilistic process over uniform recurrent
configurations; ``avforest.exact.verify_process_equivalence`` checks that
exhaustively on small graphs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import CYLINDER, FOLDED_CYLINDER, OPEN_RECT, Graph
from .sandpile import (
    AvalancheRecord,
    NotRecurrentError,
    SpanningForest,
    as_heights,
    burning_test,
    relax,
)


@dataclass(frozen=True)
class BoundaryPartition:
    """Labels are boundary half-edge indices; every site carries exactly one.

    ``sizes[b]`` is the number of sites labelled b; empty polyominoes are
    kept with size 0.
    """

    graph: Graph
    label: np.ndarray  # int64 per site
    sizes: np.ndarray  # int64 per boundary half-edge

    def label_grid(self) -> np.ndarray:
        g = self.graph
        if g.lx is None:
            raise ValueError("not a lattice geometry")
        return self.label.reshape(g.ly, g.lx)

    def size_tuple(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.sizes)


@dataclass(frozen=True)
class ProcessTrace:
    sigma: np.ndarray
    avalanche_sizes: np.ndarray  # per position in sigma
    final_config: np.ndarray


@dataclass(frozen=True)
class TriplePoint:
    """Lattice vertex (x, y) where exactly three polyominoes meet."""

    x: int
    y: int
    labels: tuple[int, ...]


def partition_from_labels(g: Graph, label) -> BoundaryPartition:
    """Wrap a row-major label array (e.g. a reloaded snapshot)."""
    label = np.ascontiguousarray(label, dtype=np.int64)
    if label.shape != (g.n_sites,) or label.min() < 0 or label.max() >= g.n_boundary:
        raise ValueError("label array does not fit the graph")
    sizes = np.bincount(label, minlength=g.n_boundary).astype(np.int64)
    return BoundaryPartition(graph=g, label=label, sizes=sizes)


def permutation_process(
    g: Graph, z, sigma
) -> tuple[BoundaryPartition, ProcessTrace]:
    """Run the permutation boundary avalanche process (deterministic in sigma).

    Raises NotRecurrentError when the postconditions fail, i.e. when z was
    not recurrent: every site must topple exactly once over the B
    avalanches and the final configuration must equal z.
    """
    z = as_heights(g, z)
    sigma = np.ascontiguousarray(sigma, dtype=np.int64)
    if sorted(sigma.tolist()) != list(range(g.n_boundary)):
        raise ValueError("sigma must be a permutation of the boundary edges")
    h = z.copy()
    label, sizes, status = kernels.permutation_labels(
        g.inc_ptr, g.inc_kind, g.inc_target, g.boundary_site, h, sigma
    )
    if status != kernels.OK or np.any(label < 0) or not np.array_equal(h, z):
        raise NotRecurrentError(
            "permutation process postcondition failed; configuration not recurrent"
        )
    part = partition_from_labels(g, label)
    trace = ProcessTrace(
        sigma=sigma, avalanche_sizes=part.sizes[sigma], final_config=h
    )
    return part, trace


def bt_process(g: Graph, z) -> tuple[BoundaryPartition, SpanningForest]:
    """Add the whole frame identity; colours propagate along the burning
    parents, so the partition is the component map of burning_test(g, z)."""
    forest = burning_test(g, z)
    if forest is None:
        raise NotRecurrentError("bt process needs a recurrent configuration")
    part = partition_from_labels(g, forest.root.copy())
    return part, forest


def single_site_avalanche(g: Graph, z, b: int) -> AvalancheRecord:
    """Add one grain at boundary half-edge b's site and relax."""
    z = as_heights(g, z)
    h = z.copy()
    h[g.boundary_site[b]] += 1
    _, record = relax(g, h)
    return record


def support_is_simply_connected(g: Graph, support) -> bool:
    """No bounded complement component strictly enclosed by the support.

    Flood-fills the complement from every site that keeps contact with the
    open boundary (a boundary half-edge); an unreached complement site is a
    hole.  Folded rows carry no half-edges, so a pocket closed off against
    the fold counts as a hole, matching the reflected picture.
    """
    in_support = np.zeros(g.n_sites, dtype=bool)
    in_support[np.asarray(support, dtype=np.int64)] = True
    reached = np.zeros(g.n_sites, dtype=bool)
    stack = [int(s) for s in g.boundary_site if not in_support[s]]
    for v in stack:
        reached[v] = True
    while stack:
        v = stack.pop()
        for s in g.slots_of(v):
            if g.inc_kind[s] == 0:
                u = int(g.inc_target[s])
                if not in_support[u] and not reached[u]:
                    reached[u] = True
                    stack.append(u)
    return bool(np.all(reached | in_support))


def _vertex_corner_labels(g: Graph, lab: np.ndarray):
    """Label arrays (nw, ne, se, sw) for every internal lattice vertex.

    Vertex (x, y), y in 1..ly-1, touches faces (x-1, y), (x, y), (x-1, y-1)
    and (x, y-1); x wraps on periodic geometries and runs over 1..lx-1 on
    the open rectangle.
    """
    if g.lx is None:
        raise ValueError("triple points need a lattice geometry")
    grid = lab.reshape(g.ly, g.lx)
    upper = grid[1:, :]  # row y
    lower = grid[:-1, :]  # row y - 1
    if g.geometry in (CYLINDER, FOLDED_CYLINDER):
        nw = np.roll(upper, 1, axis=1)
        sw = np.roll(lower, 1, axis=1)
        ne, se = upper, lower
        xs = np.arange(g.lx)
    elif g.geometry == OPEN_RECT:
        nw, ne = upper[:, :-1], upper[:, 1:]
        sw, se = lower[:, :-1], lower[:, 1:]
        xs = np.arange(1, g.lx)
    else:
        raise ValueError(f"unsupported geometry {g.geometry!r}")
    return nw, ne, se, sw, xs


def _distinct_counts(nw, ne, se, sw) -> np.ndarray:
    stacked = np.sort(np.stack([nw, ne, se, sw]), axis=0)
    return 1 + (np.diff(stacked, axis=0) != 0).sum(axis=0)


def extract_triple_points(
    g: Graph, p: BoundaryPartition
) -> tuple[list[TriplePoint], list[TriplePoint]]:
    """Internal vertices with exactly 3 distinct incident labels, plus the
    (rare) vertices with 4 distinct labels reported separately."""
    nw, ne, se, sw, xs = _vertex_corner_labels(g, p.label)
    distinct = _distinct_counts(nw, ne, se, sw)
    out3: list[TriplePoint] = []
    out4: list[TriplePoint] = []
    for want, out in ((3, out3), (4, out4)):
        for row, col in zip(*np.nonzero(distinct == want)):
            labs = tuple(
                sorted({int(nw[row, col]), int(ne[row, col]),
                        int(se[row, col]), int(sw[row, col])})
            )
            out.append(TriplePoint(x=int(xs[col]), y=int(row) + 1, labels=labs))
    return out3, out4


def triple_point_row_counts(g: Graph, p: BoundaryPartition):
    """(count of 3-label vertices, count of 4-label vertices) per vertex row.

    Row index j in 1..ly-1; entry j-1 of each array is the count at height
    j.  Vectorized companion of extract_triple_points for ensembles.
    """
    nw, ne, se, sw, _ = _vertex_corner_labels(g, p.label)
    distinct = _distinct_counts(nw, ne, se, sw)
    return (distinct == 3).sum(axis=1), (distinct == 4).sum(axis=1)


def interfaces_at_height(g: Graph, p: BoundaryPartition, y: int) -> int:
    """Distinct label pairs adjacent across the dual row between face rows
    y and y + 1: the interfaces whose curve crosses that height."""
    if g.lx is None:
        raise ValueError("interfaces need a lattice geometry")
    if not (0 <= y < g.ly - 1):
        raise ValueError(f"dual row {y} out of range")
    return int(interface_row_counts(g, p)[y])


def interface_row_counts(g: Graph, p: BoundaryPartition) -> np.ndarray:
    """Distinct unordered label pairs {i, j} adjacent across each dual row.

    Entry y counts pairs with label(x, y) != label(x, y + 1) for at least
    one column x, deduplicated; an interface contributes to every height
    its curve crosses, however often it wiggles through it.
    """
    grid = p.label.reshape(g.ly, g.lx)
    out = np.zeros(max(g.ly - 1, 0), dtype=np.int64)
    nb = g.n_boundary
    for y in range(g.ly - 1):
        a, b = grid[y], grid[y + 1]
        mask = a != b
        if mask.any():
            lo = np.minimum(a[mask], b[mask])
            hi = np.maximum(a[mask], b[mask])
            out[y] = len(np.unique(lo * nb + hi))
    return out


@dataclass(frozen=True)
class PartitionTopology:
    """Per-realization Euler bookkeeping of a partition.

    ``multi_sum`` is the sum over internal vertices of (c - 2) for vertices
    with c >= 3 cyclic label changes; for generic configurations it is just
    the triple-point count.  On the folded cylinder and the open rectangle
    it must equal ``2 * pieces - boundary_changes - deficiency``, where the
    deficiency is 2 when the top row is captured by a single wrapping piece
    (folded) or for the simply-connected rectangle, and the number of
    top-row changes otherwise.
    """

    pieces: int
    boundary_changes: int
    top_changes: int
    triple3: int
    triple4: int
    multi_sum: int
    euler_expected: int

    @property
    def euler_ok(self) -> bool:
        return self.multi_sum == self.euler_expected


def partition_topology(g: Graph, p: BoundaryPartition) -> PartitionTopology:
    if g.geometry not in (FOLDED_CYLINDER, OPEN_RECT):
        raise ValueError("topology check supports folded-cylinder and open-rect")
    nw, ne, se, sw, _ = _vertex_corner_labels(g, p.label)
    changes = (
        (nw != ne).astype(np.int64)
        + (ne != se)
        + (se != sw)
        + (sw != nw)
    )
    distinct = _distinct_counts(nw, ne, se, sw)
    multi_sum = int(changes[changes >= 3].sum() - 2 * np.count_nonzero(changes >= 3))
    pieces = int(np.count_nonzero(p.sizes))
    grid = p.label.reshape(g.ly, g.lx)

    if g.geometry == FOLDED_CYLINDER:
        bottom = grid[0]
        m_b = int(np.count_nonzero(bottom != np.roll(bottom, -1)))
        top = grid[-1]
        m_t = int(np.count_nonzero(top != np.roll(top, -1)))
        deficiency = m_t if m_t > 0 else 2
    else:
        # rim faces in cyclic order; the disk contributes deficiency 2
        rim = np.concatenate(
            [grid[0, :], grid[1:, -1], grid[-1, -2::-1], grid[-2:0:-1, 0]]
        )
        m_b = int(np.count_nonzero(rim != np.roll(rim, -1)))
        m_t = 0
        deficiency = 2
    return PartitionTopology(
        pieces=pieces,
        boundary_changes=m_b,
        top_changes=m_t,
        triple3=int(np.count_nonzero(distinct == 3)),
        triple4=int(np.count_nonzero(distinct == 4)),
        multi_sum=multi_sum,
        euler_expected=2 * pieces - m_b - deficiency,
    )
