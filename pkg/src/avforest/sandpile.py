"""Sandpile dynamics, the burning test, and the forest bijection.

Heights are plain int64 arrays in row-major site order.  A configuration h
is stable when 0 <= h(v) <= d(v) - 1 everywhere (the threshold counts
retention self-loops).  Toppling removes d(v) grains, sends one along every
incident instance, keeps one per self-loop and discards grains leaving
through boundary half-edges.

The burning test runs synchronous-parallel: a site burns at the first step
at which its height reaches the number of still-unburnt incident instances
(boundary half-edges burn at step 0; self-loops never burn, since the
retained grain cannot help its own site reach threshold).  The parent rule
and its inverse below form the canonical bijection between recurrent
configurations and boundary-rooted spanning forests; it is verified
exhaustively on small graphs in the test suite before any large-scale use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import Graph


class NotRecurrentError(ValueError):
    """A recurrent configuration was required."""


class InvalidForestError(ValueError):
    """Parent map has a cycle, a self-loop parent, or a foreign slot."""


@dataclass(frozen=True)
class AvalancheRecord:
    """Toppling counts of one relaxation."""

    topplings: np.ndarray  # int64 per site
    exited: int  # grains shed through the boundary

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.topplings > 0)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.topplings))


@dataclass(frozen=True)
class SpanningForest:
    """Boundary-rooted spanning forest in slot encoding.

    ``parent[v]`` is one of v's incidence slots (an internal edge towards
    the parent site, or a boundary half-edge for tree roots next to the
    boundary); ``t[v]`` is the tree depth, which equals the burning time;
    ``root[v]`` is the boundary half-edge index of v's component.
    """

    graph: Graph
    parent: np.ndarray  # int64 slot per site
    t: np.ndarray  # int64 depth per site
    root: np.ndarray  # int64 boundary index per site

    def component_sizes(self) -> np.ndarray:
        """Sites per boundary half-edge (empty trees have size 0)."""
        return np.bincount(self.root, minlength=self.graph.n_boundary).astype(
            np.int64
        )

    def size_tuple(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.component_sizes())


def forest_from_parents(g: Graph, parent: np.ndarray) -> SpanningForest:
    """Validate a parent-slot map and fill in depths and roots."""
    parent = np.ascontiguousarray(parent, dtype=np.int64)
    if parent.shape != (g.n_sites,):
        raise InvalidForestError("parent map has the wrong length")
    t, ok = kernels.forest_depths(g.inc_ptr, g.inc_kind, g.inc_target, parent)
    if not ok:
        raise InvalidForestError("parent map is not a boundary-rooted forest")
    root = kernels.forest_roots(g.inc_ptr, g.inc_kind, g.inc_target, parent)
    return SpanningForest(graph=g, parent=parent, t=t, root=root)


def as_heights(g: Graph, h) -> np.ndarray:
    arr = np.ascontiguousarray(h, dtype=np.int64)
    if arr.shape != (g.n_sites,):
        raise ValueError(f"expected {g.n_sites} heights, got shape {arr.shape}")
    return arr


def is_stable(g: Graph, h) -> bool:
    h = as_heights(g, h)
    return bool(np.all(h >= 0) and np.all(h < g.degree))


def relax(g: Graph, h) -> tuple[np.ndarray, AvalancheRecord]:
    """Stabilize h (not in place); abelian, so the record is order-free."""
    h = as_heights(g, h).copy()
    if np.any(h < 0):
        raise ValueError("heights must be non-negative")
    topplings = np.zeros(g.n_sites, dtype=np.int64)
    exited = kernels.relax(g.inc_ptr, g.inc_kind, g.inc_target, h, topplings)
    return h, AvalancheRecord(topplings=topplings, exited=int(exited))


def add_and_relax(g: Graph, h, grains) -> tuple[np.ndarray, AvalancheRecord]:
    return relax(g, as_heights(g, h) + as_heights(g, grains))


def add_frame_identity_and_relax(g: Graph, z) -> tuple[np.ndarray, AvalancheRecord]:
    """For recurrent z this returns z itself with one toppling per site;
    anything else breaks that postcondition, which doubles as a recurrence
    cross-check."""
    return add_and_relax(g, z, g.frame_identity())


def burning_test(g: Graph, h) -> SpanningForest | None:
    """Burn a stable configuration; None when burning stalls (not recurrent)."""
    h = as_heights(g, h)
    if not is_stable(g, h):
        raise ValueError("burning test needs a stable configuration")
    t, parent, ok = kernels.burn(g.inc_ptr, g.inc_kind, g.inc_target, h)
    if not ok:
        return None
    root = kernels.forest_roots(g.inc_ptr, g.inc_kind, g.inc_target, parent)
    return SpanningForest(graph=g, parent=parent, t=t, root=root)


def is_recurrent(g: Graph, h) -> bool:
    return burning_test(g, h) is not None


def forest_to_config(g: Graph, f: SpanningForest) -> np.ndarray:
    """Inverse of the burning test.

    h(v) = d(v) - b(v, t(v)) + rank - 1, where b counts incident instances
    burnt before v and rank is the parent's position (in edge order) among
    the instances burnt exactly at step t(v) - 1.
    """
    if f.graph is not g:
        f = forest_from_parents(g, f.parent)
    return kernels.forest_heights(
        g.inc_ptr, g.inc_kind, g.inc_target, f.parent, f.t
    )
