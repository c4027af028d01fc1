"""Exact sampling of boundary-rooted spanning forests and recurrent states.

Loop-erased random walks grow the forest one site at a time: walk from the
next unvisited site until the current forest (or a boundary half-edge)
absorbs the walk, erase loops chronologically, attach.  The result is a
uniform boundary-rooted spanning forest, and pushing it through the
burning-test bijection yields a uniform recurrent configuration.

Walk steps are uniform over the d(v) incident edge instances, so parallel
edges carry the correct weight.  Steps along retention self-loops are
trivial loops erased immediately; the kernels skip them by redrawing,
which has the same law.  Randomness derivation is documented in
``randomness``.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .grid import KIND_BOUNDARY, KIND_SELF, Graph
from .randomness import RandomSource, draw_below
from .sandpile import SpanningForest, forest_from_parents, forest_to_config

_STEP_GUARD = 10**10


def sample_forest(
    g: Graph, rng: RandomSource | np.ndarray, order: np.ndarray | None = None
) -> SpanningForest:
    """Uniform boundary-rooted spanning forest.

    ``rng`` is a RandomSource or a raw xoshiro state (advanced in place).
    Sites are processed in index order unless ``order`` says otherwise (the
    sampled law does not depend on it; tests exercise that).
    """
    state = rng.kernel_state() if isinstance(rng, RandomSource) else rng
    if order is None:
        order = np.arange(g.n_sites, dtype=np.int64)
    else:
        order = np.ascontiguousarray(order, dtype=np.int64)
    parent = kernels.wilson_forest(
        g.inc_ptr, g.inc_kind, g.inc_target, state, order
    )
    return forest_from_parents(g, parent)


def sample_recurrent_config(
    g: Graph, rng: RandomSource | np.ndarray, order: np.ndarray | None = None
) -> np.ndarray:
    """Uniform recurrent configuration (forest sample + bijection)."""
    return forest_to_config(g, sample_forest(g, rng, order))


def loop_erased_walk(g: Graph, start: int, absorbed_sites, rng: RandomSource | np.ndarray):
    """Loop-erasure of a random walk from ``start``.

    Boundary half-edges are always absorbing (the walk leaves the system
    through them); ``absorbed_sites`` adds sites to the absorbing set.
    Returns ``(path, exit)`` where ``path`` is the loop-erased list of
    visited sites (empty if the start is already absorbed) and ``exit`` is
    ``("site", s)`` or ``("boundary", b)``.
    """
    state = rng.kernel_state() if isinstance(rng, RandomSource) else rng
    absorbed = np.zeros(g.n_sites, dtype=bool)
    if absorbed_sites is not None:
        for s in absorbed_sites:
            absorbed[int(s)] = True
    if absorbed[start]:
        return [], ("site", int(start))

    nxt = {}
    v = int(start)
    steps = 0
    exit_info = None
    while True:
        d = int(g.inc_ptr[v + 1] - g.inc_ptr[v])
        while True:
            s = int(g.inc_ptr[v]) + draw_below(state, d)
            if g.inc_kind[s] != KIND_SELF:
                break
        steps += 1
        if steps > _STEP_GUARD:
            raise RuntimeError("walk exceeded the step guard")
        if g.inc_kind[s] == KIND_BOUNDARY:
            nxt[v] = s
            exit_info = ("boundary", int(g.inc_target[s]))
            break
        u = int(g.inc_target[s])
        nxt[v] = s
        if absorbed[u]:
            exit_info = ("site", u)
            break
        v = u

    path = []
    v = int(start)
    while True:
        path.append(v)
        s = nxt[v]
        if g.inc_kind[s] == KIND_BOUNDARY:
            break
        u = int(g.inc_target[s])
        if absorbed[u]:
            break
        v = u
    return path, exit_info
