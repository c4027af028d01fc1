"""Pure-Python kernels: the fallback twin of the compiled module.

Every function here has a bit-identical counterpart in ``_speedups.pyx``;
``avforest.kernels`` picks whichever is available (or whatever
``AVF_PURE_PYTHON`` forces).  Keep the two in lockstep: same algorithms,
same RNG consumption, same status codes.

Conventions shared by both backends:

* a forest is an int64 array ``parent[v]`` = incidence slot of v's parent
  edge (always one of v's own slots), -1 meaning unset;
* burn/depth times: boundary half-edges burn at step 0, site times are
  >= 1, -1/0 mark unburnt sites;
* self-loops never burn and are never parents: the retained grain cannot
  help its own site reach threshold, so a self-loop permanently raises
  the unburnt count by one.
"""

from __future__ import annotations

import numpy as np

from .randomness import draw_below

BACKEND = "python"

_INTERNAL, _BOUNDARY, _SELF = 0, 1, 2

# permutation_labels status codes
OK = 0
WAVE_VIOLATION = 1  # a site toppled twice within one boundary avalanche
RELABELED = 2  # a site toppled in two different avalanches


def relax(ptr, kind, target, h, topplings) -> int:
    """Stabilize h in place; add toppling counts; return grains shed."""
    n = len(h)
    exited = 0
    on_stack = np.zeros(n, dtype=bool)
    stack = [v for v in range(n) if h[v] >= ptr[v + 1] - ptr[v]]
    for v in stack:
        on_stack[v] = True
    while stack:
        v = stack.pop()
        on_stack[v] = False
        d = ptr[v + 1] - ptr[v]
        while h[v] >= d:
            h[v] -= d
            topplings[v] += 1
            for s in range(ptr[v], ptr[v + 1]):
                k = kind[s]
                if k == _INTERNAL:
                    u = target[s]
                    h[u] += 1
                    if h[u] >= ptr[u + 1] - ptr[u] and not on_stack[u]:
                        on_stack[u] = True
                        stack.append(u)
                elif k == _BOUNDARY:
                    exited += 1
                else:
                    h[v] += 1
    return exited


def burn(ptr, kind, target, h):
    """Synchronous-parallel burning test.

    Returns (time, parent, ok).  A site burns at the first step t at which
    h(v) >= (number of incident instances still unburnt); its parent is the
    r-th instance, in slot order, among those whose far side burnt at step
    t-1, with r = h(v) - unburnt(v, t) + 1.
    """
    n = len(h)
    time = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    unburnt = (np.asarray(ptr[1:]) - np.asarray(ptr[:-1])).astype(np.int64)
    for v in range(n):
        for s in range(ptr[v], ptr[v + 1]):
            if kind[s] == _BOUNDARY:
                unburnt[v] -= 1
    queued = np.zeros(n, dtype=bool)
    frontier = [v for v in range(n) if h[v] >= unburnt[v]]
    for v in frontier:
        queued[v] = True
    t = 1
    burnt_total = 0
    while frontier:
        for v in frontier:
            time[v] = t
            r = h[v] - unburnt[v] + 1
            count = 0
            for s in range(ptr[v], ptr[v + 1]):
                k = kind[s]
                if (k == _BOUNDARY and t == 1) or (
                    k == _INTERNAL and time[target[s]] == t - 1
                ):
                    count += 1
                    if count == r:
                        parent[v] = s
                        break
            assert parent[v] >= 0
        burnt_total += len(frontier)
        nxt = []
        for v in frontier:
            for s in range(ptr[v], ptr[v + 1]):
                if kind[s] == _INTERNAL:
                    u = target[s]
                    if time[u] == -1:
                        unburnt[u] -= 1
                        if h[u] >= unburnt[u] and not queued[u]:
                            queued[u] = True
                            nxt.append(u)
        frontier = nxt
        t += 1
    return time, parent, burnt_total == n


def forest_depths(ptr, kind, target, parent):
    """Tree depth of every site (parent chains, boundary roots at 0).

    Returns (t, ok); ok is False on a cycle, a self-loop parent, or a
    parent slot that does not belong to its site.
    """
    n = len(parent)
    t = np.zeros(n, dtype=np.int64)
    visiting = np.zeros(n, dtype=bool)
    for v0 in range(n):
        if t[v0]:
            continue
        chain = []
        v = v0
        while True:
            if t[v]:
                base = t[v]
                break
            if visiting[v]:
                return t, False
            s = parent[v]
            if s < ptr[v] or s >= ptr[v + 1]:
                return t, False
            k = kind[s]
            if k == _SELF:
                return t, False
            visiting[v] = True
            chain.append(v)
            if k == _BOUNDARY:
                base = 0
                break
            v = target[s]
        for w in reversed(chain):
            base += 1
            t[w] = base
            visiting[w] = False
    return t, True


def forest_roots(ptr, kind, target, parent):
    """Boundary half-edge index at the end of every parent chain."""
    n = len(parent)
    root = np.full(n, -1, dtype=np.int64)
    for v0 in range(n):
        if root[v0] >= 0:
            continue
        chain = []
        v = v0
        while True:
            if root[v] >= 0:
                r = root[v]
                break
            s = parent[v]
            chain.append(v)
            if kind[s] == _BOUNDARY:
                r = target[s]
                break
            v = target[s]
        for w in chain:
            root[w] = r
    return root


def forest_heights(ptr, kind, target, parent, t):
    """Invert the burning test: the recurrent heights of a valid forest."""
    n = len(parent)
    h = np.zeros(n, dtype=np.int64)
    for v in range(n):
        tv = t[v]
        d = ptr[v + 1] - ptr[v]
        b = 0
        rank = 0
        ps = parent[v]
        for s in range(ptr[v], ptr[v + 1]):
            k = kind[s]
            if k == _BOUNDARY:
                ft = 0
            elif k == _INTERNAL:
                ft = t[target[s]]
            else:
                continue  # self-loops never burn
            if ft < tv:
                b += 1
                if ft == tv - 1 and s <= ps:
                    rank += 1
        h[v] = d - b + rank - 1
    return h


def wilson_forest(ptr, kind, target, state, order):
    """Uniform boundary-rooted spanning forest by loop-erased random walks.

    Walk steps are uniform over the d(v) incident instances; a self-loop
    step is a trivially erased loop, so it is skipped by redrawing (same
    law).  ``state`` is a xoshiro256++ state, advanced in place.
    """
    n = len(ptr) - 1
    parent = np.full(n, -1, dtype=np.int64)
    in_forest = np.zeros(n, dtype=bool)
    nxt = np.full(n, -1, dtype=np.int64)
    for start in order:
        if in_forest[start]:
            continue
        v = start
        while True:  # random walk, overwriting exit slots (= loop erasure)
            d = ptr[v + 1] - ptr[v]
            while True:
                s = ptr[v] + draw_below(state, d)
                if kind[s] != _SELF:
                    break
            nxt[v] = s
            if kind[s] == _BOUNDARY:
                break
            u = target[s]
            if in_forest[u]:
                break
            v = u
        v = start
        while not in_forest[v]:  # retrace the loop-erased path
            in_forest[v] = True
            s = nxt[v]
            parent[v] = s
            if kind[s] == _BOUNDARY:
                break
            v = target[s]
    return parent


def permutation_labels(ptr, kind, target, boundary_site, h, sigma):
    """Add the frame identity one boundary grain at a time in sigma order.

    Mutates h; labels every toppled site with the boundary edge whose
    avalanche toppled it.  Returns (labels, sizes, status); status is OK
    only if every avalanche was a single wave and no site toppled twice
    across avalanches.  The caller still has to check that every site got
    a label and that h returned to its starting value.
    """
    n = len(h)
    nb = len(boundary_site)
    labels = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(nb, dtype=np.int64)
    topplings = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    for pos in range(nb):
        b = sigma[pos]
        v0 = boundary_site[b]
        h[v0] += 1
        toppled = []
        stack = []
        if h[v0] >= ptr[v0 + 1] - ptr[v0]:
            stack.append(v0)
            on_stack[v0] = True
        while stack:
            v = stack.pop()
            on_stack[v] = False
            d = ptr[v + 1] - ptr[v]
            while h[v] >= d:
                h[v] -= d
                topplings[v] += 1
                if topplings[v] == 1:
                    toppled.append(v)
                else:
                    return labels, sizes, WAVE_VIOLATION
                for s in range(ptr[v], ptr[v + 1]):
                    k = kind[s]
                    if k == _INTERNAL:
                        u = target[s]
                        h[u] += 1
                        if h[u] >= ptr[u + 1] - ptr[u] and not on_stack[u]:
                            on_stack[u] = True
                            stack.append(u)
                    elif k == _SELF:
                        h[v] += 1
        for v in toppled:
            if labels[v] != -1:
                return labels, sizes, RELABELED
            labels[v] = b
            topplings[v] = 0
        sizes[b] = len(toppled)
    return labels, sizes, OK
