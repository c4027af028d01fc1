"""Exhaustive small-instance oracles.

Everything here is deliberately brute force: enumeration over all stable
configurations, over all parent assignments, over all edge subsets.  The
guards are hard errors because an oracle must never silently sample.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .grid import KIND_BOUNDARY, KIND_INTERNAL, Graph, reduced_laplacian
from .processes import permutation_process
from .sandpile import SpanningForest, burning_test, forest_from_parents

ENUM_GUARD = 10**7


class EnumerationGuardError(RuntimeError):
    """Search space too large for exhaustive enumeration."""


def _stable_space(g: Graph) -> int:
    size = 1
    for d in g.degree:
        size *= int(d)
        if size > ENUM_GUARD:
            raise EnumerationGuardError(
                f"stable-configuration space exceeds {ENUM_GUARD}"
            )
    return size


def enumerate_recurrent(g: Graph) -> list[np.ndarray]:
    """All stable configurations passing the burning test, lexicographic."""
    _stable_space(g)
    out = []
    for h in itertools.product(*(range(int(d)) for d in g.degree)):
        arr = np.array(h, dtype=np.int64)
        if burning_test(g, arr) is not None:
            out.append(arr)
    return out


@dataclass(frozen=True)
class ForestEnumeration:
    forests: list[SpanningForest]
    size_multiset: Counter  # component-size tuples -> multiplicity

    def __len__(self) -> int:
        return len(self.forests)


def enumerate_forests(g: Graph) -> ForestEnumeration:
    """Every boundary-rooted spanning forest, parallel edges distinguished.

    Enumerates parent-slot assignments (each site points along one of its
    non-self-loop instances) and keeps the acyclic ones; the product of the
    choice counts is guarded.
    """
    choices = []
    size = 1
    for v in range(g.n_sites):
        slots = [s for s in g.slots_of(v) if g.inc_kind[s] != 2]
        choices.append(slots)
        size *= len(slots)
        if size > ENUM_GUARD:
            raise EnumerationGuardError(f"assignment space exceeds {ENUM_GUARD}")
    forests = []
    counts: Counter = Counter()
    for combo in itertools.product(*choices):
        parent = np.array(combo, dtype=np.int64)
        if _is_forest(g, parent):
            f = forest_from_parents(g, parent)
            forests.append(f)
            counts[f.size_tuple()] += 1
    return ForestEnumeration(forests=forests, size_multiset=counts)


def _is_forest(g: Graph, parent: np.ndarray) -> bool:
    state = np.zeros(g.n_sites, dtype=np.int8)  # 0 new, 1 visiting, 2 done
    for v0 in range(g.n_sites):
        if state[v0]:
            continue
        chain = []
        v = v0
        while True:
            if state[v] == 2:
                break
            if state[v] == 1:
                return False
            state[v] = 1
            chain.append(v)
            s = parent[v]
            if g.inc_kind[s] == KIND_BOUNDARY:
                break
            v = int(g.inc_target[s])
        for w in chain:
            state[w] = 2
    return True


def _extended_edges(g: Graph):
    """Undirected edge list of the extended graph (boundary tips as vertices).

    Vertices 0..V-1 are sites, V + b is the tip of boundary half-edge b.
    Self-loops are irrelevant for spanning subgraphs and are dropped.
    """
    edges = []
    for v in range(g.n_sites):
        for s in g.slots_of(v):
            k = g.inc_kind[s]
            if k == KIND_INTERNAL:
                u = int(g.inc_target[s])
                if u >= v:
                    edges.append((v, u))
            elif k == KIND_BOUNDARY:
                edges.append((v, g.n_sites + int(g.inc_target[s])))
    return edges


def tip(g: Graph, b: int) -> int:
    """Extended-graph vertex index of boundary half-edge b."""
    return g.n_sites + int(b)


def signed_forest_sum(g: Graph, roots, upper, lower) -> int:
    """Signed count of (len(roots) + len(upper))-component spanning forests.

    Vertices live in the extended index space (sites, then boundary tips;
    see ``tip``).  Each root r_i must sit alone in its component (no other
    marked vertex); each u_i shares its component with exactly one v_j, and
    the forest contributes the signature of the pairing permutation
    u_i -> v_{sigma(i)}.  Brute force by recursive edge inclusion, used as
    the oracle for the determinant evaluation in ``greens``.
    """
    roots = [int(r) for r in roots]
    upper = [int(u) for u in upper]
    lower = [int(v) for v in lower]
    if len(upper) != len(lower):
        raise ValueError("upper and lower pairing lists must have equal length")
    if set(roots) & set(upper):
        raise ValueError("roots and upper list must be disjoint")
    n_ext = g.n_sites + g.n_boundary
    edges = _extended_edges(g)
    n_comp_target = len(roots) + len(upper)
    if n_comp_target == 0:
        raise ValueError("need at least one root or pair")
    # per-vertex marks
    root_of = {r: i for i, r in enumerate(roots)}
    upper_of = {u: i for i, u in enumerate(upper)}
    if len(root_of) != len(roots) or len(upper_of) != len(upper):
        raise ValueError("duplicate marked vertices")

    parent = list(range(n_ext))

    def find(x):  # no path compression: merges must be undoable
        while parent[x] != x:
            x = parent[x]
        return x

    # component payload: (has_root, upper_index or -1, tuple of lower indices)
    payload = {}
    for x in range(n_ext):
        payload[x] = (
            x in root_of,
            upper_of.get(x, -1),
            tuple(i for i, v in enumerate(lower) if v == x),
        )

    needed_merges = n_ext - n_comp_target
    if needed_merges < 0:
        return 0
    total = 0

    def merged(a, b):
        ra, ua, la = a
        rb, ub, lb = b
        if (ra or ua >= 0) and (rb or ub >= 0):
            return None  # two anchors may never share a component
        r = ra or rb
        u = ua if ua >= 0 else ub
        lo = la + lb
        if r and lo:
            return None  # a root component must not hold any lower vertex
        if len(lo) > 1:
            return None  # at most one lower vertex per component
        return (r, u, lo)

    def rec(i, merges_left):
        nonlocal total
        if merges_left == 0:
            sign = _pairing_sign(parent, payload, find, roots, upper, lower)
            if sign:
                total += sign
            return
        if len(edges) - i < merges_left:
            return
        # include edges[i] if it merges two compatible components
        a, b = edges[i]
        ra, rb = find(a), find(b)
        if ra != rb:
            m = merged(payload[ra], payload[rb])
            if m is not None:
                parent[ra] = rb
                old = payload[rb]
                payload[rb] = m
                rec(i + 1, merges_left - 1)
                parent[ra] = ra
                payload[rb] = old
        rec(i + 1, merges_left)

    rec(0, needed_merges)
    return total


def _pairing_sign(parent, payload, find, roots, upper, lower):
    """Signature of the induced pairing, or 0 for an invalid final state."""
    reps = {}
    for x in set(find(v) for v in range(len(parent))):
        reps[x] = payload[x]
    # every component needs exactly one anchor; roots carry no lower vertex;
    # each upper carries exactly one
    perm = [-1] * len(upper)
    for rep, (has_root, u_idx, lows) in reps.items():
        if has_root:
            if u_idx >= 0 or lows:
                return 0
        elif u_idx >= 0:
            if len(lows) != 1:
                return 0
            perm[u_idx] = lows[0]
        elif lows:
            return 0
    if -1 in perm:
        return 0
    # signature by counting inversions
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class EquivalenceReport:
    graph_label: str
    n_recurrent: int
    n_forests: int
    determinant: int
    multiset_forest: Counter
    multisets_sigma: dict  # sigma tuple -> Counter
    ok: bool
    mismatch: str | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "graph": self.graph_label,
                "recurrent": self.n_recurrent,
                "forests": self.n_forests,
                "determinant": self.determinant,
                "multiset": {
                    ",".join(map(str, k)): v
                    for k, v in sorted(self.multiset_forest.items())
                },
                "sigmas": {
                    ",".join(map(str, s)): {
                        ",".join(map(str, k)): v for k, v in sorted(c.items())
                    }
                    for s, c in self.multisets_sigma.items()
                },
                "ok": self.ok,
                "mismatch": self.mismatch,
            },
            indent=2,
        )


def verify_process_equivalence(g: Graph, sigmas, label="graph") -> EquivalenceReport:
    """Check that the forest process and the permutation process induce the
    same multiset of size lists over all recurrent configurations.

    This is the theory's one forbidden outcome: a mismatch is reported with
    the offending sigma rather than raised, so callers can surface the
    counterexample.
    """
    recurrent = enumerate_recurrent(g)
    forests = enumerate_forests(g)
    det = int(round(np.linalg.det(reduced_laplacian(g))))
    multisets = {}
    ok = True
    mismatch = None
    if not (len(recurrent) == len(forests) == det):
        ok = False
        mismatch = (
            f"counts disagree: recurrent={len(recurrent)} "
            f"forests={len(forests)} det={det}"
        )
    for sigma in sigmas:
        sig = tuple(int(s) for s in sigma)
        counter: Counter = Counter()
        for z in recurrent:
            part, _ = permutation_process(g, z, np.array(sig, dtype=np.int64))
            counter[part.size_tuple()] += 1
        multisets[sig] = counter
        if counter != forests.size_multiset:
            ok = False
            mismatch = f"sigma {sig} multiset differs from forest multiset"
    return EquivalenceReport(
        graph_label=label,
        n_recurrent=len(recurrent),
        n_forests=len(forests),
        determinant=det,
        multiset_forest=forests.size_multiset,
        multisets_sigma=multisets,
        ok=ok,
        mismatch=mismatch,
    )


def random_multigraph(rng: np.random.Generator, max_sites=6, max_extra_edges=4,
                      allow_selfloops=True) -> Graph:
    """Random connected multigraph with boundary half-edges, for oracle tests."""
    from .grid import build_custom

    n = int(rng.integers(1, max_sites + 1))
    edges = []
    for v in range(1, n):  # random spanning tree keeps it connected
        edges.append([int(rng.integers(0, v)), v])
    for _ in range(int(rng.integers(0, max_extra_edges + 1))):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.append([int(u), int(v)])
    n_bd = int(rng.integers(1, 6))
    boundary = [int(b) for b in rng.integers(0, n, size=n_bd)]
    selfloops = []
    if allow_selfloops and n > 0:
        for _ in range(int(rng.integers(0, 2))):
            selfloops.append(int(rng.integers(0, n)))
    return build_custom(
        {"sites": n, "edges": edges, "boundary": boundary, "selfloops": selfloops}
    )
