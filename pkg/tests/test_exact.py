from collections import Counter

import numpy as np
import pytest
from conftest import FIG_FOREST_MULTISET, FIG_RECURRENT

from avforest.exact import (
    EnumerationGuardError,
    enumerate_forests,
    enumerate_recurrent,
    random_multigraph,
    signed_forest_sum,
    tip,
    verify_process_equivalence,
)
from avforest.grid import build_custom, build_open_rect, reduced_laplacian
from avforest.sandpile import burning_test, forest_to_config


def test_enumerate_recurrent_figure(fig_graph):
    got = ["".join(str(v) for v in z) for z in enumerate_recurrent(fig_graph)]
    assert sorted(got) == sorted(FIG_RECURRENT)
    assert got == sorted(got)  # lexicographic


def test_enumerate_recurrent_single_site():
    g = build_custom({"sites": 1, "edges": [], "boundary": [0] * 4})
    got = [int(z[0]) for z in enumerate_recurrent(g)]
    assert got == [0, 1, 2, 3]


def test_enumerate_recurrent_count_matches_det():
    g = build_open_rect(2, 1)
    det = round(np.linalg.det(reduced_laplacian(g)))
    assert len(enumerate_recurrent(g)) == det


def test_enumerate_forests_figure(fig_graph):
    fe = enumerate_forests(fig_graph)
    assert len(fe) == 7
    assert fe.size_multiset == Counter(FIG_FOREST_MULTISET)


def test_enumerate_forests_triangle_two_roots():
    g = build_custom({"sites": 3, "edges": [[0, 1], [1, 2], [0, 2]],
                      "boundary": [0, 1]})
    det = round(np.linalg.det(reduced_laplacian(g)))
    assert det == 8
    assert len(enumerate_forests(g)) == 8


def test_enumerate_forests_single_edge():
    g = build_custom({"sites": 2, "edges": [[0, 1]], "boundary": [0, 1]})
    assert len(enumerate_forests(g)) == 3


def test_counts_match_on_random_multigraphs():
    rng = np.random.default_rng(100)
    for _ in range(15):
        g = random_multigraph(rng, max_sites=5)
        det = round(np.linalg.det(reduced_laplacian(g)))
        forests = enumerate_forests(g)
        recurrent = enumerate_recurrent(g)
        assert len(forests) == det
        assert len(recurrent) == det
        # bijection: forest heights enumerate the recurrent set exactly once
        configs = {tuple(forest_to_config(g, f)) for f in forests.forests}
        assert configs == {tuple(z) for z in recurrent}


def test_roundtrip_every_forest_3x3():
    g = build_open_rect(2, 3)
    for f in enumerate_forests(g).forests:
        z = forest_to_config(g, f)
        back = burning_test(g, z)
        assert back is not None
        assert np.array_equal(back.parent, f.parent)


def test_guard_trips():
    with pytest.raises(EnumerationGuardError):
        enumerate_recurrent(build_open_rect(5, 5))


def test_signed_sum_no_pairs_is_forest_count(fig_graph):
    g = fig_graph
    assert signed_forest_sum(g, [tip(g, 0), tip(g, 1)], [], []) == 7


def test_signed_sum_membership_example(fig_graph):
    # forests in which site 2 belongs to the tree rooted at boundary edge 0
    g = fig_graph
    val = signed_forest_sum(g, [tip(g, 1)], [tip(g, 0)], [2])
    by_hand = sum(
        1 for f in enumerate_forests(g).forests if f.root[2] == 0
    )
    assert val == by_hand == 2


def test_signed_sum_pair_antisymmetry():
    g = build_custom({"sites": 4,
                      "edges": [[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]],
                      "boundary": [0, 1, 2]})
    r = [tip(g, 2)]
    u = [tip(g, 0), tip(g, 1)]
    a = signed_forest_sum(g, r, u, [1, 3])
    b = signed_forest_sum(g, r, u, [3, 1])
    assert a == -b != 0


def test_signed_sum_root_component_exclusive(fig_graph):
    # a lower vertex inside a root component never matches
    g = fig_graph
    assert signed_forest_sum(g, [tip(g, 1)], [tip(g, 0)], [tip(g, 1)]) == 0


def test_verify_process_equivalence_figure(fig_graph):
    report = verify_process_equivalence(fig_graph, [(0, 1), (1, 0)], label="figure")
    assert report.ok
    assert report.n_recurrent == report.n_forests == report.determinant == 7
    assert report.multiset_forest == Counter(FIG_FOREST_MULTISET)
    for counter in report.multisets_sigma.values():
        assert counter == Counter(FIG_FOREST_MULTISET)
    assert '"ok": true' in report.to_json()


def test_verify_process_equivalence_2x2():
    g = build_open_rect(2, 2)
    rng = np.random.default_rng(0)
    sigmas = [list(rng.permutation(g.n_boundary)) for _ in range(3)]
    report = verify_process_equivalence(g, sigmas)
    assert report.ok


def test_verify_process_equivalence_trivial():
    g = build_custom({"sites": 1, "edges": [], "boundary": [0, 0]})
    report = verify_process_equivalence(g, [[0, 1], [1, 0]])
    assert report.ok
    assert report.determinant == 2


def test_edge_order_independence_of_laws():
    # forest set and recurrent count are edge-ordering free; the bt size
    # multiset over all recurrent states is too (the bijection relabels)
    from collections import Counter

    from avforest.grid import shuffle_edge_order
    from avforest.processes import bt_process

    rng = np.random.default_rng(31)
    for _ in range(5):
        g = random_multigraph(rng, max_sites=5)
        g2 = shuffle_edge_order(g, rng)
        fa, fb = enumerate_forests(g), enumerate_forests(g2)
        assert len(fa) == len(fb)
        assert fa.size_multiset == fb.size_multiset
        ra, rb = enumerate_recurrent(g), enumerate_recurrent(g2)
        assert len(ra) == len(rb)
        ca = Counter(bt_process(g, z)[0].size_tuple() for z in ra)
        cb = Counter(bt_process(g2, z)[0].size_tuple() for z in rb)
        assert ca == cb
