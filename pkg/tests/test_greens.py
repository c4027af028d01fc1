import math

import numpy as np
import pytest

from avforest.exact import random_multigraph, signed_forest_sum, tip
from avforest.grid import build_custom, build_open_rect, figure_example_graph
from avforest.greens import (
    TRIANGULAR_LATTICE_FACTOR,
    asymptotic_bd_green,
    bd_green_dx,
    bd_green_dy,
    interface_density,
    pair_point_matrix,
    solve_green,
    triple_point_density,
    triple_point_matrix,
    vandermonde_ratio,
    z_ruv_determinant,
)


def test_green_row_sums_small_graphs():
    for g in (figure_example_graph(), build_open_rect(3, 4)):
        gt = solve_green(g)
        assert np.abs(gt.boundary_row_sums() - 1).max() < 1e-10


def test_green_single_site_quarter():
    g = build_custom({"sites": 1, "edges": [], "boundary": [0] * 4})
    gt = solve_green(g)
    for b in range(4):
        assert gt.boundary(0, b) == pytest.approx(0.25, abs=1e-12)


def test_green_laplacian_residual():
    g = build_open_rect(5, 5)
    gt = solve_green(g)
    assert gt.residual() < 1e-10


def test_green_csv_export(tmp_path):
    g = build_open_rect(2, 2)
    gt = solve_green(g)
    path = tmp_path / "green.csv"
    gt.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "site,boundaryEdge,value"
    assert len(lines) == 1 + g.n_sites * g.n_boundary


def test_discrete_to_continuum_convergence():
    # at mid-boundary the exact values approach the half-plane kernel with
    # the Dirichlet line one row below the lattice (site row j at height j+1);
    # the window keeps y well below the domain scale where the box's own
    # geometry takes over
    L = 256
    g = build_open_rect(L, L)
    gt = solve_green(g)
    bx = L // 2
    site0 = g.site_index(bx, 0)
    b = [bb for bb in range(g.n_boundary) if g.boundary_site[bb] == site0][0]
    for j in range(9, 32):
        got = gt.boundary(g.site_index(bx, j), b)
        ref = asymptotic_bd_green(0.0, j + 1.0)
        assert abs(got / ref - 1) < 0.05


def test_asymptotic_values():
    assert asymptotic_bd_green(0, 1) == pytest.approx(1 / math.pi)
    assert asymptotic_bd_green(3, 4) == pytest.approx(4 / (25 * math.pi))
    with pytest.raises(ValueError):
        asymptotic_bd_green(0.0, 0.0)


def test_asymptotic_unit_mass():
    from scipy.integrate import quad

    y = 7.0
    val, _ = quad(lambda t: asymptotic_bd_green(y * math.tan(t), y) * y / math.cos(t) ** 2,
                  -math.pi / 2, math.pi / 2)
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("h", [0.02, 0.01])
def test_derivative_columns_match_central_differences(h):
    pts = [(0.3, 1.2), (-2.0, 3.0), (5.0, 0.7)]
    for x, y in pts:
        dx_num = (asymptotic_bd_green(x + h, y) - asymptotic_bd_green(x - h, y)) / (2 * h)
        dy_num = (asymptotic_bd_green(x, y + h) - asymptotic_bd_green(x, y - h)) / (2 * h)
        assert abs(dx_num - bd_green_dx(x, y)) < 2 * h * h * 10
        assert abs(dy_num - bd_green_dy(x, y)) < 2 * h * h * 10


def test_triple_matrix_degenerate_and_antisymmetric():
    m = triple_point_matrix(0.0, 2.0, (1.0, 1.0, 3.0))
    assert np.linalg.det(m) == pytest.approx(0.0, abs=1e-15)
    a = np.linalg.det(triple_point_matrix(0.3, 2.0, (0.0, 1.0, 2.5)))
    b = np.linalg.det(triple_point_matrix(0.3, 2.0, (1.0, 0.0, 2.5)))
    assert a == pytest.approx(-b)
    assert a != 0


def test_pair_matrix_antisymmetric():
    a = np.linalg.det(pair_point_matrix(0.0, 1.5, (-1.0, 2.0)))
    b = np.linalg.det(pair_point_matrix(0.0, 1.5, (2.0, -1.0)))
    assert a == pytest.approx(-b)


@pytest.mark.parametrize("y", [1.0, 2.0, 5.0, 10.0])
def test_triple_point_density_closed_form(y):
    assert triple_point_density(y) == pytest.approx(1 / (2 * math.pi * y * y), rel=1e-4)


@pytest.mark.parametrize("y", [1.0, 2.0, 5.0, 10.0])
def test_interface_density_closed_form(y):
    assert interface_density(y) == pytest.approx(1 / (math.pi * y), rel=1e-4)


def test_density_scaling_laws():
    assert triple_point_density(2.0) / triple_point_density(1.0) == pytest.approx(0.25, rel=1e-4)
    assert interface_density(6.0) / interface_density(3.0) == pytest.approx(0.5, rel=1e-4)


def test_vandermonde_ratio_constant():
    triples = [(-1.0, 0.0, 1.0), (-2.0, 0.5, 1.5), (0.0, 1.0, 3.0),
               (-3.0, -1.0, 2.0), (0.2, 0.9, 1.1)]
    ratios = [vandermonde_ratio(t, epsrel=1e-7) for t in triples]
    spread = (max(ratios) - min(ratios)) / abs(np.mean(ratios))
    assert spread < 0.01


def test_z_ruv_matches_enumeration_small():
    g = figure_example_graph()
    assert z_ruv_determinant(g, [tip(g, 0), tip(g, 1)], [], []) == pytest.approx(7)
    val = z_ruv_determinant(g, [tip(g, 1)], [tip(g, 0)], [2])
    assert val == pytest.approx(2)


def test_z_ruv_matches_enumeration_random():
    rng = np.random.default_rng(4242)
    checked = 0
    while checked < 25:
        g = random_multigraph(rng, max_sites=6)
        nb = g.n_boundary
        if nb < 2:
            continue
        k = int(rng.integers(1, min(3, nb, g.n_sites) + 1))
        if k >= nb:
            continue
        upper = [tip(g, b) for b in range(k)]
        roots = [tip(g, b) for b in range(k, nb)]
        lower = [int(v) for v in rng.choice(g.n_sites, size=k, replace=False)]
        zd = z_ruv_determinant(g, roots, upper, lower)
        zb = signed_forest_sum(g, roots, upper, lower)
        assert zd == pytest.approx(zb, abs=1e-6 + 1e-6 * abs(zb))
        checked += 1


def test_z_ruv_antisymmetry_in_lower():
    g = build_custom({"sites": 4,
                      "edges": [[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]],
                      "boundary": [0, 1, 2]})
    r = [tip(g, 2)]
    u = [tip(g, 0), tip(g, 1)]
    a = z_ruv_determinant(g, r, u, [1, 3])
    b = z_ruv_determinant(g, r, u, [3, 1])
    assert a == pytest.approx(-b)
    assert abs(a) > 0.5


def test_z_ruv_validates_input(fig_graph):
    with pytest.raises(ValueError):
        z_ruv_determinant(fig_graph, [tip(fig_graph, 0)], [tip(fig_graph, 0)], [1])
    with pytest.raises(ValueError):
        z_ruv_determinant(fig_graph, [], [tip(fig_graph, 0)], [1, 2])


def test_triangular_constant_recorded():
    assert TRIANGULAR_LATTICE_FACTOR == pytest.approx(2 ** 0.5 * 3 ** -0.25)
