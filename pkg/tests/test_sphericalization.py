import numpy as np
import pytest

import oracles
from fraclap.errors import RadiusOutOfRange
from fraclap.filling import read_graph
from fraclap.harness import fixture
from fraclap.sphericalization import (
    HORIZONTAL,
    TO_INFINITY,
    VERTICAL,
    ProductGrid,
    ball_at_infinity_measure,
    build_sphericalized,
    density_omega,
    density_rho,
    discrete_ball_at_infinity,
    dist_to_infinity,
    doubling_constant,
    geometric_levels,
    john_check,
    omega_harnack,
    omega_mass_between,
    total_measure_closed_form,
    write_sphericalized,
)


@pytest.fixture(scope="module")
def graph200():
    return build_sphericalized(ProductGrid(fixture("cycle(8)"), geometric_levels(1e3, 200)))


def test_densities():
    for y in (0.1, 0.5, 1.0):
        assert density_rho(y, 2.0) == 1.0 and density_omega(y, 2.0) == 1.0
    assert density_rho(2.0, 2.0) == 0.25
    assert density_omega(2.0, 2.0) == 0.0625
    y = np.array([1.0, 1.5, 3.0, 40.0])
    assert np.allclose(density_omega(y, 3.0), density_rho(y, 3.0) ** 2)


def test_dist_to_infinity_closed_form():
    for beta in (1.5, 2.0, 3.0):
        assert dist_to_infinity(1.0, beta) == 1 / (beta - 1)
        assert dist_to_infinity(1.0 - 1e-15, beta) == pytest.approx(1 / (beta - 1), abs=1e-14)
        assert dist_to_infinity(0.0, beta) == pytest.approx(beta / (beta - 1))
    assert dist_to_infinity(4.0, 2.0) == 0.25
    with pytest.raises(ValueError):
        dist_to_infinity(-1.0, 2.0)


def test_grid_validation():
    s = fixture("cycle(4)")
    with pytest.raises(ValueError):
        ProductGrid(s, [1.0, 0.5])
    with pytest.raises(ValueError):
        ProductGrid(s, [0.5, 1.0], a=1.0)
    with pytest.raises(ValueError):
        ProductGrid(s, [0.5, 1.0], beta_s=1.0)
    assert ProductGrid(s, [0.5, 1.0], a=0.2).theta == pytest.approx(0.4)


def test_lengths_undeformed_below_one():
    s = fixture("cycle(8)")
    y = np.linspace(0.1, 1.0, 10)
    g = build_sphericalized(ProductGrid(s, y))
    hor = g.edge_kind == HORIZONTAL
    a, b = g.edges[hor].T
    assert np.allclose(g.length[hor], s.dist[g.vertex_point[a], g.vertex_point[b]])
    ver = g.edge_kind == VERTICAL
    assert np.allclose(g.length[ver], np.repeat(np.diff(y), 8))
    assert np.all(g.length[g.edge_kind == TO_INFINITY] == dist_to_infinity(1.0, 2.0))
    assert g.vertex_mass[g.infinity] == 0.0


def test_distance_to_infinity_converges(graph200):
    d = graph200.distances(graph200.infinity)
    y = graph200.grid.y_levels
    for x in range(8):
        col = d[np.arange(200) * 8 + x]
        exact = dist_to_infinity(y, 2.0)
        assert np.all(np.abs(col - exact) <= 0.02 * exact)


def test_total_measure(graph200):
    bounds = graph200.grid.cell_bounds()
    span = omega_mass_between(bounds[0], bounds[-1], 2.0, 0.0)
    assert graph200.vertex_mass.sum() == pytest.approx(span, rel=0.01)
    assert total_measure_closed_form(2.0, 0.0) == pytest.approx(4 / 3)
    # extending the grid upward adds a vanishing amount
    taller = build_sphericalized(ProductGrid(fixture("cycle(8)"), geometric_levels(1e5, 295)))
    assert taller.vertex_mass.sum() - graph200.vertex_mass.sum() < 1e-6 + 0.01
    assert taller.vertex_mass.sum() < total_measure_closed_form(2.0, 0.0)


def test_ball_at_infinity_closed_form():
    assert ball_at_infinity_measure(0.25, 2.0, 0.0, 1.0) == pytest.approx(1 / 192)
    for R in (0.05, 0.25, 0.6):
        for beta, a in ((2.0, 0.0), (3.0, 0.3), (1.5, -0.5)):
            if R < 1 / (beta - 1):
                assert ball_at_infinity_measure(R, beta, a) == pytest.approx(oracles.ball_at_infinity(R, beta, a), rel=1e-9)
    assert ball_at_infinity_measure(1e-6, 2.0, 0.0) < 1e-15
    with pytest.raises(RadiusOutOfRange):
        ball_at_infinity_measure(1.0, 2.0, 0.0)
    with pytest.raises(RadiusOutOfRange):
        ball_at_infinity_measure(0.0, 2.0, 0.0)


@pytest.mark.parametrize("R", [0.1, 0.25, 0.5, 0.9])
def test_discrete_ball_at_infinity(graph200, R):
    rep = discrete_ball_at_infinity(graph200, R)
    assert rep["closed_form"] == pytest.approx(ball_at_infinity_measure(R, 2.0, 0.0))
    assert rep["rel_error"] < 0.05


def test_omega_harnack(graph200):
    rep = omega_harnack(graph200)
    assert 1.0 <= rep["worst_ratio"] <= rep["bound"]


def test_doubling_refinement():
    s = fixture("cycle(8)")
    radii = np.geomspace(0.01, 1.0, 8)
    coarse = build_sphericalized(ProductGrid(s, geometric_levels(1e3, 101, 1.05**2)))
    fine = build_sphericalized(ProductGrid(s, geometric_levels(1e3, 201, 1.05)))
    c1, c2 = doubling_constant(coarse, radii), doubling_constant(fine, radii)
    assert np.isfinite(c1) and np.isfinite(c2)
    assert abs(c2 / c1 - 1) <= 0.25


def test_john(graph200):
    rep = john_check(graph200)
    assert rep["min_slack"] >= -1e-12
    assert rep["min_ratio"] >= 1 - 1e-12


def test_export(tmp_path, graph200):
    path = tmp_path / "sph.txt"
    write_sphericalized(path, graph200)
    back = read_graph(path)
    assert len(back["vertices"]) == graph200.n_vertices
    assert len(back["edges"]) == len(graph200.edges)
    assert back["vertices"][-1][2] == -1
    assert np.allclose([e[3] for e in back["edges"]], graph200.length)
