import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fraclap.errors import IncompatibleData
from fraclap.filling import FillingParams, WeightedGraph, make_filling
from fraclap.fractional import random_mean_zero
from fraclap.graph_calculus import (
    SolveReport,
    eta_pairing,
    flux_pairing,
    neumann_objective,
    p_energy,
    solve_dirichlet,
    solve_neumann,
    weak_residual,
)
from fraclap.harness import fixture
from helpers import FIXTURES, path_graph

PS = [1.5, 2.0, 3.0]


def filling(name, depth, p=2.0):
    return make_filling(fixture(name), FillingParams(depth=depth, p=p))


def random_data(rng, g):
    return random_mean_zero(rng, g.boundary_map.weight)


def test_p_energy_examples():
    g = WeightedGraph(2, np.array([[0, 1]]), np.ones(1), np.ones(1))
    assert p_energy(g, [0.0, 1.0], 2) == 1.0
    assert p_energy(g, [3.0, 3.0], 2) == 0.0
    h = filling("cycle(8)", 3)
    u = np.random.default_rng(0).normal(size=h.n_vertices)
    assert p_energy(h, u + 7.5, 2.5) == pytest.approx(p_energy(h, u, 2.5))


def test_path_weak_residual(path3):
    f = np.array([1.0, -1.0])
    r = weak_residual(path3, [1.0, 0.0, -1.0], 2.0, f, path3.boundary_map)
    assert np.allclose(r, 0.0)
    assert np.allclose(weak_residual(path3, [2.0, 2.0, 2.0], 2.0, np.zeros(2), path3.boundary_map), 0.0)
    with pytest.raises(IncompatibleData):
        weak_residual(path3, np.zeros(3), 2.0, np.array([1.0, -0.5]), path3.boundary_map)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_path_neumann_oracle(p):
    g = path_graph(p)
    f = np.array([1.0, -1.0])
    rep = solve_neumann(g, p, f, g.boundary_map)
    assert isinstance(rep, SolveReport)
    # the 3x3 linear system (p = 2) and the scalar flux balance (any p) give (1, 0, -1)
    L = np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1.0]])
    ref = np.linalg.lstsq(L, [1.0, 0.0, -1.0], rcond=None)[0]
    ref -= np.dot(ref, g.vertex_measure()) / g.vertex_measure().sum()
    assert np.allclose(ref, [1, 0, -1])
    assert np.allclose(rep.u, [1.0, 0.0, -1.0], atol=1e-9)
    assert rep.normalization == "mean_zero"


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_path_dirichlet_middle(p):
    g = path_graph(p)
    rep = solve_dirichlet(g, p, {0: 0.0, 2: 1.0})
    assert rep.u[1] == pytest.approx(0.5, abs=1e-9)
    flat = solve_dirichlet(g, p, {0: 3.0, 2: 3.0})
    assert np.allclose(flat.u, 3.0)


def test_flux_pairing_path(path3):
    rep = solve_neumann(path3, 2.0, np.array([1.0, -1.0]), path3.boundary_map)
    flux = flux_pairing(path3, rep.u, 2.0, k=1)
    assert np.allclose(flux, [-1.0, 1.0], atol=1e-9)
    assert np.allclose(flux_pairing(path3, np.full(3, 4.0), 2.0, k=1), 0.0)


@pytest.mark.parametrize("p", PS)
def test_dirichlet_matches_scipy(p):
    g = filling("cycle(4)", 2, p)
    rng = np.random.default_rng(1)
    top = g.level_vertices(2)
    fixed = {int(v): float(x) for v, x in zip(top, rng.uniform(-1, 1, len(top)))}
    rep = solve_dirichlet(g, p, fixed)
    ref = oracles.minimize_graph_energy([tuple(e) for e in g.edges], g.conductance(p), p, g.n_vertices, fixed)
    assert np.allclose(rep.u, ref, atol=1e-5)


@pytest.mark.parametrize("p", PS)
def test_neumann_matches_scipy(p):
    g = filling("cycle(4)", 2, p)
    f = np.array([1.0, -0.5, 0.25, -0.75])
    rep = solve_neumann(g, p, f, g.boundary_map, normalization="anchored")
    load = g.boundary_map.load(f, g.n_vertices)
    ref = oracles.minimize_graph_energy([tuple(e) for e in g.edges], g.conductance(p), p, g.n_vertices, load=load)
    assert np.allclose(rep.u, ref, atol=1e-5)
    # the solution also wins against small perturbations of the objective
    best = neumann_objective(g, rep.u, p, f, g.boundary_map)
    for _ in range(20):
        v = rep.u + 1e-3 * np.random.default_rng(_).normal(size=g.n_vertices)
        assert neumann_objective(g, v, p, f, g.boundary_map) >= best - 1e-12


@pytest.mark.parametrize("name,depth", FIXTURES)
@pytest.mark.parametrize("p", PS)
def test_weak_residual_at_solution(name, depth, p, rng):
    g = filling(name, depth, p)
    for _ in range(3):
        f = random_data(rng, g)
        rep = solve_neumann(g, p, f, g.boundary_map)
        r = weak_residual(g, rep.u, p, f, g.boundary_map)
        assert np.abs(r).max() < 1e-8 * (1 + np.abs(f).max())
        assert np.dot(rep.u, g.vertex_measure()) == pytest.approx(0.0, abs=1e-12 * (1 + np.abs(rep.u).max()))


@pytest.mark.parametrize("p", PS)
def test_zero_data(p):
    g = filling("cycle(16)", 5, p)
    rep = solve_neumann(g, p, np.zeros(16), g.boundary_map)
    assert np.all(rep.u == 0)


def test_incompatible_raises():
    g = filling("cycle(4)", 2)
    f = np.array([1.0, 1.0, 0.0, 0.0])  # sum f w = 0.5
    with pytest.raises(IncompatibleData):
        solve_neumann(g, 2.0, f, g.boundary_map)


@pytest.mark.parametrize("p", PS)
def test_homogeneity(p, rng):
    g = filling("cycle(16)", 5, p)
    f = random_data(rng, g)
    u = solve_neumann(g, p, f, g.boundary_map).u
    for lam in (0.1, 10.0):
        v = solve_neumann(g, p, lam * f, g.boundary_map).u
        assert np.allclose(v, lam ** (1 / (p - 1)) * u, rtol=0, atol=1e-6 * np.abs(v).max())


def test_linearity_p2(rng):
    g = filling("cycle(16)", 5)
    f1, f2 = random_data(rng, g), random_data(rng, g)
    u1, u2, u12 = (solve_neumann(g, 2.0, f, g.boundary_map).u for f in (f1, f2, f1 + f2))
    assert np.abs(u12 - u1 - u2).max() < 1e-10


@pytest.mark.parametrize("p", PS)
def test_uniqueness_from_random_starts(p, rng):
    g = filling("cycle(16)", 5, p)
    f = random_data(rng, g)
    a = solve_neumann(g, p, f, g.boundary_map, x0=rng.normal(size=g.n_vertices)).u
    b = solve_neumann(g, p, f, g.boundary_map, x0=rng.normal(size=g.n_vertices)).u
    assert np.abs(a - b).max() < (1e-6 if p == 2 else 1e-5)


@pytest.mark.parametrize("name,depth", FIXTURES[1:])
@pytest.mark.parametrize("p", PS)
def test_energy_control(name, depth, p, rng):
    g = filling(name, depth, p)
    q = p / (p - 1)
    ratios = []
    for _ in range(20):
        f = random_data(rng, g)
        u = solve_neumann(g, p, f, g.boundary_map).u
        fnorm = np.sum(np.abs(f) ** q * g.boundary_map.weight) ** (1 / q)
        ratios.append(p_energy(g, u, p) ** (1 / q) / fnorm)
    ratios = np.array(ratios)
    assert np.all(np.isfinite(ratios)) and np.all(ratios > 0)
    assert ratios.max() / ratios.min() < 10


@pytest.mark.parametrize("name,depth", FIXTURES)
@pytest.mark.parametrize("p", PS)
def test_total_flux_vanishes(name, depth, p, rng):
    g = filling(name, depth, p)
    f = random_data(rng, g)
    u = solve_neumann(g, p, f, g.boundary_map).u
    flux = flux_pairing(g, u, p, k=1)
    assert abs(flux.sum()) < 1e-10
    # the entries split the full cutoff pairing
    assert flux.sum() == pytest.approx(eta_pairing(g, u, p, k=1), abs=1e-12)


@pytest.mark.parametrize("p", PS)
def test_maximum_principle_dirichlet(p, rng):
    g = filling("cycle(16)", 5, p)
    top = g.level_vertices(5)
    vals = rng.uniform(-2, 3, len(top))
    u = solve_dirichlet(g, p, dict(zip(top.tolist(), vals))).u
    assert u.min() >= vals.min() and u.max() <= vals.max()


@settings(max_examples=20, deadline=None)
@given(st.floats(1.2, 4.0), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_path_middle_property(p, ends):
    a, b = ends
    g = path_graph(p)
    u = solve_dirichlet(g, p, {0: a, 2: b}).u
    assert u[1] == pytest.approx((a + b) / 2, abs=1e-8 * (1 + abs(a) + abs(b)))
