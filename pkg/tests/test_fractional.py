from types import SimpleNamespace

import numpy as np
import pytest

from fraclap.besov import besov_energy
from fraclap.errors import ConstantInput, DegenerateSpectrum, IncompatibleData, NegativeValues, ParamMismatch
from fraclap.filling import FillingParams
from fraclap.fractional import (
    FractionalProblem,
    anchor_values,
    comparability_report,
    correlation,
    extend,
    extension_harnack,
    form_ET,
    harnack_report,
    holder_fit,
    make_problem,
    max_principle_violation,
    neighbor_laplacian,
    random_mean_zero,
    solve_fractional,
    spectral_reference_p2,
    stability_exponents,
    stability_experiment,
    stability_sweep,
)
from fraclap.graph_calculus import p_energy
from fraclap.harness import fixture
from fraclap.metric_space import load_space
from helpers import FIXTURES, path_graph

PS = [1.5, 2.0, 3.0]


def problem(name="cycle(16)", depth=5, p=2.0, theta=0.5):
    return make_problem(fixture(name), FillingParams(depth=depth, p=p, theta=theta))


def test_param_consistency():
    prob = problem()
    prm = prob.params
    assert prm.theta == 1 - prm.Theta / prm.p
    stale = SimpleNamespace(p=2.0, theta=0.5, Theta=1.5)
    with pytest.raises(ParamMismatch):
        FractionalProblem(prob.space, stale, prob.filling)
    with pytest.raises(IncompatibleData):
        prob.with_data(np.ones(16))


@pytest.mark.parametrize("p", PS)
def test_form_constant_and_sign(p, rng):
    prob = problem(p=p)
    u = random_mean_zero(rng, prob.space.mass)
    assert form_ET(prob, np.full(16, 2.5), u) == pytest.approx(0.0, abs=1e-12)
    assert form_ET(prob, u, u) >= 0


def test_form_homogeneity_p3(rng):
    prob = problem(p=3.0)
    u = random_mean_zero(rng, prob.space.mass)
    lam = 2.0
    lhs = form_ET(prob, lam * u, u)
    assert lhs == pytest.approx(abs(lam) ** (3 - 2) * lam * form_ET(prob, u, u), rel=1e-8)


@pytest.mark.parametrize("p", PS)
def test_form_equals_extension_energy(p, rng):
    prob = problem(p=p)
    u = random_mean_zero(rng, prob.space.mass)
    uh = extend(prob, u).u
    assert form_ET(prob, u, u) == pytest.approx(p_energy(prob.filling, uh, p), rel=1e-10)


def test_anchor_values_are_cell_means():
    s = fixture("cycle(4)")
    prob = make_problem(s, FillingParams(depth=1))
    vals = anchor_values(prob, [4.0, 1.0, 2.0, 1.0])
    g = prob.filling
    assert vals[g.vertex_id(0, 1)] == pytest.approx(2.0)
    assert vals[g.vertex_id(2, 1)] == pytest.approx(2.0)


@pytest.mark.parametrize("name,depth", FIXTURES)
@pytest.mark.parametrize("p", PS)
def test_first_order_condition(name, depth, p, rng):
    prob = problem(name, depth, p)
    s = prob.space
    f = random_mean_zero(rng, s.mass)
    rep = solve_fractional(prob, f)
    u = rep.u
    assert np.dot(u, s.mass) == pytest.approx(0.0, abs=1e-12)
    uh = extend(prob, u).u
    # literal E_T(u, e_z) with the extension of each basis vector
    for z in range(min(s.n_points, 8)):
        ez = np.eye(s.n_points)[z]
        val = form_ET(prob, u, ez, u_ext=uh)
        assert abs(val - f[z] * s.mass[z]) < 1e-7 * (1 + np.abs(f).max())
    assert rep.residual_inf < 1e-7 * (1 + np.abs(f).max())


def test_zero_and_single_point():
    prob = problem()
    assert np.all(solve_fractional(prob, np.zeros(16)).u == 0)
    single = load_space(np.zeros((1, 1)), [1.0])
    sp = make_problem(single, FillingParams(depth=3))
    assert np.all(solve_fractional(sp, [0.0]).u == 0)
    with pytest.raises(IncompatibleData):
        solve_fractional(sp, [1.0])


def test_path_boundary_matches_linear_oracle():
    two = fixture("two_point")
    g = path_graph(2.0, weight=two.mass)
    prob = FractionalProblem(two, g.params, g)
    u = solve_fractional(prob, [1.0, -1.0]).u
    # 3x3 Neumann system with loads (1/2, 0, -1/2), pinned at the middle vertex
    L = np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]])
    x = np.zeros(3)
    keep = [0, 2]
    x[keep] = np.linalg.solve(L[np.ix_(keep, keep)], [0.5, -0.5])
    ref = x[[0, 2]] - np.dot(x[[0, 2]], two.mass)
    assert np.allclose(u, ref, atol=1e-12)
    assert np.allclose(u, [0.5, -0.5])


@pytest.mark.parametrize("p", PS)
def test_uniqueness_and_homogeneity(p, rng):
    prob = problem(p=p)
    f = random_mean_zero(rng, prob.space.mass)
    n = prob.filling.n_vertices
    a = solve_fractional(prob, f, x0=rng.normal(size=n)).u
    b = solve_fractional(prob, f, x0=rng.normal(size=n)).u
    assert np.abs(a - b).max() < (1e-6 if p == 2 else 1e-5)
    for lam in (0.1, 10.0):
        v = solve_fractional(prob, lam * f).u
        assert np.abs(v - lam ** (1 / (p - 1)) * a).max() <= 1e-6 * np.abs(v).max()


def test_comparability_basic():
    prob = problem("cycle(16)", 5)
    rep = comparability_report(prob, n_samples=20, seed=3)
    r = np.array(rep["ratios"])
    assert np.all(np.isfinite(r)) and np.all(r > 0)
    assert rep["spread"] == pytest.approx(r.max() / r.min())
    rng = np.random.default_rng(0)
    u = random_mean_zero(rng, prob.space.mass)
    ratio = lambda w: form_ET(prob, w, w) / besov_energy(prob.space, w, 0.5, 2.0)  # noqa: E731
    assert ratio(-3.0 * u) == pytest.approx(ratio(u), rel=1e-9)
    with pytest.raises(ValueError):
        comparability_report(prob, n_samples=5)


def test_stability_exponents():
    assert stability_exponents(2.0) == (0.5, 0.5)
    assert stability_exponents(3.0) == pytest.approx((1 / 6, 1 / 3))
    assert stability_exponents(1.5) == pytest.approx((1.5, 0.5))


def test_stability_identical_data(rng):
    prob = problem()
    f = random_mean_zero(rng, prob.space.mass)
    rep = stability_experiment(prob, f, f)
    assert rep.solution_distance == 0.0 and rep.constant == 0.0
    assert (rep.kappa, rep.tau) == (0.5, 0.5)


def test_stability_p2_linear(rng):
    prob = problem("cycle(32)", 6)
    base = random_mean_zero(rng, prob.space.mass)
    direction = random_mean_zero(rng, prob.space.mass)
    scales = np.geomspace(1e-3, 1e1, 9)
    reps = stability_sweep(prob, base, direction, scales)
    C = np.array([r.constant for r in reps])
    assert np.all(np.abs(C / np.median(C) - 1) < 1e-6)  # covariant pairs: C is scale free
    # linear solution map: solution distance is L times data distance
    L = np.array([r.solution_distance / r.data_distance for r in reps])
    assert np.ptp(L) < 1e-8 * L.max()
    fixed = stability_sweep(prob, base, direction, scales, mode="perturb")
    gaps = [r.data_distance for r in fixed]
    assert all(a < b for a, b in zip(gaps, gaps[1:]))
    # with a fixed base, C = L gap^(1/2) / size^(1/2) grows like the square root of the gap
    small = slice(0, 5)
    slope = np.polyfit(np.log(gaps[small]), np.log([r.constant for r in fixed][small]), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.02)


def test_holder_lipschitz_segment():
    s = fixture("segment(40)")
    u = 3.0 * s.original_dist[0]
    fit = holder_fit(s, u)
    assert fit["exponent"] == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ConstantInput):
        holder_fit(s, np.ones(40))


def test_holder_on_fractional_solution():
    from fraclap.harness.pinning import bump_data

    prob = problem("cycle(32)", 6)
    u = solve_fractional(prob, bump_data(prob.space)).u
    assert holder_fit(prob, u)["exponent"] > 0


def test_harnack_reports():
    s = fixture("cycle(16)")
    rows = harnack_report(s, np.full(16, 2.0), np.arange(16))
    assert rows and all(r["ratio"] == 1.0 for r in rows)
    u = np.ones(16)
    u[3] = 0.0
    rows = harnack_report(s, u, np.arange(16))
    assert any(r["flagged"] and r["ratio"] == np.inf for r in rows)
    with pytest.raises(NegativeValues):
        harnack_report(s, -np.ones(16), np.arange(16))
    # balls need B(x, 4R) inside the region
    small = harnack_report(s, np.ones(16), np.arange(4))
    assert all(r["R"] <= 1 / 16 for r in small)


@pytest.mark.parametrize("name,depth", FIXTURES)
@pytest.mark.parametrize("p", PS)
def test_extension_harnack(name, depth, p):
    prob = problem(name, depth, p)
    data = np.random.default_rng(4).uniform(0.5, 2.0, prob.space.n_points)
    rep = extension_harnack(prob, data)
    assert rep["worst_ratio"] <= rep["bound"] * (1 + 1e-12)


@pytest.mark.parametrize("name,depth", FIXTURES)
@pytest.mark.parametrize("p", PS)
def test_maximum_principle(name, depth, p):
    prob = problem(name, depth, p)
    data = np.random.default_rng(6).normal(size=prob.space.n_points)
    assert max_principle_violation(prob, data) == 0.0


def test_spectral_reference():
    s = fixture("cycle(16)")
    assert np.all(spectral_reference_p2(s, np.zeros(16), 0.5).values == 0)
    f = random_mean_zero(np.random.default_rng(8), s.mass)
    u = spectral_reference_p2(s, f, 1.0).values
    K = neighbor_laplacian(s)
    assert np.allclose(K @ u, s.mass * f, atol=1e-10)
    assert np.dot(u, s.mass) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DegenerateSpectrum):
        spectral_reference_p2(fixture("cantor_like(2)"), random_mean_zero(np.random.default_rng(1), np.full(8, 1 / 8)), 0.5, radius=0.05)


def test_spectral_correlation_positive():
    from fraclap.harness.pinning import bump_data

    prob = problem("cycle(32)", 6)
    f = bump_data(prob.space)
    u = solve_fractional(prob, f).u
    ref = spectral_reference_p2(prob.space, f, 0.5).values
    assert correlation(u, ref, prob.space.mass) > 0.9


def test_correlation_basics():
    a = np.array([1.0, 2.0, 3.0])
    assert correlation(a, 2 * a + 1) == pytest.approx(1.0)
    assert correlation(a, -a) == pytest.approx(-1.0)
