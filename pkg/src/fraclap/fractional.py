"""The trace form E_T and the fractional p-Laplacian built on a hyperbolic filling.

A function u on Z is extended p-harmonically into the filling with the
level-N anchors fixed to nu-weighted cell means of u. E_T(u, v) is the graph
p-form of the two extensions. Solving (-Delta_p)^theta u = f amounts to a
Neumann problem on the filling, whose trace is u.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from .besov import besov_energy, lp_norm
from .errors import ConstantInput, DegenerateSpectrum, NegativeValues, ParamMismatch
from .filling import FillingGraph, FillingParams, make_filling
from .graph_calculus import (
    DiscreteFunction,
    SolveReport,
    check_compatible,
    divergence,
    edge_differences,
    edge_flux,
    gradient_lp_norm,
    solve_dirichlet,
    solve_neumann,
    weighted_mean,
)
from .metric_space import FiniteMetricMeasureSpace, neighbor_pairs


@dataclass(frozen=True, eq=False)
class FractionalProblem:
    space: FiniteMetricMeasureSpace
    params: FillingParams
    filling: FillingGraph
    f: Optional[DiscreteFunction] = None

    def __post_init__(self):
        prm = self.params
        if not np.isclose(prm.theta, 1.0 - prm.Theta / prm.p, rtol=0, atol=1e-15):
            raise ParamMismatch("theta, Theta and p are inconsistent")
        if self.f is not None:
            check_compatible(self.f.values, self.space.mass)

    @property
    def p(self) -> float:
        return self.params.p

    @property
    def theta(self) -> float:
        return self.params.theta

    def with_data(self, f) -> "FractionalProblem":
        return FractionalProblem(self.space, self.params, self.filling, DiscreteFunction(np.asarray(f, float), "Z"))


def make_problem(space: FiniteMetricMeasureSpace, params: FillingParams, f=None) -> FractionalProblem:
    g = make_filling(space, params)
    data = None if f is None else DiscreteFunction(np.asarray(f, dtype=float), "Z")
    return FractionalProblem(space, params, g, data)


def anchor_values(problem: FractionalProblem, u) -> dict:
    """Map anchor vertex -> nu-weighted mean of u over the points it carries."""
    bmap = problem.filling.boundary_map
    u = np.asarray(u, dtype=float)
    n = problem.filling.n_vertices
    num = np.bincount(bmap.anchor, u * bmap.weight, n)
    den = np.bincount(bmap.anchor, bmap.weight, n)
    used = np.flatnonzero(den > 0)
    return {int(v): float(num[v] / den[v]) for v in used}


def extend(problem: FractionalProblem, u, p: Optional[float] = None, tol: float = 1e-11) -> SolveReport:
    """p-harmonic extension of u into the filling."""
    p = problem.p if p is None else p
    return solve_dirichlet(problem.filling, p, anchor_values(problem, u), tol=tol)


def form_ET(problem: FractionalProblem, u, v, *, u_ext=None, v_ext=None) -> float:
    """E_T(u, v) = sum_e c_e |d u^|^(p-2) d u^ d v^ over the extensions u^, v^."""
    g, p = problem.filling, problem.p
    uh = extend(problem, u).u if u_ext is None else u_ext
    vh = extend(problem, v).u if v_ext is None else v_ext
    return float(np.sum(edge_flux(g, uh, p) * edge_differences(g, vh)))


def form_ET_gradient(problem: FractionalProblem, u, u_ext=None) -> np.ndarray:
    """Vector of E_T(u, e_z) over the points z of Z.

    Uses that the extension is p-harmonic off the anchors, so the pairing
    only sees the anchor divergence; e_z enters an anchor through its cell mean.
    """
    g, p = problem.filling, problem.p
    uh = extend(problem, u).u if u_ext is None else u_ext
    div = divergence(g, edge_flux(g, uh, p))
    bmap = g.boundary_map
    cell = np.bincount(bmap.anchor, bmap.weight, g.n_vertices)
    return div[bmap.anchor] * bmap.weight / cell[bmap.anchor]


def solve_fractional(problem: FractionalProblem, f=None, *, tol: float = 1e-10, x0=None) -> SolveReport:
    """Trace of the filling Neumann solution, nu-mean zero on Z."""
    if f is None:
        if problem.f is None:
            raise ValueError("no data f given")
        f = problem.f.values
    f = np.asarray(f, dtype=float)
    g, p = problem.filling, problem.p
    check_compatible(f, problem.space.mass)
    rep = solve_neumann(g, p, f, g.boundary_map, tol=tol, x0=x0)
    shift = weighted_mean(g.boundary_map.trace(rep.u), problem.space.mass)
    u_ext = rep.u - shift
    u = g.boundary_map.trace(u_ext)
    res = form_ET_gradient(problem, u, u_ext=u_ext) - f * problem.space.mass
    return SolveReport(
        solution=DiscreteFunction(u, "Z"),
        residual_inf=float(np.abs(res).max(initial=0.0)),
        energy=rep.energy,
        iterations=rep.iterations,
        normalization="mean_zero",
        regularizer_used=rep.regularizer_used,
        history=rep.history,
    )


def random_mean_zero(rng: np.random.Generator, mass, size: Optional[int] = None) -> np.ndarray:
    """Gaussian values per point, projected to nu-mean zero."""
    mass = np.asarray(mass, dtype=float)
    shape = (len(mass),) if size is None else (size, len(mass))
    x = rng.standard_normal(shape)
    return x - np.expand_dims(x @ mass / mass.sum(), -1)


def comparability_report(problem: FractionalProblem, n_samples: int = 50, seed: int = 0) -> dict:
    """Extremes of E_T(u, u) / E_p(u, u) over random mean-zero u."""
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        u = random_mean_zero(rng, problem.space.mass)
        uh = extend(problem, u).u
        et = form_ET(problem, u, u, u_ext=uh, v_ext=uh)
        ratios.append(et / besov_energy(problem.space, u, problem.theta, problem.p))
    r = np.array(ratios)
    return {
        "seed": seed,
        "n_samples": n_samples,
        "ratio_min": float(r.min()),
        "ratio_max": float(r.max()),
        "spread": float(r.max() / r.min()),
        "ratios": [float(x) for x in r],
    }


def stability_exponents(p: float) -> tuple[float, float]:
    """(kappa, tau) in dist <= C (|f|+|g|)^kappa |f-g|^tau."""
    if p >= 2:
        return 1.0 / (p * (p - 1.0)), 1.0 / p
    return (3.0 - p) / (2.0 * (p - 1.0)), 0.5


@dataclass
class StabilityReport:
    f1: np.ndarray
    f2: np.ndarray
    solution_distance: float
    data_distance: float
    data_size: float
    kappa: float
    tau: float
    constant: float
    rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "solution_distance": self.solution_distance,
            "data_distance": self.data_distance,
            "data_size": self.data_size,
            "kappa": self.kappa,
            "tau": self.tau,
            "constant": self.constant,
        }


def stability_experiment(problem: FractionalProblem, f1, f2) -> StabilityReport:
    """Compare the filling solutions for two data sets.

    solution_distance is the L^p norm of the edge gradient of the difference
    of the two Neumann solutions; data norms are nu-weighted L^p'.
    """
    p = problem.p
    q = problem.params.p_conj
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    g = problem.filling
    kappa, tau = stability_exponents(p)
    u1 = solve_neumann(g, p, f1, g.boundary_map).u
    u2 = u1 if np.array_equal(f1, f2) else solve_neumann(g, p, f2, g.boundary_map).u
    dist = gradient_lp_norm(g, u1 - u2, p)
    m = problem.space.mass
    size = max(lp_norm(f1, m, q), lp_norm(f2, m, q))
    gap = lp_norm(f1 - f2, m, q)
    const = 0.0 if gap == 0 else dist / (size**kappa * gap**tau)
    return StabilityReport(f1, f2, dist, gap, size, kappa, tau, const)


def stability_sweep(problem: FractionalProblem, base, direction, scales: Sequence[float], mode: str = "covariant") -> list[StabilityReport]:
    """Run stability_experiment over a grid of perturbation sizes s.

    mode="covariant": pairs (s base, s (base + direction)); the whole pair is
    rescaled, which keeps the exponent balance of the bound fixed.
    mode="perturb": pairs (base, base + s direction) with a fixed base.
    """
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    out = []
    for s in scales:
        if mode == "covariant":
            out.append(stability_experiment(problem, s * base, s * (base + direction)))
        elif mode == "perturb":
            out.append(stability_experiment(problem, base, base + s * direction))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return out


def holder_fit(problem, u) -> dict:
    """Least-squares slope of log|u(x) - u(y)| against log d(x, y) over all pairs.

    Pairs with u(x) = u(y) carry no information on the log scale and are left out.
    ``problem`` may be a FractionalProblem or a bare space.
    """
    space = getattr(problem, "space", problem)
    u = np.asarray(u, dtype=float)
    if np.ptp(u) == 0:
        raise ConstantInput("holder_fit needs a nonconstant function")
    i, j = np.triu_indices(space.n_points, k=1)
    gap = np.abs(u[i] - u[j])
    keep = gap > 0
    x = np.log(space.original_dist[i, j][keep])
    y = np.log(gap[keep])
    slope, intercept = np.polyfit(x, y, 1)
    return {"exponent": float(slope), "constant": float(np.exp(intercept)), "intercept": float(intercept),
            "n_pairs": int(keep.sum()), "log_dist": x, "log_gap": y}


def harnack_report(problem, u, region) -> list[dict]:
    """sup/inf of u on every ball B(x, R) with B(x, 4R) inside ``region``.

    Radii run over the realized distances from each center. Entries with
    inf = 0 are reported with ratio inf and flagged.
    """
    space = getattr(problem, "space", problem)
    u = np.asarray(u, dtype=float)
    if u.min() < 0:
        raise NegativeValues(f"min u = {u.min():.3e} < 0")
    region = np.asarray(region)
    if region.dtype != bool:
        region = np.isin(np.arange(space.n_points), region)
    d = space.dist
    rows = []
    for x in np.flatnonzero(region):
        for R in np.unique(d[x][d[x] > 0]):
            if not region[d[x] < 4 * R].all():
                break
            ball = d[x] < R
            hi, lo = float(u[ball].max()), float(u[ball].min())
            flagged = lo == 0
            rows.append({"center": int(x), "R": float(R), "sup": hi, "inf": lo,
                         "ratio": float("inf") if flagged else hi / lo, "flagged": bool(flagged)})
    return rows


def extension_harnack(problem: FractionalProblem, data) -> dict:
    """sup/inf of the extension of positive data over one-hop balls at interior vertices.

    Compared against max(data)/min(data), which bounds every such ratio.
    """
    data = np.asarray(data, dtype=float)
    if data.min() <= 0:
        raise NegativeValues("boundary data must be strictly positive")
    g = problem.filling
    uh = extend(problem, data).u
    fixed = set(anchor_values(problem, data))
    adj = (g.length_matrix() > 0).tolil().rows
    worst = 1.0
    for v in range(g.n_vertices):
        if v in fixed:
            continue
        ball = [v, *adj[v]]
        worst = max(worst, uh[ball].max() / uh[ball].min())
    return {"worst_ratio": float(worst), "bound": float(data.max() / data.min())}


def neighbor_laplacian(space: FiniteMetricMeasureSpace, alpha: float = 2.0, radius=None) -> sparse.csr_matrix:
    """Graph Laplacian on Z with conductance nu_x nu_y / d(x, y)^2 on neighbor pairs."""
    pairs, dist = neighbor_pairs(space, alpha, radius)
    d = dist / space.scale
    c = space.mass[pairs[:, 0]] * space.mass[pairs[:, 1]] / d**2
    n = space.n_points
    W = sparse.coo_matrix((c, (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    W = (W + W.T).tocsr()
    return (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()


def spectral_reference_p2(space: FiniteMetricMeasureSpace, f, theta: float, alpha: float = 2.0, radius=None) -> DiscreteFunction:
    """u = sum over lambda_k > 0 of lambda_k^-theta <f, e_k>_nu e_k.

    (lambda_k, e_k) solve K e = lambda diag(nu) e for the neighbor Laplacian K,
    with e_k orthonormal in the nu-weighted pairing.
    """
    f = np.asarray(f, dtype=float)
    check_compatible(f, space.mass)
    K = neighbor_laplacian(space, alpha, radius)
    if space.n_points > 1:
        ncomp, _ = csgraph.connected_components(K, directed=False)
        if ncomp > 1:
            raise DegenerateSpectrum(f"neighbor graph has {ncomp} components")
    lam, E = linalg.eigh(K.toarray(), np.diag(space.mass))
    pos = lam > 1e-12 * max(1.0, float(lam.max(initial=0.0)))
    coef = E[:, pos].T @ (space.mass * f)
    u = E[:, pos] @ (lam[pos] ** (-theta) * coef)
    return DiscreteFunction(u, "Z")


def correlation(a, b, w=None) -> float:
    """Pearson correlation, optionally nu-weighted."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.ones_like(a) if w is None else np.asarray(w, dtype=float)
    a = a - weighted_mean(a, w)
    b = b - weighted_mean(b, w)
    return float(np.sum(w * a * b) / np.sqrt(np.sum(w * a * a) * np.sum(w * b * b)))


def boundedness_ratio(problem: FractionalProblem, f) -> float:
    """sup |u_f| / ||f||_p' for the nu-mean-zero solution u_f."""
    u = solve_fractional(problem, f).u
    return float(np.abs(u).max() / lp_norm(np.asarray(f, float), problem.space.mass, problem.params.p_conj))


def max_principle_violation(problem: FractionalProblem, data, p=None) -> float:
    """Largest amount by which the extension leaves [min data, max data]; 0 when it holds."""
    uh = extend(problem, data, p).u
    vals = np.array(list(anchor_values(problem, data).values()))
    return float(max(uh.max() - vals.max(), vals.min() - uh.min(), 0.0))
