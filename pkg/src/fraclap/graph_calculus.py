"""Discrete p-calculus on weighted graphs.

The gradient of u on edge e = (a, b) is the difference quotient
(u[a] - u[b]) / len_e, so the p-energy is sum_e mu_e |du/len_e|^p, i.e.
sum_e c_e |du|^p with conductance c_e = mu_e / len_e^p.

Solvers minimize (1/p) * energy - <load, u>. For p = 2 this is one sparse
SPD solve. Otherwise we run damped Newton on the smoothed energy
sum_e c_e (du^2 + (eps len_e)^2)^(p/2), shrinking eps tenfold per stage
until the exact residual meets the tolerance.
"""

from __future__ import annotations

import warnings

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import IncompatibleData, NonConvergence
from .filling import BoundaryMap, WeightedGraph

FINAL_EPS = 1e-10
MIN_EPS = 1e-60  # keeps the Hessian weights eps^(p-2) finite
FLOOR_FACTOR = 10.0
ARMIJO_C = 1e-4
DIRECT_LIMIT = 50_000


@dataclass
class DiscreteFunction:
    values: np.ndarray
    carrier: str = "filling"

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


@dataclass
class SolveReport:
    solution: DiscreteFunction
    residual_inf: float
    energy: float
    iterations: int
    normalization: str
    regularizer_used: float
    converged: bool = True
    history: list = field(default_factory=list)

    @property
    def u(self) -> np.ndarray:
        return self.solution.values

    def to_dict(self) -> dict:
        return {
            "normalization": self.normalization,
            "energy": float(self.energy),
            "residual_inf": float(self.residual_inf),
            "iterations": int(self.iterations),
            "regularizer_used": float(self.regularizer_used),
            "converged": bool(self.converged),
            "carrier": self.solution.carrier,
            "values": [float(v) for v in self.solution.values],
        }


def signed_power(x, q):
    """sign(x) |x|^q, finite at x = 0 for every q > 0."""
    return np.sign(x) * np.abs(x) ** q


def edge_differences(graph: WeightedGraph, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u[graph.edges[:, 0]] - u[graph.edges[:, 1]]


def p_energy(graph: WeightedGraph, u, p: float) -> float:
    """Dirichlet part of the energy: sum_e mu_e (|du| / len_e)^p."""
    du = edge_differences(graph, u)
    return float(np.sum(graph.edge_measure * (np.abs(du) / graph.unif_length) ** p))


def edge_flux(graph: WeightedGraph, u, p: float) -> np.ndarray:
    """c_e |du|^(p-2) du on every edge."""
    return graph.conductance(p) * signed_power(edge_differences(graph, u), p - 1.0)


def divergence(graph: WeightedGraph, flux) -> np.ndarray:
    """Transpose of the signed incidence applied to an edge field."""
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    n = graph.n_vertices
    return np.bincount(a, flux, n) - np.bincount(b, flux, n)


def check_compatible(f, weight, tol_rel: float = 1e-10) -> None:
    f = np.asarray(f, dtype=float)
    total = float(np.sum(f * weight))
    scale = max(1.0, float(np.sum(np.abs(f) * weight)))
    if abs(total) > tol_rel * scale:
        raise IncompatibleData(f"Neumann data has nonzero total {total:.3e}; need sum f w = 0")


def weak_residual(graph: WeightedGraph, u, p: float, f=None, boundary_map: Optional[BoundaryMap] = None):
    """R(v) = sum_{e at v} c_e |du|^(p-2) du sign(v; e) - (f w)(v).

    Zero everywhere iff u solves the discrete Neumann problem with data f.
    """
    res = divergence(graph, edge_flux(graph, u, p))
    if f is not None:
        check_compatible(f, boundary_map.weight)
        res = res - boundary_map.load(f, graph.n_vertices)
    return res


def weighted_mean(u, w) -> float:
    return float(np.dot(u, w) / np.sum(w))


def _laplacian(graph: WeightedGraph, weights) -> sparse.csr_matrix:
    D = graph.incidence()
    return (D.T @ sparse.diags(weights) @ D).tocsr()


def _linear_solve(A, rhs, direct_limit=DIRECT_LIMIT):
    if A.shape[0] == 0:
        return np.zeros(0)
    if A.shape[0] < direct_limit:
        return np.atleast_1d(splinalg.spsolve(A.tocsc(), rhs))
    diag = A.diagonal()
    M = sparse.diags(1.0 / diag)
    x, info = splinalg.cg(A, rhs, rtol=1e-12, maxiter=10 * A.shape[0], M=M)
    if info != 0:
        raise NonConvergence(f"conjugate gradients stopped with info={info}", best=x)
    return x


class _SmoothedEnergy:
    """(1/p) sum_e c_e (du^2 + (eps len_e)^2)^(p/2) - <load, u>."""

    def __init__(self, graph: WeightedGraph, p, load):
        self.graph = graph
        self.p = p
        self.c = graph.conductance(p)
        self.len2 = graph.unif_length**2
        self.load = load
        self.D = graph.incidence()

    def value(self, u, eps):
        du = self.D @ u
        s = du**2 + eps**2 * self.len2
        return float(np.sum(self.c * s ** (self.p / 2)) / self.p - self.load @ u)

    def gradient(self, u, eps):
        du = self.D @ u
        if eps == 0:
            return self.D.T @ (self.c * signed_power(du, self.p - 1)) - self.load
        s = du**2 + eps**2 * self.len2
        return self.D.T @ (self.c * s ** ((self.p - 2) / 2) * du) - self.load

    def hessian(self, u, eps):
        du = self.D @ u
        s = du**2 + eps**2 * self.len2
        w = self.c * s ** ((self.p - 4) / 2) * ((self.p - 1) * du**2 + eps**2 * self.len2)
        return (self.D.T @ sparse.diags(w) @ self.D).tocsr()


def minimize_p_energy(
    graph: WeightedGraph,
    p: float,
    load,
    fixed_idx,
    fixed_val,
    x0=None,
    tol: float = 1e-11,
    max_iter: int = 400,
    direct_limit: int = DIRECT_LIMIT,
):
    """Minimize (1/p) p_energy(u) - <load, u> with u[fixed_idx] = fixed_val.

    ``tol`` is absolute on the infinity norm of the free-vertex residual.
    Returns (u, residual_inf, iterations, final_eps, history).

    For p != 2 the problem is first rescaled so that u is of order one:
    u = s v turns the load into load / s^(p-1). Without this, small data
    at p < 2 gives solutions far below the smoothing scale.
    """
    load = np.asarray(load, dtype=float)
    fixed_val = np.atleast_1d(np.asarray(fixed_val, dtype=float))
    s = 1.0
    if p != 2:
        spread = float(np.ptp(fixed_val)) if fixed_val.size else 0.0
        c_max = float(graph.conductance(p).max(initial=1.0))
        s = max(spread, (float(np.abs(load).max(initial=0.0)) / c_max) ** (1.0 / (p - 1.0)))
        if not (np.isfinite(s) and 0.0 < s ** (p - 1.0) < np.inf):
            s = 1.0  # zero data, or a scale whose power under/overflows
    k = s ** (p - 1.0)
    try:
        v, res, it, eps, hist = _minimize(
            graph, p, load / k, fixed_idx, fixed_val / s,
            None if x0 is None else np.asarray(x0, dtype=float) / s, tol / k, max_iter, direct_limit,
        )
    except NonConvergence as exc:
        best = None if exc.best is None else s * exc.best
        raise NonConvergence(str(exc.args[0]), best=best) from None
    for h in hist:
        h["scale"] = s
    return s * v, res * k, it, eps, hist


def _minimize(graph, p, load, fixed_idx, fixed_val, x0, tol, max_iter, direct_limit):
    n = graph.n_vertices
    load = np.asarray(load, dtype=float)
    fixed_idx = np.asarray(fixed_idx, dtype=np.int64)
    free = np.ones(n, dtype=bool)
    free[fixed_idx] = False
    base = np.zeros(n)
    base[fixed_idx] = fixed_val

    L2 = _laplacian(graph, graph.conductance(2.0))
    A = L2[free][:, free]
    rhs = (load - L2 @ base)[free]
    if p == 2:
        u = base.copy()
        u[free] = _linear_solve(A, rhs, direct_limit)
        res = weak_free_residual(graph, u, p, load, free)
        return u, res, 1, 0.0, [{"stage_eps": 0.0, "iter": 1, "grad_inf": res}]

    # p = 2 solution of the same data fixes the gradient scale and a default start
    u2 = base.copy()
    u2[free] = _linear_solve(A, rhs, direct_limit)
    gscale = float(np.max(np.abs(edge_differences(graph, u2)) / graph.unif_length, initial=0.0))
    if gscale == 0.0:
        gscale = 1.0
    if x0 is None:
        u = u2
    else:
        u = np.array(x0, dtype=float)
        u[~free] = base[~free]

    energy = _SmoothedEnergy(graph, p, load)
    history = []
    it = 0
    eps = gscale
    res = np.inf
    while it < max_iter:
        # smoothing bias is of order c (eps len)^(p-1) for p < 2, so below
        # FINAL_EPS we keep shrinking eps only while the exact residual is too large
        stage_tol = max(tol, 1e-6 * eps) if eps > FINAL_EPS else 0.1 * tol
        for _ in range(25):
            g = energy.gradient(u, eps)[free]
            gnorm = float(np.abs(g).max(initial=0.0))
            if gnorm <= stage_tol:
                break
            H = energy.hessian(u, eps)[free][:, free]
            step = np.zeros(n)
            step[free] = -_linear_solve(H, g, direct_limit)
            u, t = _armijo(energy, u, eps, g, step[free], free, step)
            it += 1
            history.append({"stage_eps": eps, "iter": it, "grad_inf": gnorm, "step": t})
            if t == 0.0 or it >= max_iter:
                break
        if eps <= FINAL_EPS:
            res = weak_free_residual(graph, u, p, load, free)
            if res <= tol or eps < MIN_EPS:
                break
        eps /= 10.0
    # polish against the exact (eps = 0) residual; for p > 2 a small residual
    # still leaves u loose on nearly flat edges, so keep going while it improves
    extra = 0
    while (res > tol or p > 2) and extra < 20 and it < max_iter:
        H = energy.hessian(u, eps)[free][:, free]
        g = energy.gradient(u, 0)[free]
        step = np.zeros(n)
        with warnings.catch_warnings():
            # a nearly singular Hessian at p > 2 just ends the polish
            warnings.simplefilter("ignore", splinalg.MatrixRankWarning)
            step[free] = -_linear_solve(H, g, direct_limit)
        trial = u + step
        trial_res = weak_free_residual(graph, trial, p, load, free)
        if not trial_res < res:
            break
        u, res = trial, trial_res
        extra += 1
        it += 1
    floor = roundoff_floor(graph, u, p, free)
    if not np.isfinite(res) or res > max(tol, FLOOR_FACTOR * floor):
        raise NonConvergence(f"residual {res:.3e} above tolerance {tol:.3e} after {it} iterations", best=u)
    if history:
        history[-1]["roundoff_floor"] = floor
    return u, res, it, eps, history


def roundoff_floor(graph: WeightedGraph, u, p: float, free=None) -> float:
    """Vertex residual that rounding u to doubles can produce on its own.

    Each difference du is only known to a few ulps delta of the endpoint
    values; for p < 2 the flux c |du|^(p-1) then moves by up to c delta^(p-1).
    """
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    du = np.abs(u[a] - u[b])
    delta = 4.0 * np.spacing(np.maximum(np.abs(u[a]), np.abs(u[b])))
    c = graph.conductance(p)
    if p < 2:
        err = c * delta ** (p - 1.0)
    else:
        err = c * (p - 1.0) * (du + delta) ** (p - 2.0) * delta
    per_vertex = np.bincount(a, err, graph.n_vertices) + np.bincount(b, err, graph.n_vertices)
    if free is not None:
        per_vertex = per_vertex[free]
    return float(per_vertex.max(initial=0.0))


def _armijo(energy, u, eps, g, dfree, free, step):
    f0 = energy.value(u, eps)
    slope = float(g @ dfree)
    slack = 1e-13 * (1.0 + abs(f0))
    t = 1.0
    for _ in range(60):
        trial = u + t * step
        if energy.value(trial, eps) <= f0 + ARMIJO_C * t * slope + slack:
            return trial, t
        t *= 0.5
    return u, 0.0


def weak_free_residual(graph, u, p, load, free) -> float:
    r = divergence(graph, edge_flux(graph, u, p)) - load
    return float(np.abs(r[free]).max(initial=0.0))


def solve_dirichlet(
    graph: WeightedGraph, p: float, fixed: Mapping[int, float], *, x0=None, tol: float = 1e-10, **kw
) -> SolveReport:
    """p-harmonic function agreeing with ``fixed`` (vertex -> value).

    Convergence is declared when the interior residual is below
    tol * (1 + c_max * range^(p-1)).
    """
    if len(fixed) == 0:
        raise ValueError("need at least one fixed vertex")
    idx = np.fromiter(fixed.keys(), dtype=np.int64, count=len(fixed))
    val = np.fromiter(fixed.values(), dtype=float, count=len(fixed))
    spread = float(val.max() - val.min())
    scale = 1.0 + float(graph.conductance(p).max()) * spread ** (p - 1)
    u, res, it, eps, hist = minimize_p_energy(
        graph, p, np.zeros(graph.n_vertices), idx, val, x0=x0, tol=tol * scale, **kw
    )
    # truncation to the data range never raises the energy; it removes roundoff overshoot
    u = np.clip(u, val.min(), val.max())
    return SolveReport(
        solution=DiscreteFunction(u, "filling"),
        residual_inf=res,
        energy=p_energy(graph, u, p),
        iterations=it,
        normalization="anchored",
        regularizer_used=eps,
        history=hist,
    )


def solve_neumann(
    graph: WeightedGraph,
    p: float,
    f,
    boundary_map: BoundaryMap,
    *,
    x0=None,
    tol: float = 1e-10,
    normalization: str = "mean_zero",
    **kw,
) -> SolveReport:
    """Minimizer of p_energy(v) - p sum_z v(anchor z) f(z) w(z).

    The result is normalized to zero mean against the lumped vertex measure
    (``normalization="mean_zero"``) or to value 0 at vertex 0 ("anchored").
    """
    check_compatible(f, boundary_map.weight)
    load = boundary_map.load(f, graph.n_vertices)
    scale = 1.0 + float(np.abs(load).max(initial=0.0))
    u, res, it, eps, hist = minimize_p_energy(graph, p, load, [0], [0.0], x0=x0, tol=tol * scale, **kw)
    if normalization == "mean_zero":
        u = u - weighted_mean(u, graph.vertex_measure())
    elif normalization != "anchored":
        raise ValueError(f"unknown normalization {normalization!r}")
    return SolveReport(
        solution=DiscreteFunction(u, "filling"),
        residual_inf=float(np.abs(divergence(graph, edge_flux(graph, u, p)) - load).max()),
        energy=p_energy(graph, u, p),
        iterations=it,
        normalization=normalization,
        regularizer_used=eps,
        history=hist,
    )


def neumann_objective(graph, u, p, f, boundary_map) -> float:
    """I(v) = p_energy(v) - p sum v f w."""
    return p_energy(graph, u, p) - p * float(boundary_map.load(f, graph.n_vertices) @ np.asarray(u))


def flux_pairing(graph, u, p: float, k: int = 1) -> np.ndarray:
    """Signed flux collected by each level-N vertex for the cutoff eta.

    eta = 1 on levels <= N - k, 0 on level N, linear in the level between.
    The pairing sum_e c_e |du|^(p-2) du d(eta) is split over level-N vertices
    with the partition 1 - eta = sum_x zeta_x, zeta_x supported on the column
    of x (vertices (x, n) with n > N - k). Entry x is
    -sum_e c_e |du|^(p-2) du d(zeta_x); entries sum to the full pairing.
    Returns values in the order of ``graph.level_vertices(N)``.
    """
    N = graph.depth
    if not 1 <= k <= N:
        raise ValueError("cutoff k must satisfy 1 <= k <= depth")
    level = graph.vertex_level
    eta = np.clip((N - level) / k, 0.0, 1.0)
    zeta = 1.0 - eta
    top = graph.level_vertices(N)
    column = np.full(graph.n_vertices, -1)
    slot = {int(graph.vertex_point[v]): i for i, v in enumerate(top)}
    for v in np.flatnonzero(zeta > 0):
        column[v] = slot[int(graph.vertex_point[v])]
    F = edge_flux(graph, u, p)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    out = np.zeros(len(top))
    ma, mb = column[a] >= 0, column[b] >= 0
    np.add.at(out, column[a][ma], -F[ma] * zeta[a][ma])
    np.add.at(out, column[b][mb], F[mb] * zeta[b][mb])
    return out


def eta_pairing(graph, u, p: float, k: int = 1) -> float:
    """Total pairing sum_e c_e |du|^(p-2) du (eta[a] - eta[b])."""
    eta = np.clip((graph.depth - graph.vertex_level) / k, 0.0, 1.0)
    return float(np.sum(edge_flux(graph, u, p) * edge_differences(graph, eta)))


def gradient_lp_norm(graph: WeightedGraph, u, p: float) -> float:
    return p_energy(graph, u, p) ** (1.0 / p)
