"""Besov seminorms and the nonlocal form E_p on a finite space.

All quantities are computed in the user's original distance units
(``space.original_dist``). The kernel is

    K(x, y) = 1 / (nu(B(x, d(x, y))) d(x, y)^(theta p))

and, by default, symmetrized as (K(x, y) + K(y, x)) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantInput, NonConvergence
from .filling import WeightedGraph
from .graph_calculus import (
    DiscreteFunction,
    SolveReport,
    check_compatible,
    minimize_p_energy,
    signed_power,
    weighted_mean,
)
from .metric_space import FiniteMetricMeasureSpace

CONVENTIONS = ("symmetric", "x", "y")


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values: np.ndarray  # zero on the diagonal
    theta: float
    p: float
    convention: str = "symmetric"

    def save(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g",
                   header=f"theta={self.theta!r} p={self.p!r} convention={self.convention}")


def pair_ball_mass(space: FiniteMetricMeasureSpace) -> np.ndarray:
    """B[x, y] = nu(B(x, d(x, y))), open ball, so y itself is excluded."""
    d = space.dist
    order = np.argsort(d, axis=1, kind="stable")
    sorted_d = np.take_along_axis(d, order, axis=1)
    cum = np.concatenate([np.zeros((space.n_points, 1)), np.cumsum(space.mass[order], axis=1)], axis=1)
    out = np.empty_like(d)
    for x in range(space.n_points):
        out[x] = cum[x, np.searchsorted(sorted_d[x], d[x], side="left")]
    return out


def kernel_matrix(space: FiniteMetricMeasureSpace, theta: float, p: float, convention: str = "symmetric") -> KernelMatrix:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    n = space.n_points
    d = space.original_dist
    off = ~np.eye(n, dtype=bool)
    B = pair_ball_mass(space)
    K = np.zeros((n, n))
    K[off] = 1.0 / (B[off] * d[off] ** (theta * p))
    if convention == "y":
        K = K.T.copy()
    elif convention == "symmetric":
        K = 0.5 * (K + K.T)
    return KernelMatrix(values=K, theta=theta, p=p, convention=convention)


def _pair_weights(space, theta, p, convention):
    K = kernel_matrix(space, theta, p, convention).values
    return K * np.outer(space.mass, space.mass)


def besov_energy(space: FiniteMetricMeasureSpace, u, theta: float, p: float, convention: str = "symmetric") -> float:
    """sum over x != y of |u(y) - u(x)|^p K(x, y) nu_x nu_y."""
    u = np.asarray(u, dtype=float)
    diff = u[None, :] - u[:, None]
    return float(np.sum(np.abs(diff) ** p * _pair_weights(space, theta, p, convention)))


def nonlocal_form(space: FiniteMetricMeasureSpace, u, v, theta: float, p: float, convention: str = "symmetric") -> float:
    """E_p(u, v): linear in v, (p-1)-homogeneous in u."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = u[None, :] - u[:, None]
    dv = v[None, :] - v[:, None]
    return float(np.sum(signed_power(du, p - 1.0) * dv * _pair_weights(space, theta, p, convention)))


def nonlocal_gradient(space, u, theta, p, convention="symmetric") -> np.ndarray:
    """Vector of E_p(u, e_z) over the canonical basis e_z."""
    u = np.asarray(u, dtype=float)
    W = _pair_weights(space, theta, p, convention)
    psi = signed_power(u[None, :] - u[:, None], p - 1.0) * W  # psi[x, y] for pair (x, y)
    # d/du_z of sum_{x,y} psi(u_y - u_x)(v_y - v_x) at v = e_z
    return psi.sum(axis=0) - psi.sum(axis=1)


def pair_graph(space, theta, p, convention="symmetric") -> WeightedGraph:
    """Complete graph whose p-energy equals E_p(u, u).

    Each unordered pair carries both ordered terms, hence the factor 2.
    """
    W = _pair_weights(space, theta, p, convention)
    W = 0.5 * (W + W.T)
    i, j = np.triu_indices(space.n_points, k=1)
    return WeightedGraph(
        n_vertices=space.n_points,
        edges=np.column_stack([i, j]).astype(np.int64),
        unif_length=np.ones(len(i)),
        edge_measure=2.0 * W[i, j],
    )


def solve_nonlocal(
    space: FiniteMetricMeasureSpace,
    f,
    theta: float,
    p: float,
    *,
    normalization: str = "mean_zero",
    x0=None,
    tol: float = 1e-10,
) -> SolveReport:
    """Minimize (1/p) E_p(u, u) - sum u f nu.

    p = 2 is a dense solve of the Gram system; other p reuse the smoothed
    Newton scheme on the complete pair graph.
    """
    f = np.asarray(f, dtype=float)
    check_compatible(f, space.mass)
    load = f * space.mass
    n = space.n_points
    scale = 1.0 + float(np.abs(load).max(initial=0.0))
    if n == 1:
        u, it, eps = np.zeros(1), 0, 0.0
    elif p == 2:
        W = _pair_weights(space, theta, p, "symmetric")
        A = 2.0 * (np.diag(W.sum(axis=1)) - W)
        u = np.zeros(n)
        u[1:] = np.linalg.solve(A[1:, 1:], load[1:])
        it, eps = 1, 0.0
    else:
        g = pair_graph(space, theta, p)
        u, _, it, eps, _ = minimize_p_energy(g, p, load, [0], [0.0], x0=x0, tol=tol * scale)
    if normalization == "mean_zero":
        u = u - weighted_mean(u, space.mass)
    elif normalization != "anchored":
        raise ValueError(f"unknown normalization {normalization!r}")
    res = float(np.abs(nonlocal_gradient(space, u, theta, p) - load).max(initial=0.0))
    if res > max(tol * scale, 1e-9 * scale):
        raise NonConvergence(f"first-order residual {res:.3e}", best=u)
    return SolveReport(
        solution=DiscreteFunction(u, "Z"),
        residual_inf=res,
        energy=besov_energy(space, u, theta, p),
        iterations=it,
        normalization=normalization,
        regularizer_used=eps,
    )


def lp_norm(u, mass, p: float) -> float:
    return float(np.sum(np.abs(u) ** p * mass) ** (1.0 / p))


def poincare_ratio(space: FiniteMetricMeasureSpace, u, theta: float, p: float) -> float:
    """||u - u_Z||_p / ||u||_{theta,p}, with u_Z the nu-average."""
    u = np.asarray(u, dtype=float)
    if np.ptp(u) == 0:
        raise ConstantInput("poincare_ratio needs a nonconstant function")
    centered = u - weighted_mean(u, space.mass)
    return lp_norm(centered, space.mass, p) / besov_energy(space, u, theta, p) ** (1.0 / p)
