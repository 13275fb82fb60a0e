"""Sphericalized product Z x (0, inf) with a point at infinity.

The product carries the densities rho(y) = min(1, y^-beta) on lengths and
omega(y) = min(1, y^-2beta) on the measure y^a dnu dy. Lengths use the
midpoint rule for rho; the infinity vertex is joined to the top level by
edges whose lengths come from the closed-form distance to infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import RadiusOutOfRange
from .metric_space import FiniteMetricMeasureSpace, neighbor_pairs

HORIZONTAL, VERTICAL, TO_INFINITY = 0, 1, 2
KIND_NAMES = ("horizontal", "vertical", "infinity")


def density_rho(y, beta_s):
    y = np.asarray(y, dtype=float)
    return np.minimum(1.0, y ** (-beta_s)) if y.ndim else float(min(1.0, y ** (-beta_s)))


def density_omega(y, beta_s):
    y = np.asarray(y, dtype=float)
    return np.minimum(1.0, y ** (-2.0 * beta_s)) if y.ndim else float(min(1.0, y ** (-2.0 * beta_s)))


def dist_to_infinity(y, beta_s):
    """Deformed distance from height y to the point at infinity."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be >= 0")
    b = beta_s
    with np.errstate(divide="ignore"):
        upper = 1.0 / ((b - 1.0) * np.maximum(y, 1.0) ** (b - 1.0))
    out = np.where(y >= 1.0, upper, b / (b - 1.0) - y)
    return float(out) if out.ndim == 0 else out


def geometric_levels(y_max: float, n_levels: int, ratio: float = 1.05) -> np.ndarray:
    """n_levels heights ending at y_max with constant ratio between neighbors."""
    return y_max * ratio ** (np.arange(n_levels) - (n_levels - 1.0))


@dataclass(frozen=True, eq=False)
class ProductGrid:
    base: FiniteMetricMeasureSpace
    y_levels: np.ndarray
    a: float = 0.0
    beta_s: float = 2.0
    alpha: float = 2.0  # neighbor radius factor for the Z-edges

    def __post_init__(self):
        y = np.asarray(self.y_levels, dtype=float)
        if y.ndim != 1 or len(y) < 2 or np.any(y <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("y_levels must be positive and strictly increasing")
        if not -1 < self.a < 1:
            raise ValueError("a must lie in (-1, 1)")
        if not self.beta_s > 1:
            raise ValueError("beta_s must be > 1")
        object.__setattr__(self, "y_levels", y)

    @property
    def theta(self) -> float:
        return (1.0 - self.a) / 2.0

    def cell_bounds(self) -> np.ndarray:
        """Dual cells in y: arithmetic midpoints, outer cells cut at the end levels."""
        y = self.y_levels
        mid = 0.5 * (y[1:] + y[:-1])
        return np.concatenate([[y[0]], mid, [y[-1]]])


@dataclass(frozen=True, eq=False)
class SphericalizedGraph:
    grid: ProductGrid
    n_vertices: int
    edges: np.ndarray
    edge_kind: np.ndarray
    length: np.ndarray
    vertex_mass: np.ndarray
    vertex_point: np.ndarray  # -1 at infinity
    vertex_level: np.ndarray  # -1 at infinity
    infinity: int

    def vertex_id(self, point: int, level: int) -> int:
        return level * self.grid.base.n_points + point

    def vertex_y(self) -> np.ndarray:
        y = np.full(self.n_vertices, np.inf)
        fin = self.vertex_level >= 0
        y[fin] = self.grid.y_levels[self.vertex_level[fin]]
        return y

    def length_matrix(self) -> sparse.csr_matrix:
        a, b = self.edges[:, 0], self.edges[:, 1]
        w = sparse.coo_matrix((self.length, (a, b)), shape=(self.n_vertices,) * 2)
        return (w + w.T).tocsr()

    def distances(self, sources) -> np.ndarray:
        return csgraph.dijkstra(self.length_matrix(), directed=False, indices=sources)


def build_sphericalized(grid: ProductGrid) -> SphericalizedGraph:
    Z = grid.base
    y = grid.y_levels
    nz, ny = Z.n_points, len(y)
    beta = grid.beta_s
    vid = np.arange(nz * ny).reshape(ny, nz)
    inf = nz * ny

    edges, kinds, lengths = [], [], []
    pairs, dz = neighbor_pairs(Z, grid.alpha)
    for j in range(ny):
        if len(pairs):
            edges.append(vid[j][pairs])
            kinds.append(np.full(len(pairs), HORIZONTAL))
            lengths.append(density_rho(np.full(len(pairs), y[j]), beta) * dz)
    mid = 0.5 * (y[1:] + y[:-1])
    dv = density_rho(mid, beta) * np.diff(y)
    for j in range(ny - 1):
        edges.append(np.column_stack([vid[j], vid[j + 1]]))
        kinds.append(np.full(nz, VERTICAL))
        lengths.append(np.full(nz, dv[j]))
    edges.append(np.column_stack([vid[-1], np.full(nz, inf)]))
    kinds.append(np.full(nz, TO_INFINITY))
    lengths.append(np.full(nz, dist_to_infinity(y[-1], beta)))

    bounds = grid.cell_bounds()
    dy = np.diff(bounds)
    level_mass = density_omega(y, beta) * y**grid.a * dy
    mass = np.concatenate([np.outer(level_mass, Z.mass).ravel(), [0.0]])

    return SphericalizedGraph(
        grid=grid,
        n_vertices=inf + 1,
        edges=np.concatenate(edges).astype(np.int64),
        edge_kind=np.concatenate(kinds).astype(np.int8),
        length=np.concatenate(lengths),
        vertex_mass=mass,
        vertex_point=np.concatenate([np.tile(np.arange(nz), ny), [-1]]),
        vertex_level=np.concatenate([np.repeat(np.arange(ny), nz), [-1]]),
        infinity=inf,
    )


def omega_mass_between(y_lo: float, y_hi: float, beta_s: float, a: float) -> float:
    """Closed form of the integral of omega(y) y^a over [y_lo, y_hi] (y_hi may be inf)."""
    def below(u):  # integral of y^a from 0 to min(u, 1)
        return min(u, 1.0) ** (1.0 + a) / (1.0 + a)

    def above(u):  # integral of y^(a - 2 beta) from 1 to max(u, 1)
        k = 2.0 * beta_s - 1.0 - a
        return (1.0 - max(u, 1.0) ** (-k)) / k if np.isfinite(u) else 1.0 / k

    return below(y_hi) - below(y_lo) + above(y_hi) - above(y_lo)


def total_measure_closed_form(beta_s: float, a: float, total_base_mass: float = 1.0) -> float:
    """mu_omega of the whole product Z x (0, inf)."""
    return total_base_mass * omega_mass_between(0.0, np.inf, beta_s, a)


def ball_at_infinity_measure(R: float, beta_s: float, a: float, total_base_mass: float = 1.0) -> float:
    """Closed-form mu_omega mass of the rho-ball of radius R around infinity."""
    if not 0 < R < 1.0 / (beta_s - 1.0):
        raise RadiusOutOfRange(f"R must lie in (0, {1.0 / (beta_s - 1.0):g}), got {R!r}")
    k = (2.0 * beta_s - 1.0 - a) / (beta_s - 1.0)
    return total_base_mass * (beta_s - 1.0) ** k / (2.0 * beta_s - 1.0 - a) * R**k


def discrete_ball_at_infinity(graph: SphericalizedGraph, R: float) -> dict:
    """Graph mu_omega mass of the ball B(inf, R), compared with the closed form.

    ``vertex_count`` sums the masses of vertices at graph distance < R.
    ``fractional`` treats each y-cell as a segment: the graph distance is
    interpolated linearly in y between levels (and to the closed form above
    the top level), and the part of the cell inside the ball is counted.
    """
    grid = graph.grid
    exact = ball_at_infinity_measure(R, grid.beta_s, grid.a, grid.base.total_mass)
    d = graph.distances(graph.infinity)
    plain = float(graph.vertex_mass[d < R].sum())

    y = grid.y_levels
    nz = grid.base.n_points
    dlev = d[: nz * len(y)].reshape(len(y), nz)
    bounds = grid.cell_bounds()
    frac_mass = 0.0
    for x in range(nz):
        # distance profile along the column of x, extended with 0 at infinity
        prof_d = np.concatenate([dlev[:, x], [0.0]])
        inside = prof_d < R
        if not inside[:-1].any():
            continue
        # crossing height: first level (from the top down) where the ball stops
        j = np.flatnonzero(~inside[:-1])
        if j.size == 0:
            y_cross = bounds[0]
        else:
            j = j[-1]
            d0, d1 = dlev[j, x], dlev[j + 1, x]
            y_cross = y[j] + (d0 - R) / (d0 - d1) * (y[j + 1] - y[j])
        lo = np.maximum(bounds[:-1], y_cross)
        hi = bounds[1:]
        share = np.clip((hi - lo) / (hi - bounds[:-1]), 0.0, 1.0)
        cell_mass = graph.vertex_mass[graph.vertex_id(x, 0) + nz * np.arange(len(y))]
        frac_mass += float(np.sum(share * cell_mass))
    return {
        "R": R,
        "closed_form": exact,
        "vertex_count": plain,
        "fractional": frac_mass,
        "rel_error_vertex_count": abs(plain - exact) / exact,
        "rel_error": abs(frac_mass - exact) / exact,
    }


def omega_harnack(graph: SphericalizedGraph, radii=None) -> dict:
    """Largest max(omega)/min(omega) over balls B(v, r) with dist(v, inf) >= 2r.

    The distance to infinity varies by a factor at most 3 over such a ball,
    which caps the ratio at 3^(2 beta / (beta - 1)).
    """
    beta = graph.grid.beta_s
    d_inf = graph.distances(graph.infinity)
    yv = graph.vertex_y()
    om = density_omega(np.where(np.isfinite(yv), yv, 1.0), beta)
    fin = np.flatnonzero(np.isfinite(yv))
    centers = fin[:: max(1, len(fin) // 400)]
    D = np.atleast_2d(graph.distances(centers))
    if radii is None:
        radii = np.geomspace(graph.length.min(), d_inf[fin].max(), 16)
    worst = 1.0
    for ci, v in enumerate(centers):
        for r in radii:
            if d_inf[v] < 2 * r:
                break
            ball = D[ci] < r
            ball[graph.infinity] = False
            worst = max(worst, float(om[ball].max() / om[ball].min()))
    return {"worst_ratio": worst, "bound": 3.0 ** (2 * beta / (beta - 1.0))}


def doubling_constant(graph: SphericalizedGraph, radii, centers=None) -> float:
    """max over centers and radii of mu(B(v, 2r)) / mu(B(v, r)); empty balls are skipped."""
    if centers is None:
        centers = np.flatnonzero(graph.vertex_level >= 0)
    D = np.atleast_2d(graph.distances(centers))
    m = graph.vertex_mass
    worst = 1.0
    for row in D:
        for r in radii:
            inner = m[row < r].sum()
            if inner > 0:
                worst = max(worst, float(m[row < 2 * r].sum() / inner))
    return worst


def john_check(graph: SphericalizedGraph) -> dict:
    """Along each vertical path to infinity, distance to the bottom level vs length traveled.

    Returns the smallest slack dist - traveled and the smallest ratio
    dist / traveled over all starting vertices and all later path vertices.
    """
    grid = graph.grid
    nz, ny = grid.base.n_points, len(grid.y_levels)
    bottom = np.arange(nz)
    d_bottom = graph.distances(bottom).min(axis=0)
    vert = np.concatenate([[0.0], np.cumsum(graph.length[graph.edge_kind == VERTICAL][::nz])])
    top_leg = dist_to_infinity(grid.y_levels[-1], grid.beta_s)
    slack, ratio = np.inf, np.inf
    for x in range(nz):
        col = d_bottom[np.arange(ny) * nz + x]
        col = np.concatenate([col, [d_bottom[graph.infinity]]])
        heights = np.concatenate([vert, [vert[-1] + top_leg]])
        for j in range(ny):
            traveled = heights[j + 1:] - heights[j]
            slack = min(slack, float((col[j + 1:] - traveled).min()))
            ratio = min(ratio, float((col[j + 1:] / traveled).min()))
    return {"min_slack": slack, "min_ratio": ratio}


def write_sphericalized(path, graph: SphericalizedGraph) -> None:
    """Same line format as the filling export; the level column holds the level index
    (-1 for infinity), the t column the height y, and edge measures are endpoint averages."""
    lines = ["# V id point_index level y", "# E a b kind length measure"]
    y = graph.vertex_y()
    for i in range(graph.n_vertices):
        lines.append(f"V {i} {graph.vertex_point[i]} {graph.vertex_level[i]} {float(y[i])!r}")
    m = graph.vertex_mass
    for (a, b), k, ln in zip(graph.edges, graph.edge_kind, graph.length):
        lines.append(f"E {a} {b} {KIND_NAMES[k]} {float(ln)!r} {float(0.5 * (m[a] + m[b]))!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
