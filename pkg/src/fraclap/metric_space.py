"""Finite metric measure spaces (Z, d, nu), separated nets and doubling probes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    EmptySpace,
    FracLapError,
    NonPositiveMass,
    NonSymmetric,
    TriangleViolation,
)

TRIANGLE_TOL = 1e-12
# diameter after rescaling, for inputs whose diameter is >= 1
RESCALED_DIAM = 0.5


class DegenerateMetric(FracLapError):
    code = "DegenerateMetric"


@dataclass(frozen=True, eq=False)
class FiniteMetricMeasureSpace:
    """A validated finite metric measure space with diameter < 1.

    ``dist`` is in normalized units; ``scale`` is the factor that was applied to
    the raw input, so ``dist / scale`` recovers the user's units.
    """

    dist: np.ndarray
    mass: np.ndarray
    scale: float = 1.0
    labels: Optional[tuple] = None
    diam: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "diam", float(self.dist.max()) if self.dist.size else 0.0)
        self.dist.setflags(write=False)
        self.mass.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.mass)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    @property
    def original_dist(self) -> np.ndarray:
        return self.dist / self.scale

    @property
    def q_lower(self) -> float:
        return doubling_report(self)["q_lower"]

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.dist, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.mass, dtype="<f8").tobytes())
        h.update(repr(float(self.scale)).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class NetHierarchy:
    alpha: float
    levels: tuple  # tuple of sorted int arrays S_0, S_1, ..., S_N

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def _looks_like_matrix(a: np.ndarray) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.all(np.diag(a) == 0)


def load_space(data, masses, *, kind="auto", labels=None) -> FiniteMetricMeasureSpace:
    """Validate raw input and return a space rescaled so that diam < 1.

    ``data`` is either an (n, k) coordinate table, whose distances are Euclidean,
    or an (n, n) distance matrix. With ``kind="auto"`` a square array with a zero
    diagonal is read as a matrix.
    """
    a = np.asarray(data, dtype=np.float64)
    m = np.asarray(masses, dtype=np.float64).ravel()
    if a.size == 0 or m.size == 0:
        raise EmptySpace("space has no points")
    if a.ndim == 1:
        a = a[:, None]
    if kind == "auto":
        kind = "matrix" if _looks_like_matrix(a) else "points"
    if kind == "points":
        diff = a[:, None, :] - a[None, :, :]
        d = np.sqrt((diff**2).sum(axis=-1))
    elif kind == "matrix":
        d = a.copy()
    else:
        raise ValueError(f"unknown kind {kind!r}")

    n = d.shape[0]
    if d.shape != (n, n):
        raise NonSymmetric(f"distance matrix has shape {d.shape}")
    if m.shape[0] != n:
        raise ValueError(f"{m.shape[0]} masses for {n} points")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise NonPositiveMass("all masses must be finite and strictly positive")
    if not np.all(np.isfinite(d)):
        raise DegenerateMetric("distances must be finite")
    if np.abs(d - d.T).max() > TRIANGLE_TOL:
        raise NonSymmetric("distance matrix is not symmetric")
    d = 0.5 * (d + d.T)
    if np.any(np.diag(d) != 0):
        raise DegenerateMetric("nonzero distance on the diagonal")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] <= 0):
        raise DegenerateMetric("distinct points at distance <= 0")
    check_triangle(d)

    diam = float(d.max())
    scale = 1.0
    if diam >= 1.0:
        scale = RESCALED_DIAM / diam
        d = d * scale
    if labels is not None:
        labels = tuple(labels)
    return FiniteMetricMeasureSpace(dist=d, mass=m.copy(), scale=scale, labels=labels)


def check_triangle(d: np.ndarray, tol: float = TRIANGLE_TOL) -> None:
    n = d.shape[0]
    for k in range(n):
        bound = d[:, k, None] + d[None, k, :]
        bad = d > bound + tol
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise TriangleViolation(
                f"d({i},{j})={d[i, j]:.17g} > d({i},{k})+d({k},{j})={bound[i, j]:.17g}"
            )


def read_points_csv(path, mass_column="mass") -> FiniteMetricMeasureSpace:
    """Coordinates in columns x1..xk plus a mass column."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise EmptySpace(f"{path} has no rows")
    coord_cols = sorted(
        (c for c in rows[0] if c.startswith("x") and c[1:].isdigit()), key=lambda c: int(c[1:])
    )
    pts = np.array([[float(r[c]) for c in coord_cols] for r in rows])
    masses = np.array([float(r[mass_column]) for r in rows])
    labels = [r["label"] for r in rows] if "label" in rows[0] else None
    return load_space(pts, masses, kind="points", labels=labels)


def read_matrix_csv(matrix_path, mass_path) -> FiniteMetricMeasureSpace:
    d = np.loadtxt(matrix_path, delimiter=",", ndmin=2)
    masses = np.loadtxt(mass_path, delimiter=",", ndmin=1)
    return load_space(d, masses, kind="matrix")


def ball_mass(space: FiniteMetricMeasureSpace, center_index: int, r: float) -> float:
    """nu of the open ball B(center, r)."""
    return float(space.mass[space.dist[center_index] < r].sum())


def ball_mass_table(space: FiniteMetricMeasureSpace, radii) -> np.ndarray:
    """Matrix M[x, k] = nu(B(x, radii[k])) for every point x."""
    radii = np.asarray(radii, dtype=np.float64)
    order = np.argsort(space.dist, axis=1, kind="stable")
    sorted_d = np.take_along_axis(space.dist, order, axis=1)
    cum = np.concatenate(
        [np.zeros((space.n_points, 1)), np.cumsum(space.mass[order], axis=1)], axis=1
    )
    out = np.empty((space.n_points, len(radii)))
    for x in range(space.n_points):
        idx = np.searchsorted(sorted_d[x], radii, side="left")
        out[x] = cum[x, idx]
    return out


def greedy_net_hierarchy(space: FiniteMetricMeasureSpace, alpha: float, depth: int) -> NetHierarchy:
    """Nested maximal alpha^-n separated sets, greedy in ascending index order.

    Each level starts from the previous one and scans the remaining points by
    index, keeping a point iff it is at distance >= alpha^-n from everything
    kept so far.
    """
    if alpha <= 1:
        raise ValueError("alpha must be > 1")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    d = space.dist
    levels = []
    current: list[int] = []
    for n in range(depth + 1):
        sep = alpha ** (-n)
        chosen = np.zeros(space.n_points, dtype=bool)
        chosen[current] = True
        for x in range(space.n_points):
            if chosen[x]:
                continue
            members = np.flatnonzero(chosen)
            if members.size == 0 or np.all(d[x, members] >= sep):
                chosen[x] = True
        current = list(np.flatnonzero(chosen))
        levels.append(np.flatnonzero(chosen))
    for lv in levels:
        lv.setflags(write=False)
    return NetHierarchy(alpha=float(alpha), levels=tuple(levels))


def check_net_hierarchy(space: FiniteMetricMeasureSpace, nets: NetHierarchy) -> list[str]:
    """Exhaustive separation, maximality and nesting check; returns failures."""
    failures = []
    d = space.dist
    if len(nets.levels[0]) != 1:
        failures.append("S_0 is not a singleton")
    for n, lv in enumerate(nets.levels):
        sep = nets.alpha ** (-n)
        sub = d[np.ix_(lv, lv)]
        off = ~np.eye(len(lv), dtype=bool)
        if np.any(sub[off] < sep):
            failures.append(f"S_{n} is not {sep:g}-separated")
        if np.any(d[:, lv].min(axis=1) >= sep):
            failures.append(f"S_{n} is not maximal")
        if n > 0 and not np.isin(nets.levels[n - 1], lv).all():
            failures.append(f"S_{n - 1} is not contained in S_{n}")
    return failures


def realized_radii(space: FiniteMetricMeasureSpace) -> np.ndarray:
    iu = np.triu_indices(space.n_points, k=1)
    return np.unique(space.dist[iu])


def doubling_report(space: FiniteMetricMeasureSpace) -> dict:
    """Empirical doubling constant and lower-mass-bound exponent.

    Both are evaluated on radii drawn from the realized pairwise distances.
    ``q_lower`` is the least Q with (1/2)(r/R)^Q <= nu(B(y,r))/nu(B(x,R)) for all
    x, 0 < r < R and y in B(x, R).
    """
    if space.n_points == 0:
        raise EmptySpace("empty space")
    radii = realized_radii(space)
    if radii.size == 0:
        return {"constant": 1.0, "q_lower": 0.0}
    m_r = ball_mass_table(space, radii)
    m_2r = ball_mass_table(space, 2.0 * radii)
    constant = float(max(1.0, (m_2r / m_r).max()))

    q = 0.0
    d = space.dist
    for x in range(space.n_points):
        for K in range(1, len(radii)):
            inside = d[x] < radii[K]
            worst = m_r[inside, :K].min(axis=0)  # min over y of nu(B(y, r_k))
            ratio = 2.0 * worst / m_r[x, K]
            need = ratio < 1.0
            if need.any():
                qs = np.log(ratio[need]) / np.log(radii[:K][need] / radii[K])
                q = max(q, float(qs.max()))
    return {"constant": constant, "q_lower": q}


def neighbor_radius(space: FiniteMetricMeasureSpace, alpha: float = 2.0) -> float:
    """alpha times the largest nearest-neighbor spacing (normalized units).

    With this radius every point has at least one neighbor, so the neighbor
    graph of a chain-connected space is connected.
    """
    if space.n_points < 2:
        return 0.0
    d = space.dist + np.diag(np.full(space.n_points, np.inf))
    return float(alpha * d.min(axis=1).max())


def neighbor_pairs(space: FiniteMetricMeasureSpace, alpha: float = 2.0, radius: Optional[float] = None):
    """Index pairs i < j with d(i, j) < radius, and their normalized distances."""
    r = neighbor_radius(space, alpha) if radius is None else radius
    i, j = np.triu_indices(space.n_points, k=1)
    keep = space.dist[i, j] < r
    return np.column_stack([i[keep], j[keep]]), space.dist[i[keep], j[keep]]
