"""Hyperbolic filling of a finite metric measure space.

The filling is the graph on V = union of S_n x {n} built from a nested net
hierarchy. It is uniformized with the density exp(-eps * t), t being the
combinatorial distance to the root, and carries the lifted edge measure
mu_beta. The finest level N stands in for the boundary Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DisconnectedFilling, ParamMismatch
from .metric_space import FiniteMetricMeasureSpace, NetHierarchy, ball_mass_table, greedy_net_hierarchy

VERTICAL, HORIZONTAL = 0, 1
KIND_NAMES = ("vertical", "horizontal")


@dataclass(frozen=True)
class FillingParams:
    alpha: float = 2.0
    tau: float = 1.5
    depth: int = 5
    p: float = 2.0
    theta: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "tau", "p", "theta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if int(self.depth) != self.depth:
            raise ValueError("depth must be an integer >= 1")
        object.__setattr__(self, "depth", int(self.depth))
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if not self.tau > 1:
            raise ValueError("tau must be > 1")
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError("depth must be an integer >= 1")
        if not self.p > 1:
            raise ValueError("p must be > 1")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")

    @property
    def epsilon(self) -> float:
        return math.log(self.alpha)

    @property
    def beta(self) -> float:
        return self.epsilon * self.p * (1.0 - self.theta)

    @property
    def Theta(self) -> float:
        return self.p * (1.0 - self.theta)

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with per-edge length and per-edge measure.

    Edge e = (a, b) has conductance mu_e / len_e**p for the p-energy.
    """

    n_vertices: int
    edges: np.ndarray
    unif_length: np.ndarray
    edge_measure: np.ndarray

    def conductance(self, p: float) -> np.ndarray:
        return self.edge_measure / self.unif_length**p

    def vertex_measure(self) -> np.ndarray:
        """Each vertex receives half the measure of its incident edges."""
        half = 0.5 * self.edge_measure
        return np.bincount(self.edges[:, 0], half, self.n_vertices) + np.bincount(
            self.edges[:, 1], half, self.n_vertices
        )

    def incidence(self) -> sparse.csr_matrix:
        """Signed incidence D with (D u)_e = u[a] - u[b]."""
        m = len(self.edges)
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.ravel()
        vals = np.tile([1.0, -1.0], m)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(m, self.n_vertices))

    def length_matrix(self) -> sparse.csr_matrix:
        a, b = self.edges[:, 0], self.edges[:, 1]
        w = sparse.coo_matrix((self.unif_length, (a, b)), shape=(self.n_vertices,) * 2)
        return (w + w.T).tocsr()


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    """Anchor vertex and nu-weight for every point z of Z."""

    anchor: np.ndarray  # vertex id per point of Z
    weight: np.ndarray  # nu(z) per point of Z

    def anchor_weight(self, n_vertices: int) -> np.ndarray:
        """Voronoi weight aggregated onto anchor vertices."""
        return np.bincount(self.anchor, self.weight, n_vertices)

    def load(self, f, n_vertices: int) -> np.ndarray:
        """Vertex load b(v) = sum of f(z) w(z) over the z anchored at v."""
        return np.bincount(self.anchor, np.asarray(f, dtype=float) * self.weight, n_vertices)

    def trace(self, u_vertices) -> np.ndarray:
        return np.asarray(u_vertices)[self.anchor]


@dataclass(frozen=True, eq=False)
class FillingGraph(WeightedGraph):
    vertex_point: np.ndarray = None
    vertex_level: np.ndarray = None
    edge_kind: np.ndarray = None
    root: int = 0
    hyp_dist_to_root: np.ndarray = None
    params: FillingParams = None
    boundary_map: Optional[BoundaryMap] = None
    vertex_index: dict = field(default=None, repr=False)

    @property
    def depth(self) -> int:
        return self.params.depth

    def level_vertices(self, n: int) -> np.ndarray:
        return np.flatnonzero(self.vertex_level == n)

    def vertex_id(self, point: int, level: int) -> int:
        return self.vertex_index[(int(point), int(level))]


def build_filling(space: FiniteMetricMeasureSpace, nets: NetHierarchy, params: FillingParams) -> FillingGraph:
    """Vertices and edges of the filling, with combinatorial root distances.

    (x, n) ~ (y, n+1) iff d(x, y) < alpha^-n + alpha^-(n+1), and
    (x, n) ~ (y, n) iff d(x, y) < 2 tau alpha^-n.
    Lengths and measures are left at 1 until uniformize/lift_measure run.
    """
    if not math.isclose(nets.alpha, params.alpha) or nets.depth != params.depth:
        raise ParamMismatch(
            f"nets (alpha={nets.alpha}, depth={nets.depth}) do not match "
            f"params (alpha={params.alpha}, depth={params.depth})"
        )
    a = params.alpha
    d = space.dist
    vp, vl = [], []
    for n, lv in enumerate(nets.levels):
        vp.extend(int(x) for x in lv)
        vl.extend([n] * len(lv))
    vertex_point = np.array(vp, dtype=np.int64)
    vertex_level = np.array(vl, dtype=np.int64)
    index = {(p_, l_): i for i, (p_, l_) in enumerate(zip(vp, vl))}
    offsets = np.concatenate([[0], np.cumsum([len(lv) for lv in nets.levels])])

    edge_list, kinds = [], []
    for n, lv in enumerate(nets.levels):
        base = offsets[n]
        sub = d[np.ix_(lv, lv)]
        i, j = np.nonzero(np.triu(sub < 2.0 * params.tau * a ** (-n), k=1))
        edge_list.append(np.column_stack([base + i, base + j]))
        kinds.append(np.full(len(i), HORIZONTAL))
        if n < params.depth:
            nxt = nets.levels[n + 1]
            cross = d[np.ix_(lv, nxt)] < a ** (-n) + a ** (-(n + 1))
            i, j = np.nonzero(cross)
            edge_list.append(np.column_stack([base + i, offsets[n + 1] + j]))
            kinds.append(np.full(len(i), VERTICAL))
    edges = np.concatenate(edge_list).astype(np.int64)
    kind = np.concatenate(kinds).astype(np.int64)
    edges.sort(axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges, kind = edges[order], kind[order]

    nv = len(vertex_point)
    ones = np.ones(len(edges))
    adj = sparse.coo_matrix((ones, (edges[:, 0], edges[:, 1])), shape=(nv, nv))
    n_comp, _ = csgraph.connected_components(adj, directed=False)
    if n_comp != 1:
        raise DisconnectedFilling(f"filling has {n_comp} components; nets are inconsistent")
    root = index[(int(nets.levels[0][0]), 0)]
    t = csgraph.shortest_path(adj, directed=False, unweighted=True, indices=root).astype(np.int64)
    return FillingGraph(
        n_vertices=nv,
        edges=edges,
        unif_length=ones.copy(),
        edge_measure=ones.copy(),
        vertex_point=vertex_point,
        vertex_level=vertex_level,
        edge_kind=kind,
        root=root,
        hyp_dist_to_root=t,
        params=params,
        vertex_index=index,
    )


def uniformize(graph: FillingGraph, params: FillingParams) -> FillingGraph:
    """Edge length: trapezoid rule for exp(-eps t) along a unit edge."""
    t = graph.hyp_dist_to_root
    dens = np.exp(-params.epsilon * t)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    return replace(graph, unif_length=0.5 * (dens[a] + dens[b]))


def lift_measure(space: FiniteMetricMeasureSpace, graph: FillingGraph, params: FillingParams) -> FillingGraph:
    """Edge measure: each half edge carries exp(-beta t) nu(B(x, alpha^-n)) of its endpoint."""
    levels = np.unique(graph.vertex_level)
    radii = params.alpha ** (-levels.astype(float))
    table = ball_mass_table(space, radii)
    ball = table[graph.vertex_point, np.searchsorted(levels, graph.vertex_level)]
    half = np.exp(-params.beta * graph.hyp_dist_to_root) * ball
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    return replace(graph, edge_measure=0.5 * (half[a] + half[b]))


def attach_boundary(space: FiniteMetricMeasureSpace, graph: FillingGraph) -> BoundaryMap:
    """Anchor every z in Z at its nearest level-N vertex (ties: lowest point index)."""
    top = graph.level_vertices(graph.depth)
    top_points = graph.vertex_point[top]
    order = np.argsort(top_points, kind="stable")
    top, top_points = top[order], top_points[order]
    nearest = np.argmin(space.dist[:, top_points], axis=1)  # first minimum = lowest index
    return BoundaryMap(anchor=top[nearest], weight=space.mass.copy())


def make_filling(space: FiniteMetricMeasureSpace, params: FillingParams, nets: NetHierarchy = None) -> FillingGraph:
    """Run the full pipeline: nets, graph, uniformization, measure, boundary."""
    if nets is None:
        nets = greedy_net_hierarchy(space, params.alpha, params.depth)
    g = build_filling(space, nets, params)
    g = uniformize(g, params)
    g = lift_measure(space, g, params)
    return replace(g, boundary_map=attach_boundary(space, g))


def graph_distances(graph: WeightedGraph, sources) -> np.ndarray:
    """Shortest-path distances under the uniformized edge lengths."""
    return csgraph.dijkstra(graph.length_matrix(), directed=False, indices=sources)


def horizontal_free_depth(space: FiniteMetricMeasureSpace, alpha: float = 2.0, tau: float = 1.5) -> int:
    """First level n with 2 tau alpha^-n at or below the smallest nonzero distance.

    From this level down no two points of Z share a horizontal edge, and each
    anchor hangs from the rest of the filling by a purely vertical path.
    """
    if space.n_points == 1:
        return 1
    dmin = space.dist[~np.eye(space.n_points, dtype=bool)].min()
    return max(1, math.ceil(math.log(2 * tau / dmin, alpha) - 1e-12))


def root_distance_bound(alpha: float) -> float:
    return (1 + 1 / alpha) / (2 * (1 - 1 / alpha))


def codimension_check(space: FiniteMetricMeasureSpace, graph: FillingGraph, params: FillingParams) -> dict:
    """Ratios nu(B_Z(z, r)) r^Theta / mu_beta(B_eps(anchor(z), r)) for r = alpha^-k, k = 1..N-1.

    The filling is read as a metric graph: edge e carries mu_e spread evenly
    along its length, and the part of e at distance < r from the anchor has
    length min(l_e, (r - d_a)^+ + (r - d_b)^+).
    """
    bmap = graph.boundary_map
    anchors, inv = np.unique(bmap.anchor, return_inverse=True)
    dist = np.atleast_2d(graph_distances(graph, anchors))
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    density = graph.edge_measure / graph.unif_length
    ks = np.arange(1, params.depth)
    radii = params.alpha ** (-ks.astype(float))
    nu_ball = ball_mass_table(space, radii)
    rows = []
    for z in range(space.n_points):
        dz = dist[inv[z]]
        for k, r in zip(ks, radii):
            inside = np.minimum(graph.unif_length, np.maximum(r - dz[a], 0) + np.maximum(r - dz[b], 0))
            mu = float(np.dot(density, inside))
            rows.append((z, int(k), float(r), float(nu_ball[z, k - 1] * r**params.Theta / mu)))
    ratios = np.array([r[3] for r in rows]) if rows else np.array([np.nan])
    return {
        "ratio_min": float(ratios.min()),
        "ratio_max": float(ratios.max()),
        "spread": float(ratios.max() / ratios.min()),
        "rows": rows,
    }


def check_filling(space: FiniteMetricMeasureSpace, graph: FillingGraph) -> list[str]:
    """Exhaustive check of the edge rules and the measure invariants."""
    failures = []
    prm = graph.params
    d = space.dist
    edge_set = {(int(a), int(b)) for a, b in graph.edges}
    for i in range(graph.n_vertices):
        for j in range(i + 1, graph.n_vertices):
            n, m = graph.vertex_level[i], graph.vertex_level[j]
            dxy = d[graph.vertex_point[i], graph.vertex_point[j]]
            if abs(n - m) == 1:
                want = dxy < prm.alpha ** (-n) + prm.alpha ** (-m)
            elif n == m:
                want = dxy < 2 * prm.tau * prm.alpha ** (-n)
            else:
                want = False
            if want != ((i, j) in edge_set):
                failures.append(f"edge rule violated for vertices {i}, {j}")
    if np.any(graph.unif_length <= 0) or np.any(graph.edge_measure <= 0):
        failures.append("nonpositive length or measure")
    if graph.boundary_map is not None:
        total = graph.boundary_map.anchor_weight(graph.n_vertices).sum()
        if not math.isclose(total, space.total_mass, rel_tol=1e-12):
            failures.append("boundary weights do not sum to nu(Z)")
    bound = root_distance_bound(prm.alpha)
    droot = graph_distances(graph, graph.root)
    if droot[graph.level_vertices(graph.depth)].max() > bound + 1e-12:
        failures.append("uniformized distance to root exceeds bound")
    return failures


def write_graph(path, graph: FillingGraph) -> None:
    """Line-oriented export: V id point level t / E a b kind length measure."""
    lines = ["# V id point_index level t_v", "# E a b kind unif_length edge_measure"]
    for i in range(graph.n_vertices):
        lines.append(f"V {i} {graph.vertex_point[i]} {graph.vertex_level[i]} {graph.hyp_dist_to_root[i]}")
    for (a, b), k, ln, ms in zip(graph.edges, graph.edge_kind, graph.unif_length, graph.edge_measure):
        lines.append(f"E {a} {b} {KIND_NAMES[k]} {float(ln)!r} {float(ms)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> dict:
    verts, edges = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            tok = line.split()
            if tok[0] == "V":
                verts.append((int(tok[1]), int(tok[2]), int(tok[3]), float(tok[4])))
            elif tok[0] == "E":
                edges.append((int(tok[1]), int(tok[2]), tok[3], float(tok[4]), float(tok[5])))
    return {"vertices": verts, "edges": edges}
