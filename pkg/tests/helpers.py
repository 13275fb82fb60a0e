"""Shared fixture builders for the tests."""

import numpy as np

from fraclap.filling import VERTICAL, BoundaryMap, FillingGraph, FillingParams

# (name, depth) pairs exercised by the "all fixtures" properties
FIXTURES = [("two_point", 2), ("cycle(16)", 5), ("cycle(32)", 6), ("cantor_like(3)", 6)]

# criterion number -> one-line verdict, filled by test_acceptance.py
ACCEPTANCE = {}


def path_graph(p=2.0, weight=(1.0, 1.0)) -> FillingGraph:
    """Vertices a - m - b with unit lengths and unit measures, so every c_e = 1.

    a and b sit on level 1 and anchor the two points of a two-point boundary;
    m is the root.
    """
    edges = np.array([[0, 1], [1, 2]])
    return FillingGraph(
        n_vertices=3,
        edges=edges,
        unif_length=np.ones(2),
        edge_measure=np.ones(2),
        vertex_point=np.array([0, 0, 1]),
        vertex_level=np.array([1, 0, 1]),
        edge_kind=np.full(2, VERTICAL),
        root=1,
        hyp_dist_to_root=np.array([1, 0, 1]),
        params=FillingParams(depth=1, p=p),
        boundary_map=BoundaryMap(anchor=np.array([0, 2]), weight=np.asarray(weight, dtype=float)),
        vertex_index={(0, 1): 0, (0, 0): 1, (1, 1): 2},
    )
