"""Built-in test spaces."""

from __future__ import annotations

import re

import numpy as np

from ..errors import UnknownFixture
from ..metric_space import FiniteMetricMeasureSpace, load_space


def cycle(n: int) -> FiniteMetricMeasureSpace:
    """n equally spaced points on a circle of circumference 1, arc metric, mass 1/n."""
    if n < 1:
        raise ValueError("cycle needs n >= 1")
    k = np.arange(n)
    gap = np.abs(k[:, None] - k[None, :])
    d = np.minimum(gap, n - gap) / n
    return load_space(d, np.full(n, 1.0 / n), kind="matrix", labels=[f"c{i}" for i in k])


def two_point() -> FiniteMetricMeasureSpace:
    """Two points at distance 1 with masses 1/2, 1/2."""
    return load_space(np.array([[0.0, 1.0], [1.0, 0.0]]), [0.5, 0.5], kind="matrix")


def cantor_points(k: int) -> np.ndarray:
    """Endpoints of the 2^k intervals of the level-k middle-thirds construction."""
    intervals = [(0.0, 1.0)]
    for _ in range(k):
        intervals = [piece for a, b in intervals for piece in ((a, a + (b - a) / 3), (b - (b - a) / 3, b))]
    return np.unique(np.array(intervals).ravel())


def cantor_like(k: int) -> FiniteMetricMeasureSpace:
    pts = cantor_points(k)
    return load_space(pts[:, None], np.full(len(pts), 1.0 / len(pts)), kind="points")


def segment(n: int) -> FiniteMetricMeasureSpace:
    """n equally spaced points on [0, 1/2] with uniform mass."""
    pts = np.linspace(0.0, 0.5, n)
    return load_space(pts[:, None], np.full(n, 1.0 / n), kind="points")


_FIXTURES = {"cycle": cycle, "two_point": two_point, "cantor_like": cantor_like, "segment": segment}
_NAME = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*(\d+)\s*\))?\s*$")


def fixture(name: str, n=None) -> FiniteMetricMeasureSpace:
    """Look up a fixture by name, e.g. ``"cycle(16)"``, ``"two_point"`` or ``("cantor_like", 2)``."""
    m = _NAME.match(str(name))
    if m is None or m.group(1) not in _FIXTURES:
        raise UnknownFixture(f"unknown fixture {name!r}; known: {sorted(_FIXTURES)}")
    key, arg = m.group(1), m.group(2)
    if arg is not None:
        n = int(arg)
    build = _FIXTURES[key]
    if key == "two_point":
        if n is not None:
            raise UnknownFixture("two_point takes no size argument")
        return build()
    if n is None:
        raise UnknownFixture(f"fixture {key} needs a size, e.g. {key}(8)")
    return build(int(n))
