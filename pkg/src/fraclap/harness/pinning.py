"""Oracle runs whose outputs are committed as pinned constants.

``python -m fraclap.harness.pinning`` recomputes every entry and rewrites
``fraclap/data/pinned.json``. Each entry records the fixture fingerprint it was
pinned against, so a changed fixture is detected instead of silently compared.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .. import fractional as frac
from ..filling import FillingParams, codimension_check, horizontal_free_depth
from .fixtures import fixture

PINNED_FILE = "pinned.json"
CYCLE = "cycle(32)"
DEPTH = 6
# the spectral threshold sits this far below the pinned correlation
CORRELATION_MARGIN = 0.02


def bump_data(space, center=0, width=0.1) -> np.ndarray:
    d = space.original_dist[center]
    f = np.exp(-((d / width) ** 2))
    return f - np.dot(f, space.mass) / space.total_mass


def cycle_problem(depth=DEPTH, p=2.0, theta=0.5):
    space = fixture(CYCLE)
    prm = FillingParams(alpha=2.0, tau=1.5, depth=depth, p=p, theta=theta)
    return frac.make_problem(space, prm)


def compute_pins() -> dict:
    prob = cycle_problem()
    space = prob.space
    comp = frac.comparability_report(prob, n_samples=50, seed=0)
    codim = codimension_check(space, prob.filling, prob.params)
    f = bump_data(space)
    u = frac.solve_fractional(prob, f).u
    corr = frac.correlation(u, frac.spectral_reference_p2(space, f, 0.5).values, space.mass)
    hold = frac.holder_fit(space, u)["exponent"]
    common = {"fixture": CYCLE, "fixture_hash": space.fingerprint(), "depth": DEPTH,
              "alpha": 2.0, "tau": 1.5, "p": 2.0, "theta": 0.5}
    # one level past the last horizontal edge, where deeper levels only add pendant paths
    deep = cycle_problem(horizontal_free_depth(space, 2.0, 1.5) + 1)
    deep_codim = codimension_check(space, deep.filling, deep.params)
    return {
        "codimension_spread_deep": {**common, "depth": deep.params.depth, "value": deep_codim["spread"]},
        "comparability_spread": {**common, "n_samples": 50, "seed": 0, "value": comp["spread"]},
        "codimension_spread": {**common, "value": codim["spread"]},
        "spectral_correlation": {**common, "data": "bump(center=0, width=0.1)", "value": corr,
                                 "threshold": round(corr - CORRELATION_MARGIN, 4)},
        "holder_exponent": {**common, "data": "bump(center=0, width=0.1)", "value": hold},
    }


def load_pins() -> dict:
    return json.loads(resources.files("fraclap").joinpath("data", PINNED_FILE).read_text(encoding="utf-8"))


def write_pins(path=None) -> Path:
    path = Path(path) if path else Path(str(resources.files("fraclap").joinpath("data", PINNED_FILE)))
    path.write_text(json.dumps(compute_pins(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


if __name__ == "__main__":
    print(write_pins())
