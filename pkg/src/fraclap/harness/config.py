"""Declarative experiment configuration (YAML or JSON)."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from ..errors import ConfigError
from ..filling import FillingParams
from ..metric_space import FiniteMetricMeasureSpace, read_matrix_csv, read_points_csv
from .fixtures import fixture

KINDS = ("build", "solve-neumann", "solve-fractional", "verify", "stability", "sphericalize")
RANDOMIZED = {"solve-neumann", "solve-fractional", "verify", "stability"}
RNG_NAME = "numpy.random.PCG64"

DEFAULT_PARAMS = {"alpha": 2.0, "tau": 1.5, "depth": 5, "p": 2.0, "theta": 0.5}


@dataclass
class ExperimentConfig:
    experiment: str
    space: dict
    params: dict = field(default_factory=lambda: dict(DEFAULT_PARAMS))
    seed: Optional[int] = None
    solver: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    out: Optional[str] = None
    base_dir: Path = field(default_factory=Path.cwd, repr=False)

    def filling_params(self) -> FillingParams:
        try:
            return FillingParams(**self.params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid params: {exc}") from None

    def rng(self) -> np.random.Generator:
        if self.seed is None:
            raise ConfigError(f"experiment {self.experiment!r} needs a seed")
        return np.random.Generator(np.random.PCG64(self.seed))

    def load_space(self) -> FiniteMetricMeasureSpace:
        src = self.space
        if "fixture" in src:
            return fixture(src["fixture"])
        if "points_csv" in src:
            return read_points_csv(self.base_dir / src["points_csv"])
        if "matrix_csv" in src:
            if "mass_csv" not in src:
                raise ConfigError("matrix_csv needs a mass_csv")
            return read_matrix_csv(self.base_dir / src["matrix_csv"], self.base_dir / src["mass_csv"])
        raise ConfigError("space needs one of: fixture, points_csv, matrix_csv")

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "space": self.space,
            "params": self.params,
            "seed": self.seed,
            "solver": self.solver,
            "data": self.data,
            "options": self.options,
        }


def from_dict(raw: dict, base_dir=None, seed=None, out=None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = copy.deepcopy(raw)
    known = {"experiment", "space", "params", "seed", "solver", "data", "options", "out"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    kind = raw.get("experiment")
    if kind not in KINDS:
        raise ConfigError(f"experiment must be one of {KINDS}, got {kind!r}")
    if not isinstance(raw.get("space"), dict):
        raise ConfigError("config needs a 'space' mapping")
    params = dict(DEFAULT_PARAMS)
    params.update(raw.get("params") or {})
    cfg = ExperimentConfig(
        experiment=kind,
        space=raw["space"],
        params=params,
        seed=raw.get("seed") if seed is None else seed,
        solver=raw.get("solver") or {},
        data=raw.get("data") or {},
        options=raw.get("options") or {},
        out=out or raw.get("out"),
        base_dir=Path(base_dir) if base_dir else Path.cwd(),
    )
    if cfg.seed is not None and (not isinstance(cfg.seed, int) or cfg.seed < 0):
        raise ConfigError("seed must be a nonnegative integer")
    if kind in RANDOMIZED and cfg.seed is None:
        raise ConfigError(f"experiment {kind!r} is randomized and needs a seed")
    cfg.filling_params()  # domain checks
    return cfg


def load_config(path, seed=None, out=None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        raw: Any = yaml.safe_load(text)  # JSON is valid YAML
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    return from_dict(raw, base_dir=path.parent, seed=seed, out=out)
