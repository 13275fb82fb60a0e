"""Report, CSV, manifest and figure output."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import platform
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import scipy  # noqa: E402

from .. import __version__  # noqa: E402
from .config import RNG_NAME  # noqa: E402


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dump_json(path: Path, obj) -> None:
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def manifest(cfg, fixture_hash: str, files) -> dict:
    return {
        "config": cfg.echo(),
        "fixture_hash": fixture_hash,
        "rng": {"generator": RNG_NAME, "numpy": np.__version__, "seed": cfg.seed},
        "versions": {
            "fraclap": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
        "files": sorted(files),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)


def plot_filling(path, graph):
    x = graph.vertex_point.astype(float)
    y = -graph.vertex_level.astype(float)
    fig, ax = plt.subplots(figsize=(7, 4))
    for (a, b), k in zip(graph.edges, graph.edge_kind):
        ax.plot([x[a], x[b]], [y[a], y[b]], lw=0.5, color="0.6" if k == 0 else "tab:blue")
    ax.scatter(x, y, s=6, color="k", zorder=3)
    ax.set_xlabel("point index")
    ax.set_ylabel("-level")
    ax.set_title("hyperbolic filling (blue: horizontal edges)")
    _save(fig, path)


def plot_codimension(path, rows):
    r = np.array([row[2] for row in rows])
    ratio = np.array([row[3] for row in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(r, ratio, ".", alpha=0.5)
    ax.set_xlabel("r")
    ax.set_ylabel("codimension ratio")
    _save(fig, path)


def plot_values(path, series: dict, xlabel="point index", ylabel="value"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, vals in series.items():
        ax.plot(np.arange(len(vals)), vals, marker=".", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    _save(fig, path)


def plot_holder(path, log_dist, log_gap, slope, intercept):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(log_dist, log_gap, ".", alpha=0.4)
    xs = np.linspace(np.min(log_dist), np.max(log_dist), 2)
    ax.plot(xs, slope * xs + intercept, "r-", label=f"slope {slope:.3f}")
    ax.set_xlabel("log d(x, y)")
    ax.set_ylabel("log |u(x) - u(y)|")
    ax.legend()
    _save(fig, path)


def plot_stability(path, gap, dist, const):
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].loglog(gap, dist, "o-")
    axes[0].set_xlabel("data distance")
    axes[0].set_ylabel("solution distance")
    axes[1].semilogx(gap, const, "o-")
    axes[1].set_xlabel("data distance")
    axes[1].set_ylabel("implied constant C")
    _save(fig, path)


def plot_sphericalized(path, y, d_graph, d_exact):
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(y, d_exact, "-", label="closed form")
    ax.loglog(y, d_graph, ".", label="graph")
    ax.set_xlabel("y")
    ax.set_ylabel("distance to infinity")
    ax.legend()
    _save(fig, path)
