"""Experiment orchestration: one function per experiment kind.

Each experiment returns a report mapping, CSV tables and figure callbacks;
``run`` writes them next to a manifest. Report bodies contain no timings or
timestamps so reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import besov, fractional as frac, sphericalization as sph
from ..errors import ConfigError, FracLapError
from ..filling import check_filling, codimension_check, make_filling, write_graph
from ..graph_calculus import flux_pairing, solve_neumann, weak_residual
from ..metric_space import check_net_hierarchy, doubling_report, greedy_net_hierarchy
from . import report as rp
from .config import ExperimentConfig


class Output:
    def __init__(self):
        self.report: dict = {}
        self.tables: dict = {}
        self.figures: list = []


def make_data(cfg: ExperimentConfig, space, rng) -> np.ndarray:
    """Neumann data on Z from the config's ``data`` block."""
    block = cfg.data or {"kind": "random"}
    kind = block.get("kind", "random")
    scale = float(block.get("scale", 1.0))
    if kind == "values":
        f = np.asarray(block["values"], dtype=float)
        if f.shape != (space.n_points,):
            raise ConfigError(f"data has {f.size} values for {space.n_points} points")
        return scale * f
    if kind == "random":
        f = frac.random_mean_zero(rng, space.mass)
    elif kind in ("bump", "distance"):
        z0 = int(block.get("center", 0))
        d = space.original_dist[z0]
        f = np.exp(-((d / float(block.get("width", 0.1))) ** 2)) if kind == "bump" else d.copy()
        f = f - np.dot(f, space.mass) / space.total_mass
    else:
        raise ConfigError(f"unknown data kind {kind!r}")
    return scale * f


def _solver_tol(cfg, default):
    return float(cfg.solver.get("tol", default))


def exp_build(cfg, space, out: Output):
    prm = cfg.filling_params()
    nets = greedy_net_hierarchy(space, prm.alpha, prm.depth)
    g = make_filling(space, prm, nets)
    codim = codimension_check(space, g, prm)
    out.report.update(
        n_vertices=g.n_vertices,
        n_edges=len(g.edges),
        level_sizes=[int(len(lv)) for lv in nets.levels],
        net_failures=check_net_hierarchy(space, nets),
        filling_failures=check_filling(space, g),
        codimension={k: v for k, v in codim.items() if k != "rows"},
        doubling=doubling_report(space),
        total_edge_measure=float(g.edge_measure.sum()),
    )
    out.tables["codimension.csv"] = (["point", "k", "r", "ratio"], codim["rows"])
    out.tables["graph.txt"] = g
    out.figures.append(("filling.png", lambda p: rp.plot_filling(p, g)))
    out.figures.append(("codimension.png", lambda p: rp.plot_codimension(p, codim["rows"])))


def exp_solve_neumann(cfg, space, out: Output):
    prm = cfg.filling_params()
    g = make_filling(space, prm)
    f = make_data(cfg, space, cfg.rng())
    rep = solve_neumann(g, prm.p, f, g.boundary_map, tol=_solver_tol(cfg, 1e-10))
    res = weak_residual(g, rep.u, prm.p, f, g.boundary_map)
    flux = flux_pairing(g, rep.u, prm.p, k=int(cfg.options.get("flux_cutoff", 1)))
    top = g.level_vertices(g.depth)
    expected = -g.boundary_map.load(f, g.n_vertices)[top]
    d = rep.to_dict()
    d.pop("values")
    out.report.update(
        solve=d,
        weak_residual_inf=float(np.abs(res).max()),
        flux_max_error=float(np.abs(flux - expected).max()),
        flux_total=float(flux.sum()),
        data=f,
    )
    rows = [(v, int(g.vertex_point[v]), int(g.vertex_level[v]), rep.u[v]) for v in range(g.n_vertices)]
    out.tables["solution.csv"] = (["vertex", "point", "level", "u"], rows)
    trace = g.boundary_map.trace(rep.u)
    out.figures.append(("trace.png", lambda p: rp.plot_values(p, {"trace": trace, "f": f})))


def exp_solve_fractional(cfg, space, out: Output):
    prm = cfg.filling_params()
    prob = frac.make_problem(space, prm)
    f = make_data(cfg, space, cfg.rng())
    rep = frac.solve_fractional(prob, f, tol=_solver_tol(cfg, 1e-10))
    u = rep.u
    d = rep.to_dict()
    d.pop("values")
    out.report.update(
        solve=d,
        solution=u,
        data=f,
        besov_energy={c: besov.besov_energy(space, u, prm.theta, prm.p, c) for c in besov.CONVENTIONS},
    )
    series = {"u": u}
    if np.ptp(u) > 0:
        hf = frac.holder_fit(space, u)
        out.report["holder"] = {"exponent": hf["exponent"], "constant": hf["constant"], "n_pairs": hf["n_pairs"]}
        out.tables["holder_pairs.csv"] = (["log_dist", "log_gap"], list(zip(hf["log_dist"], hf["log_gap"])))
        out.figures.append(("holder.png", lambda p: rp.plot_holder(p, hf["log_dist"], hf["log_gap"], hf["exponent"], hf["intercept"])))
    if prm.p == 2 and space.n_points > 1:
        ref = frac.spectral_reference_p2(space, f, prm.theta).values
        out.report["spectral_correlation"] = frac.correlation(u, ref, space.mass) if np.ptp(u) > 0 else None
        series["spectral reference"] = ref
    out.tables["solution.csv"] = (["point", "f", "u"], [(i, f[i], u[i]) for i in range(space.n_points)])
    out.figures.append(("solution.png", lambda p: rp.plot_values(p, series)))


def _check(rows, name, ok, detail=None):
    rows.append({"check": name, "passed": bool(ok), "detail": detail})


def exp_verify(cfg, space, out: Output):
    prm = cfg.filling_params()
    rng = cfg.rng()
    nets = greedy_net_hierarchy(space, prm.alpha, prm.depth)
    prob = frac.make_problem(space, prm)
    g = prob.filling
    checks: list = []
    _check(checks, "net hierarchy", not check_net_hierarchy(space, nets), check_net_hierarchy(space, nets))
    fails = check_filling(space, g)
    _check(checks, "filling edge rules and measures", not fails, fails[:5])
    _check(checks, "theta = 1 - Theta/p", prm.theta == 1.0 - prm.Theta / prm.p)
    codim = codimension_check(space, g, prm)
    ok = np.isfinite(codim["ratio_max"]) and codim["ratio_min"] > 0 if codim["rows"] else True
    _check(checks, "codimension ratios positive and finite", ok, {k: codim[k] for k in ("ratio_min", "ratio_max")})

    u = rng.standard_normal(space.n_points)
    e0 = besov.besov_energy(space, np.ones(space.n_points), prm.theta, prm.p)
    _check(checks, "besov energy of a constant is 0", e0 == 0.0, e0)
    e1, e2 = besov.besov_energy(space, u, prm.theta, prm.p), besov.besov_energy(space, 2 * u, prm.theta, prm.p)
    _check(checks, "besov energy is p-homogeneous", np.isclose(e2, 2**prm.p * e1, rtol=1e-12), [e1, e2])
    if space.n_points == 2:
        K = besov.kernel_matrix(space, prm.theta, prm.p).values[0, 1]
        closed = 2 * K * space.mass[0] * space.mass[1]
        got = besov.besov_energy(space, [0.0, 1.0], prm.theta, prm.p)
        _check(checks, "two-point energy closed form", np.isclose(got, closed, rtol=1e-14), [got, closed])

    if space.n_points > 1:
        f = frac.random_mean_zero(rng, space.mass)
        rep = frac.solve_fractional(prob, f)
        bound = 1e-7 * (1 + np.abs(f).max())
        _check(checks, "fractional first-order condition", rep.residual_inf < bound, rep.residual_inf)
        res = weak_residual(g, solve_neumann(g, prm.p, f, g.boundary_map).u, prm.p, f, g.boundary_map)
        _check(checks, "filling weak residual", np.abs(res).max() < bound, float(np.abs(res).max()))
        viol = frac.max_principle_violation(prob, rng.standard_normal(space.n_points))
        _check(checks, "discrete maximum principle", viol == 0.0, viol)
        ext = frac.extend(prob, u).u
        et = frac.form_ET(prob, u, u, u_ext=ext, v_ext=ext)
        _check(checks, "E_T(u, u) >= 0", et >= 0, et)
    out.report["checks"] = checks
    out.report["all_passed"] = all(c["passed"] for c in checks)


def exp_stability(cfg, space, out: Output):
    prm = cfg.filling_params()
    rng = cfg.rng()
    prob = frac.make_problem(space, prm)
    base = make_data(cfg, space, rng)
    direction = frac.random_mean_zero(rng, space.mass)
    scales = [float(s) for s in cfg.options.get("scales", np.geomspace(1e-3, 1e1, 5))]
    mode = cfg.options.get("mode", "covariant")
    jobs = int(cfg.options.get("jobs", 1))

    def one(s):
        return frac.stability_sweep(prob, base, direction, [s], mode)[0]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            reps = list(ex.map(one, scales))  # map keeps the input order
    else:
        reps = [one(s) for s in scales]
    rows = [(s, r.data_distance, r.solution_distance, r.constant) for s, r in zip(scales, reps)]
    C = np.array([r.constant for r in reps])
    out.report.update(
        mode=mode,
        kappa=reps[0].kappa,
        tau=reps[0].tau,
        rows=[dict(zip(("scale", "data_distance", "solution_distance", "constant"), row)) for row in rows],
        constant_median=float(np.median(C)),
        constant_spread=float(C.max() / C.min()) if C.min() > 0 else float("inf"),
        data_distance_monotone=bool(np.all(np.diff([r[1] for r in rows]) > 0)),
    )
    out.tables["stability.csv"] = (["scale", "data_distance", "solution_distance", "constant"], rows)
    out.figures.append(("stability.png", lambda p: rp.plot_stability(p, [r[1] for r in rows], [r[2] for r in rows], C)))


def exp_sphericalize(cfg, space, out: Output):
    o = cfg.options
    beta = float(o.get("beta_s", 2.0))
    a = float(o.get("a", 0.0))
    levels = sph.geometric_levels(float(o.get("y_max", 1e3)), int(o.get("n_levels", 200)), float(o.get("ratio", 1.05)))
    grid = sph.ProductGrid(space, levels, a=a, beta_s=beta, alpha=cfg.filling_params().alpha)
    g = sph.build_sphericalized(grid)
    d_inf = g.distances(g.infinity)
    col = d_inf[np.arange(len(levels)) * space.n_points]
    exact = sph.dist_to_infinity(levels, beta)
    radii = [float(r) for r in o.get("radii", [0.05, 0.1, 0.25])]
    balls = [sph.discrete_ball_at_infinity(g, R) for R in radii]
    lo, hi = levels[0], levels[-1]
    out.report.update(
        theta=grid.theta,
        n_vertices=g.n_vertices,
        y_range=[lo, hi],
        dist_to_infinity_max_rel_error=float(np.max(np.abs(col - exact) / exact)),
        ball_at_infinity=balls,
        total_measure=float(g.vertex_mass.sum()),
        total_measure_closed_form_on_grid=space.total_mass * sph.omega_mass_between(lo, hi, beta, a),
        total_measure_closed_form=sph.total_measure_closed_form(beta, a, space.total_mass),
        omega_harnack=sph.omega_harnack(g),
        john=sph.john_check(g),
    )
    out.tables["dist_to_infinity.csv"] = (["y", "graph", "closed_form"], list(zip(levels, col, exact)))
    out.tables["graph.txt"] = g
    out.figures.append(("dist_to_infinity.png", lambda p: rp.plot_sphericalized(p, levels, col, exact)))


EXPERIMENTS = {
    "build": exp_build,
    "solve-neumann": exp_solve_neumann,
    "solve-fractional": exp_solve_fractional,
    "verify": exp_verify,
    "stability": exp_stability,
    "sphericalize": exp_sphericalize,
}


def run(cfg: ExperimentConfig, out_dir=None, figures: bool = True) -> int:
    """Run one experiment; returns the process exit status.

    0: success. 1: verify ran but a check failed. 2: a module or config error,
    described in error.json.
    """
    out_dir = Path(out_dir or cfg.out or "out")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    fixture_hash = None
    try:
        space = cfg.load_space()
        fixture_hash = space.fingerprint()
        out = Output()
        EXPERIMENTS[cfg.experiment](cfg, space, out)
    except FracLapError as exc:
        rp.dump_json(out_dir / "error.json", {**exc.to_record(), "experiment": cfg.experiment})
        rp.dump_json(out_dir / "manifest.json", rp.manifest(cfg, fixture_hash, ["error.json"]))
        return 2

    (out_dir / "error.json").unlink(missing_ok=True)  # left over from an earlier failed run
    body = {"experiment": cfg.experiment, "fixture_hash": fixture_hash, "seed": cfg.seed, **out.report}
    rp.dump_json(out_dir / "report.json", body)
    written.append("report.json")
    for name, table in out.tables.items():
        if name == "graph.txt":
            (sph.write_sphericalized if isinstance(table, sph.SphericalizedGraph) else write_graph)(out_dir / name, table)
        else:
            rp.write_csv(out_dir / name, *table)
        written.append(name)
    if figures:
        for name, draw in out.figures:
            draw(out_dir / name)
            written.append(name)
    rp.dump_json(out_dir / "manifest.json", rp.manifest(cfg, fixture_hash, written))
    if cfg.experiment == "verify" and not out.report["all_passed"]:
        return 1
    return 0


def summary_line(out_dir) -> str:
    """One delimited line describing the run, for stdout."""
    out_dir = Path(out_dir)
    if (out_dir / "error.json").exists():
        err = json.loads((out_dir / "error.json").read_text())
        return f"status=error\tcode={err['error']}\tmessage={err['message']}"
    rep = json.loads((out_dir / "report.json").read_text())
    keys = [k for k in ("all_passed", "weak_residual_inf", "constant_spread", "dist_to_infinity_max_rel_error", "n_vertices") if k in rep]
    return "\t".join(["status=ok", f"experiment={rep['experiment']}"] + [f"{k}={rep[k]}" for k in keys])
