"""Command-line interface: ``conereg <subcommand> [--config FILE] [flags]``.

Every subcommand prints one JSON document on stdout. Values from
``--config`` act as defaults and explicit flags override them. The exit
code is 0 when every check a subcommand performs passes, 1 when a check
fails and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .errors import ConeregError
from .exponents import (
    Regime, check_suspension_invariance, exponent_report, parse_p,
)
from .links import Circle, link_from_config, link_spectrum, parse_link

DEFAULT_SCENE = {
    "link": {"kind": "circle", "circumference": 4 * math.pi},
    "rho": 1.0,
    "radial_nodes": 256,
    "modes": 5,
    "perturbation": {"Lambda": 0.0, "gamma": 0.5},
    "potential": {"kind": "zero", "p": "inf"},
}

DEFAULT_TOLERANCES = {
    "dtn": 0.02,
    "rate_slack": 0.1,
    "alpha": 0.05,
    "suspension_closed": 1e-10,
    "suspension_discretized": 1e-3,
    "monotonicity": 1e-8,
}

RATE_RADII = (0.4, 0.2, 0.1, 0.05)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    if isinstance(obj, Regime):
        return obj.value
    return obj


def emit(doc, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n")


def _link_arg(text):
    """``--link`` accepts the short form or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return link_from_config(json.loads(text))
    return parse_link(text)


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _radii_arg(text):
    """``geom:lo:hi:count`` or a comma list."""
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    if str(text).startswith("geom:"):
        _, lo, hi, k = str(text).split(":")
        return np.geomspace(float(lo), float(hi), int(k))
    return np.asarray(_float_list(text))


# ---------------------------------------------------------------------------
# scene handling


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def build_scene(args):
    """Merge the default scene, ``--scene``/config scene and flag overrides."""
    scene = json.loads(json.dumps(DEFAULT_SCENE))
    base = getattr(args, "scene", None)
    if isinstance(base, str):
        base = load_json(base)
    if base:
        scene.update(base)
    if getattr(args, "link", None):
        text = args.link.strip()
        scene["link"] = json.loads(text) if text.startswith("{") else parse_link(text).to_config()
    for key in ("n", "rho", "radial_nodes", "modes", "r_min_ratio", "inner"):
        val = getattr(args, key, None)
        if val is not None:
            scene[key] = val
    pert = dict(scene.get("perturbation") or {})
    if getattr(args, "Lambda", None) is not None:
        pert["Lambda"] = args.Lambda
    if getattr(args, "gamma", None) is not None:
        pert["gamma"] = args.gamma
    scene["perturbation"] = pert
    if getattr(args, "potential", None):
        pot = args.potential
        scene["potential"] = json.loads(pot) if isinstance(pot, str) else pot
    return scene


def scene_p(scene):
    return parse_p((scene.get("potential") or {}).get("p", "inf"))


def _check_p(scene, grid_n):
    p = scene_p(scene)
    pot = scene.get("potential") or {}
    if pot.get("kind", "zero") != "zero" and not p > grid_n / 2:
        raise ValueError(f"potential exponent p = {p:g} must exceed n/2 = {grid_n / 2:g}")
    return p


def make_grid(scene, **overrides):
    from .cone import grid_from_config

    doc = dict(scene)
    doc.update(overrides)
    link = link_from_config(doc["link"])
    _check_p(doc, int(doc.get("n", link.dim_ell + 1)))
    return grid_from_config(doc)


def _trace(args, grid, default_mode=1):
    trace = getattr(args, "trace", None)
    if trace is None:
        t = np.zeros(grid.n_modes)
        t[min(default_mode, grid.n_modes - 1)] = 1.0
        return t
    t = np.asarray(_float_list(trace))
    if t.size != grid.n_modes:
        raise ValueError(f"trace needs {grid.n_modes} coefficients, got {t.size}")
    return t


# ---------------------------------------------------------------------------
# subcommands


def cmd_exponent(args):
    link = _link_arg(args.link)
    if args.n is not None and args.n != link.dim_ell + 1:
        raise ValueError(f"n = {args.n} inconsistent with link dimension {link.dim_ell}")
    rep = exponent_report(link, parse_p(args.p), metric_gamma=args.metric_gamma)
    return rep.to_dict(), True


def cmd_spectrum(args):
    link = _link_arg(args.link)
    spec = link_spectrum(link, n_ambient=args.n, count=args.count)
    return spec.to_json(), True


def cmd_suspension_check(args):
    base = _link_arg(args.base)
    tol = args.tol
    if tol is None:
        tol = DEFAULT_TOLERANCES["suspension_" + args.method]
    rows = []
    for k in args.k:
        chk = check_suspension_invariance(base, k, method=args.method, n_nodes=args.nodes)
        rows.append({"k": k, "n": base.dim_ell + k + 1, "nu_base": chk.nu_base,
                     "nu_susp": chk.nu_susp, "gap": chk.gap,
                     "lambda1_base": chk.lambda1_base, "lambda1_susp": chk.lambda1_susp,
                     "pass": chk.gap <= tol})
    ok = all(r["pass"] for r in rows)
    return {"method": args.method, "tolerance": tol, "checks": rows, "pass": ok}, ok


def _dtn_doc(grid):
    from .cone import dtn_perturbed

    N = dtn_perturbed(grid)
    mu = np.linalg.eigvalsh(0.5 * (N + N.T))
    model = np.sort(grid.nus) / grid.rho
    asym = float(np.abs(N - N.T).max() / max(np.abs(N).max(), 1e-300))
    err = np.abs(mu - model) / np.maximum(np.abs(model), 1.0 / grid.rho)
    return {"eigenvalues": mu, "model": model, "relative_error": err,
            "asymmetry": asym, "matrix": N}


def cmd_dtn(args):
    scene = build_scene(args)
    grid = make_grid(scene)
    doc = _dtn_doc(grid)
    if not args.matrix:
        doc.pop("matrix")
    doc["scene"] = scene
    return doc, True


def cmd_solve(args):
    from .cone import solve_schrodinger

    scene = build_scene(args)
    grid = make_grid(scene)
    inner = None
    if grid.inner == "dirichlet":
        if args.inner_trace is None:
            raise ValueError("annular scenes need --inner-trace")
        inner = _float_list(args.inner_trace)
    u = solve_schrodinger(grid, _trace(args, grid), inner)
    if args.field_csv:
        u.to_csv(args.field_csv)
    ok = u.residual <= 1e-10
    return {"residual": u.residual, "trace": u.trace, "radial_nodes": grid.n_radial,
            "modes": grid.modes.indices, "field_csv": args.field_csv, "pass": ok}, ok


def _profile_radii(grid, count=12):
    lo = grid.r_min * 10 if grid.inner == "cap" else grid.r_min
    return np.geomspace(lo, grid.rho, count)


def _monotonicity_doc(grid, u, p, tol):
    from .cone import energy_profile, fit_monotonicity_constant, monotonicity_check

    nu1 = float(min(grid.nus[grid.nus > 0].min(), 1.0))
    gamma = 1.0 if grid.perturbation.trivial else grid.perturbation.gamma
    gbar = min(gamma, 2.0 - (0 if math.isinf(p) else grid.n / p))
    prof = energy_profile(u, _profile_radii(grid), nu1=nu1, gamma_bar=gbar)
    model = grid.perturbation.trivial and grid.potential.is_zero
    report = monotonicity_check(prof, p, C=0.0)
    C = fit_monotonicity_constant(prof, p)
    ok = report.max_violation <= tol if model else math.isfinite(C)
    return prof, {"max_violation_C0": report.max_violation, "worst_pair": report.worst_pair,
                  "fitted_C": C, "model_case": model, "nu1": nu1, "gamma_bar": gbar,
                  "tolerance": tol, "pass": ok}


def cmd_monotonicity(args):
    from .cone import solve_schrodinger

    scene = build_scene(args)
    grid = make_grid(scene)
    u = solve_schrodinger(grid, _trace(args, grid),
                          _float_list(args.inner_trace) if args.inner_trace else None)
    prof, doc = _monotonicity_doc(grid, u, scene_p(scene), args.tol)
    if args.profile_csv:
        prof.to_csv(args.profile_csv)
    return doc, doc["pass"]


def cmd_holder_fit(args):
    from .morrey import MetricMeasureGraph, ball_energies, fit_holder_exponent, read_vertex_field

    if args.energies:
        with open(args.energies, newline="") as fh:
            rows = list(csv.DictReader(fh))
        radii = np.array([float(r["r"]) for r in rows])
        energies = np.array([float(r["energy"]) for r in rows])
        fit = fit_holder_exponent(radii, energies, tol=args.tol)
        source = {"energies": args.energies}
    else:
        if not (args.edges and args.vertices and args.field):
            raise ValueError("give --energies or all of --edges, --vertices, --field")
        graph = MetricMeasureGraph.from_csv(args.edges, args.vertices)
        f = read_vertex_field(args.field, graph)
        center = graph.ids.index(args.center) if args.center is not None else 0
        radii = _radii_arg(args.radii)
        rep = ball_energies(f, graph, radii, [center])
        fit = fit_holder_exponent(rep, tol=args.tol)
        energies = rep.sup_energies()
        source = {"edges": args.edges, "vertices": args.vertices, "field": args.field}
    return {"alpha_hat": fit.alpha_hat, "gamma_hat": fit.gamma_hat, "regime": fit.regime,
            "alpha_power": fit.alpha_power, "alpha_band": fit.band,
            "residual_power": fit.residual_power, "residual_log": fit.residual_log,
            "radii": radii, "energies": energies, "source": source}, True


# -- verify -----------------------------------------------------------------


def _stage_suspension(scene, tol):
    link = link_from_config(scene["link"])
    rows = []
    for method, key in (("closed", "suspension_closed"), ("discretized", "suspension_discretized")):
        for k in (1, 2):
            chk = check_suspension_invariance(link, k, method=method)
            rows.append({"method": method, "k": k, "gap": chk.gap, "tolerance": tol[key],
                         "pass": chk.gap <= tol[key]})
    return {"checks": rows, "pass": all(r["pass"] for r in rows)}


def _stage_dtn(scene, tol):
    model_scene = dict(scene, perturbation={"Lambda": 0.0, "gamma": 1.0},
                       potential={"kind": "zero"})
    grid = make_grid(model_scene)
    doc = _dtn_doc(grid)
    doc.pop("matrix")
    worst = float(doc["relative_error"][:5].max())
    out = {"model": doc, "max_relative_error": worst, "tolerance": tol["dtn"],
           "pass": worst <= tol["dtn"]}
    pert = scene.get("perturbation") or {}
    if float(pert.get("Lambda", 0.0)) > 0:
        from .cone import dtn_eigenvalues

        p = scene_p(scene)
        gamma = float(pert.get("gamma", 1.0))
        gbar = min(gamma, 2.0 - (0 if math.isinf(p) else grid.n / p))
        gaps = []
        for rho in RATE_RADII:
            g = make_grid(dict(scene, potential={"kind": "zero"}), rho=rho)
            mu = dtn_eigenvalues(g)
            nu = np.sort(g.nus)
            j = int(np.argmax(nu > 0))
            gaps.append(abs(mu[j] - nu[j] / rho))
        slope = float(np.polyfit(np.log(RATE_RADII), np.log(gaps), 1)[0])
        target = gbar - 1.0 - tol["rate_slack"]
        out["rate"] = {"radii": RATE_RADII, "gaps": gaps, "slope": slope,
                       "predicted": gbar - 1.0, "threshold": target, "pass": slope >= target}
        out["pass"] = out["pass"] and slope >= target
    return out


def _stage_monotonicity(scene, tol, seed):
    from .cone import solve_schrodinger

    grid = make_grid(scene)
    rng = np.random.default_rng(seed)
    trace = rng.standard_normal(grid.n_modes)
    u = solve_schrodinger(grid, trace)
    _, doc = _monotonicity_doc(grid, u, scene_p(scene), tol["monotonicity"])
    doc["seed"] = seed
    doc["trace"] = trace
    return doc


def _stage_holder(scene, tol, trace):
    from .cone import solve_schrodinger
    from .morrey import (
        ball_energies, cone_graph_from_grid, field_on_cone_graph, fit_holder_exponent,
    )

    link = link_from_config(scene["link"])
    p = scene_p(scene)
    pert = scene.get("perturbation") or {}
    gamma = float(pert.get("gamma", 1.0)) if float(pert.get("Lambda", 0.0)) else 1.0
    pred = exponent_report(link, p, metric_gamma=gamma)
    grid = make_grid(scene)
    if trace is None:
        trace = np.zeros(grid.n_modes)
        first = int(np.argmax(grid.nus > 0))
        trace[first] = 1.0
    u = solve_schrodinger(grid, np.asarray(trace, dtype=float))
    A = 2.0
    radii = np.geomspace(10 * grid.r_min, grid.rho / (2 * A), 16)
    if isinstance(link, Circle):
        graph = cone_graph_from_grid(grid)
        f = field_on_cone_graph(u, graph)
        rep = ball_energies(f, graph, radii, [0])
        fit = fit_holder_exponent(rep, tol=tol["alpha"])
        route = "graph"
    else:
        from .cone import energy_profile

        prof = energy_profile(u, radii)
        measure = link.volume * radii ** grid.n / grid.n
        fit = fit_holder_exponent(radii, prof.Eg / measure, tol=tol["alpha"])
        route = "profile"
    gap = abs(fit.alpha_hat - pred.mu)
    if pred.regime == Regime.LOG_LIPSCHITZ:
        ok = fit.regime == "log_corrected" and gap <= tol["alpha"]
    else:
        ok = fit.regime == "power" and gap <= tol["alpha"]
    return {"predicted_mu": pred.mu, "predicted_regime": pred.regime, "alpha_hat": fit.alpha_hat,
            "alpha_power": fit.alpha_power, "gamma_hat": fit.gamma_hat, "regime": fit.regime,
            "alpha_gap": gap, "tolerance": tol["alpha"], "route": route, "pass": ok}


STAGES = ("suspension", "dtn", "monotonicity", "holder_fit")


def cmd_verify(args):
    scene = build_scene(args)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(args.tolerances or {})
    enabled = {s: True for s in STAGES}
    enabled.update(args.verify or {})
    for s in args.skip or []:
        enabled[s.replace("-", "_")] = False
    link = link_from_config(scene["link"])
    _check_p(scene, int(scene.get("n", link.dim_ell + 1)))
    stages = {}
    for name in STAGES:
        if not enabled.get(name):
            continue
        try:
            if name == "suspension":
                stages[name] = _stage_suspension(scene, tol)
            elif name == "dtn":
                stages[name] = _stage_dtn(scene, tol)
            elif name == "monotonicity":
                stages[name] = _stage_monotonicity(scene, tol, args.seed)
            else:
                trace = _float_list(args.trace) if args.trace is not None else None
                stages[name] = _stage_holder(scene, tol, trace)
        except (ConeregError, ValueError, ArithmeticError) as exc:
            stages[name] = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
    ok = all(s["pass"] for s in stages.values())
    doc = {"scene": scene, "tolerances": tol, "seed": args.seed, "stages": stages, "pass": ok}
    if "holder_fit" in stages and "alpha_gap" in stages["holder_fit"]:
        doc["alpha_gap"] = stages["holder_fit"]["alpha_gap"]
    return doc, ok


# ---------------------------------------------------------------------------
# parser


def _add_scene_flags(p):
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--link", help="link, e.g. circle:12.566 or a JSON object")
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--radial-nodes", dest="radial_nodes", type=int)
    p.add_argument("--modes", type=int)
    p.add_argument("--r-min-ratio", dest="r_min_ratio", type=float)
    p.add_argument("--inner", choices=["cap", "dirichlet"])
    p.add_argument("--Lambda", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--potential", help='potential JSON, e.g. {"kind": "constant", "value": 1}')
    p.add_argument("--trace", help="comma-separated boundary mode coefficients")


def build_parser():
    parser = argparse.ArgumentParser(prog="conereg", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of defaults for the subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponent", help="nu_1, Hölder exponent and regime of a link")
    p.add_argument("--config")
    p.add_argument("--link", default="circle:6.283185307179586")
    p.add_argument("--n", type=int)
    p.add_argument("--p", default="inf")
    p.add_argument("--metric-gamma", dest="metric_gamma", type=float, default=1.0)
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("spectrum", help="link eigenvalues with indicial exponents")
    p.add_argument("--config")
    p.add_argument("--link", default="circle:6.283185307179586")
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int, default=8)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("suspension-check", help="nu_1 invariance under suspension")
    p.add_argument("--config")
    p.add_argument("--base", default="circle:6.283185307179586")
    p.add_argument("--k", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--method", choices=["closed", "discretized"], default="closed")
    p.add_argument("--nodes", type=int, default=400)
    p.add_argument("--tol", type=float)
    p.set_defaults(func=cmd_suspension_check)

    p = sub.add_parser("dtn", help="Dirichlet-to-Neumann spectrum of a scene")
    p.add_argument("--config")
    _add_scene_flags(p)
    p.add_argument("--matrix", action="store_true", help="include the full matrix")
    p.set_defaults(func=cmd_dtn)

    p = sub.add_parser("solve", help="Schrödinger solve with a boundary trace")
    p.add_argument("--config")
    _add_scene_flags(p)
    p.add_argument("--inner-trace", dest="inner_trace")
    p.add_argument("--field-csv", dest="field_csv")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("monotonicity", help="energy monotonicity report for a solve")
    p.add_argument("--config")
    _add_scene_flags(p)
    p.add_argument("--inner-trace", dest="inner_trace")
    p.add_argument("--profile-csv", dest="profile_csv")
    p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCES["monotonicity"])
    p.set_defaults(func=cmd_monotonicity)

    p = sub.add_parser("holder-fit", help="fit Hölder exponent from ball energies")
    p.add_argument("--config")
    p.add_argument("--energies", help="CSV with columns r, energy")
    p.add_argument("--edges")
    p.add_argument("--vertices")
    p.add_argument("--field")
    p.add_argument("--center")
    p.add_argument("--radii", default="geom:0.01:0.25:12")
    p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCES["alpha"])
    p.set_defaults(func=cmd_holder_fit)

    p = sub.add_parser("verify", help="predict-then-verify pipeline")
    p.add_argument("--config")
    _add_scene_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip", nargs="*", choices=["suspension", "dtn", "monotonicity",
                                                  "holder-fit", "holder_fit"])
    p.set_defaults(func=cmd_verify, tolerances=None, verify=None)
    return parser


def _config_path(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.config


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    path = _config_path(argv)
    if path:
        cfg = load_json(path)
        args = parser.parse_args(argv)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions} | {"tolerances", "verify"}
        unknown = set(cfg) - known
        if unknown:
            raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            emit({"error": exc.code})
            return 2
        raise
    try:
        doc, ok = args.func(args)
    except (ConeregError, ValueError, KeyError, OSError) as exc:
        emit({"error": f"{type(exc).__name__}: {exc}"})
        return 2
    emit(doc)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
