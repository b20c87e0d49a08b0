"""Command-line interface.

Subcommands: simulate, section, rotation, entropy, graphs, tube, validate,
run <scenario>.  Common flags: --config <file.json>, --out <dir>,
--seed <int>, --set key.path=value (repeatable, JSON-parsed values).

Exit codes: 0 pass/ok, 2 a check failed, 3 usage or runtime error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import (
    TubeSpec,
    WitnessBall,
    entropy_separated_sets,
    invariant_graph_test,
    rotation_number_from_displacements,
    tube_diagnostics,
    wrapped_metric,
)
from .benchmarks import cat_map, doubling_map, iterate_map_segments
from .config import (
    apply_override,
    default_config,
    integrator_from_config,
    load_config_file,
    merge_config,
    parse_set_option,
    section_from_config,
    validate_config,
)
from .errors import FinslerLabError
from .flow import TWO_PI, IntegratorConfig, integrate_ensemble, integrate_orbit
from .metrics import fiber_convexity_check, metric_from_spec
from .reporting import dump_json, render_section_plot
from .sampling import sample_covectors, sample_tube_states, sample_unit_level, solve_xi2_on_level
from .scenarios import SCENARIO_NAMES, run_scenario
from .sections import AnnulusChart, build_return_map_grid, iterate_section_map


def _metric_from_config(cfg: dict):
    spec = dict(cfg.get("metric", {}))
    spec.setdefault("kind", "rotational")
    spec["profile"] = cfg.get("profile", {"kind": "round_sphere"})
    return metric_from_spec(spec)


def _build_config(args) -> dict:
    cfg = default_config()
    if args.config:
        cfg = merge_config(cfg, load_config_file(args.config))
    for item in args.set or []:
        key, value = parse_set_option(item)
        cfg = apply_override(cfg, key, value)
    if args.seed is not None:
        cfg["scenario"]["seed"] = args.seed
    validate_config(cfg)
    return cfg


def _out_dir(args, command: str) -> Path:
    out = Path(args.out) if args.out else Path("out") / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    cfg = _build_config(args)
    metric = _metric_from_config(cfg)
    integ = integrator_from_config(cfg)
    sim = cfg["analysis"].get("simulate", {})
    x1, x2 = float(sim.get("x1", 0.0)), float(sim.get("x2", 0.0))
    if "xi1" in sim or "xi2" in sim:
        y0 = np.array([x1, x2, float(sim.get("xi1", 1.0)), float(sim.get("xi2", 0.0))])
    else:
        theta = float(sim.get("theta", 0.0))
        from .metrics import unit_covector

        y0 = unit_covector(metric, x1, x2, theta)
    T = float(sim.get("T", 20.0))
    trace = integrate_orbit(metric, y0, T, integ)
    out = _out_dir(args, "simulate")
    trace.to_csv(out / "orbit.csv")
    dump_json(
        {
            "final_state": trace.final_state,
            "h_drift": trace.h_drift(),
            "xi1_drift": trace.h1_drift(),
            "time": T,
        },
        out / "summary.json",
    )
    print(f"orbit dumped to {out / 'orbit.csv'} (H drift {trace.h_drift():.2e})")
    return 0


def _cmd_section(args) -> int:
    cfg = _build_config(args)
    metric = _metric_from_config(cfg)
    integ = integrator_from_config(cfg)
    spec = section_from_config(cfg)
    sec = cfg["analysis"].get("section", {})
    n_s = int(sec.get("grid_s", 8))
    n_u = int(sec.get("grid_u", 8))
    chart = AnnulusChart(metric, spec)
    s_vals = np.linspace(0.0, chart.circumference, n_s, endpoint=False) + 0.1
    u_vals = np.linspace(0.3, math.pi - 0.35, n_u)
    table = build_return_map_grid(metric, spec, s_vals, u_vals, integ)
    out = _out_dir(args, "section")
    table.to_csv(out / "return_map.csv")
    ok = table.ok_records()
    if ok:
        pts = np.array([[r.s, r.u] for r in ok])
        imgs = np.array([[r.s_image, r.u_image] for r in ok])
        (out / "section.svg").write_text(
            render_section_plot([pts, imgs], s_range=(0.0, chart.circumference)),
            encoding="utf-8",
        )
    print(f"{len(ok)}/{len(table.records)} grid points returned; table at {out / 'return_map.csv'}")
    return 0


def _cmd_rotation(args) -> int:
    cfg = _build_config(args)
    metric = _metric_from_config(cfg)
    integ = integrator_from_config(cfg)
    spec = section_from_config(cfg)
    rot = cfg["analysis"].get("rotation", {})
    s0 = float(rot.get("s", 1.0))
    u0 = float(rot.get("u", 0.25))
    n = int(rot.get("n", 100))
    fast = IntegratorConfig(method=integ.method, rel_tol=max(integ.rel_tol, 1e-10), abs_tol=max(integ.abs_tol, 1e-10))
    orbit = iterate_section_map(metric, spec, (s0, u0), n, fast)
    est = rotation_number_from_displacements(orbit.displacements)
    out = _out_dir(args, "rotation")
    dump_json(
        {
            "start": [s0, u0],
            "n": est.n,
            "value": est.value,
            "reduction": est.reduction,
            "error_bound": est.error_bound,
        },
        out / "rotation.json",
    )
    print(f"rotation number {est.value!r} (mod 1: {est.reduction!r}, n={n})")
    return 0


def _cmd_entropy(args) -> int:
    cfg = _build_config(args)
    ent = cfg["analysis"].get("entropy", {})
    system = ent.get("system", "doubling")
    n_cloud = int(ent.get("cloud", 2000))
    rng = np.random.default_rng(int(cfg["scenario"].get("seed", 0)))
    if system == "identity":
        segs = iterate_map_segments(lambda p: p, rng.uniform(0, 1, (n_cloud, 1)), 6)
        est = entropy_separated_sets(segs, range(7), [1 / 16, 1 / 32], wrapped_metric([1.0]))
    elif system == "rotation":
        rho = (math.sqrt(5.0) - 1.0) / 2.0
        segs = iterate_map_segments(lambda p: (p + rho) % 1.0, rng.uniform(0, 1, (n_cloud, 1)), 6)
        est = entropy_separated_sets(segs, range(7), [1 / 16, 1 / 32], wrapped_metric([1.0]))
    elif system == "doubling":
        segs = iterate_map_segments(lambda p: doubling_map(p), rng.uniform(0, 1, (n_cloud, 1)), 6)
        est = entropy_separated_sets(segs, range(7), [1 / 16, 1 / 32, 1 / 64], wrapped_metric([1.0]))
    elif system == "cat":
        segs = iterate_map_segments(cat_map, rng.uniform(0, 1, (n_cloud, 2)), 4)
        est = entropy_separated_sets(segs, [1, 2, 3, 4], [0.35, 0.3], wrapped_metric([1.0, 1.0]))
    elif system == "flow":
        metric = _metric_from_config(cfg)
        period = cfg["profile"].get("L")
        if period is None:
            raise FinslerLabError("flow entropy needs a periodic (spliced) profile")
        horizon = int(ent.get("horizon", 60))
        cloud = sample_unit_level(metric, rng, n_cloud, x2_range=(0.0, float(period)))
        ens_cfg = IntegratorConfig(method="RK45", rel_tol=1e-8, abs_tol=1e-8)
        tr = integrate_ensemble(metric, cloud, float(horizon), ens_cfg, t_eval=np.arange(horizon + 1.0))
        segs = np.swapaxes(tr.states, 0, 1)
        est = entropy_separated_sets(
            segs,
            ent.get("T_list", [0, 10, 20, 40, 60]),
            ent.get("eps", [0.5, 0.3]),
            wrapped_metric([TWO_PI, float(period), None, None]),
        )
    else:
        raise FinslerLabError(f"unknown entropy system {system!r}")
    out = _out_dir(args, "entropy")
    est.to_csv(out / f"entropy_{system}.csv")
    dump_json(
        {"system": system, "value": est.value, "value_eps": est.value_eps, "slopes": est.slopes},
        out / f"entropy_{system}.json",
    )
    print(f"{system}: entropy estimate {est.value:.4f} (eps {est.value_eps})")
    return 0


def _cmd_graphs(args) -> int:
    cfg = _build_config(args)
    metric = _metric_from_config(cfg)
    period = cfg["profile"].get("L")
    if period is None:
        raise FinslerLabError("graph tests need a periodic (spliced) profile")
    period = float(period)
    g = cfg["analysis"].get("graphs", {})
    c = float(g.get("c", 0.2))
    side = int(g.get("side", 256))
    xx1, xx2 = np.meshgrid(
        np.linspace(0.0, TWO_PI, side, endpoint=False),
        np.linspace(0.0, period, side, endpoint=False),
    )
    xi2 = np.array(
        [solve_xi2_on_level(metric, 0.0, x2, c) or math.nan for x2 in np.linspace(0.0, period, side, endpoint=False)]
    )
    xi2_grid = np.tile(xi2, (side, 1)).T.ravel()
    states = np.stack([xx1.ravel(), xx2.ravel(), np.full(xx1.size, c), xi2_grid], axis=1)
    states = states[~np.isnan(states[:, 3])]
    reports = {}
    for nb in g.get("bins", [32, 128]):
        rep = invariant_graph_test(states, x2_period=period, bins=(int(nb), int(nb)))
        reports[str(nb)] = {
            "is_graph": rep.is_graph,
            "max_fiber_gap": rep.max_fiber_gap,
            "lipschitz": rep.lipschitz_estimate,
            "occupied_fraction": rep.occupied_fraction,
        }
    out = _out_dir(args, "graphs")
    dump_json({"c": c, "reports": reports}, out / "graphs.json")
    print(f"graph verdicts: {[(k, v['is_graph']) for k, v in reports.items()]}")
    return 0


def _cmd_tube(args) -> int:
    cfg = _build_config(args)
    metric = _metric_from_config(cfg)
    period = cfg["profile"].get("L")
    if period is None:
        raise FinslerLabError("tube diagnostics need a periodic (spliced) profile")
    period = float(period)
    t = cfg["analysis"].get("tube", {})
    from .profiles import profile_from_spec

    profile = profile_from_spec(cfg["profile"])
    c_lo = float(t.get("c_lo", profile.min_value()))
    c_hi = float(t.get("c_hi", 0.95))
    rng = np.random.default_rng(int(cfg["scenario"].get("seed", 0)))
    ens = sample_tube_states(metric, rng, int(t.get("orbits", 32)), (c_lo + 0.02, c_hi - 0.02), x2_period=period)
    balls = [
        WitnessBall(center=np.array([math.pi, 0.3, 0.5 * (c_lo + c_hi) + off, 0.5]), radius=0.05)
        for off in (0.1, 0.15, -0.12, 0.2, -0.18)
    ]
    report = tube_diagnostics(
        metric,
        TubeSpec(c_lo=c_lo, c_hi=c_hi),
        ens,
        t.get("eps_grid", [0.02, 0.04, 0.08, 0.12, 0.2, 0.3]),
        balls,
        ensemble_time=float(t.get("ensemble_time", 30.0)),
        long_time=float(t.get("long_time", 1000.0)),
    )
    out = _out_dir(args, "tube")
    dump_json(
        {
            "tube": [c_lo, c_hi],
            "eps_grid": report.eps_grid,
            "boundary_fraction": report.boundary_fraction,
            "min_boundary_dists": report.min_boundary_dists,
            "witness_distances": [[c.tolist(), r, d] for (c, r, d) in report.witness_distances],
            "n_failed": report.n_failed,
        },
        out / "tube.json",
    )
    print(f"tube report at {out / 'tube.json'}")
    return 0


def _cmd_validate(args) -> int:
    cfg = _build_config(args)
    metric = _metric_from_config(cfg)
    rng = np.random.default_rng(int(cfg["scenario"].get("seed", 0)))
    x2_range = (0.0, float(cfg["profile"]["L"])) if cfg["profile"].get("kind") == "spliced" else (-2.0, 2.0)
    states = sample_covectors(rng, 1000, x2_range=x2_range)
    scales = rng.uniform(0.3, 3.0, states.shape[0])
    scaled = states.copy()
    scaled[:, 2] *= scales
    scaled[:, 3] *= scales
    h = np.asarray(metric.value(states))
    homo = float(np.max(np.abs(np.asarray(metric.value(scaled)) - scales * h) / (scales * h)))
    gxi = metric.grad_xi(states)
    euler = float(np.max(np.abs(states[:, 2] * gxi[:, 0] + states[:, 3] * gxi[:, 1] - h) / h))
    hess = fiber_convexity_check(metric, states)
    result = {
        "homogeneity_max_rel_err": homo,
        "euler_max_rel_err": euler,
        "hessian_min_eigenvalue": hess.min_eigenvalue,
    }
    if metric.reversible:
        mirrored = states.copy()
        mirrored[:, 2:] *= -1.0
        result["evenness_max_err"] = float(
            np.max(np.abs(np.asarray(metric.value(states)) - np.asarray(metric.value(mirrored))))
        )
    passed = homo <= 1e-10 and euler <= 1e-10 and hess.min_eigenvalue > 0.0
    if metric.reversible:
        passed = passed and result["evenness_max_err"] <= 1e-12
    result["passed"] = passed
    out = _out_dir(args, "validate")
    dump_json(result, out / "validate.json")
    print(f"validate: {'PASS' if passed else 'FAIL'} ({out / 'validate.json'})")
    return 0 if passed else 2


def _cmd_run(args) -> int:
    overrides = [parse_set_option(item) for item in (args.set or [])]
    report = run_scenario(
        args.scenario,
        seed=args.seed,
        config_file=args.config,
        overrides=overrides,
        out_root=args.out or "out",
        write=True,
    )
    for c in report.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.value!r} (tol {c.tolerance!r}) {c.detail}")
    print(f"scenario {report.scenario}: {'PASS' if report.overall_pass else 'FAIL'}")
    return 0 if report.overall_pass else 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file merged over defaults")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="scenario seed")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY.PATH=VALUE",
        help="dotted-path config override (value parsed as JSON when possible)",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="finslerlab",
        description="Rotational Finsler geodesic-flow laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "simulate": _cmd_simulate,
        "section": _cmd_section,
        "rotation": _cmd_rotation,
        "entropy": _cmd_entropy,
        "graphs": _cmd_graphs,
        "tube": _cmd_tube,
        "validate": _cmd_validate,
    }
    for name, help_text in (
        ("simulate", "integrate one orbit and dump it as CSV"),
        ("section", "tabulate a return-map grid as CSV (+SVG)"),
        ("rotation", "rotation number of the section map"),
        ("entropy", "separated-set entropy of a benchmark map or flow"),
        ("graphs", "invariant-graph test of a conserved level set"),
        ("tube", "elliptic-tube boundary/witness diagnostics"),
        ("validate", "metric axiom battery"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
    p_run = sub.add_parser("run", help="run a registered scenario")
    p_run.add_argument("scenario", choices=SCENARIO_NAMES)
    _add_common(p_run)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return handlers[args.command](args)
    except FinslerLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
