"""Command-line entry point.

Subcommands map one-to-one onto library operations: instance summaries and
invariant batteries, net construction, complexity estimates, single solves,
divergence reports, the verification battery, full sweeps, and report
regeneration from saved results.  Every run writes a manifest (config echo,
version, seeds) beside its outputs; identical (config, seed) invocations
produce byte-identical files.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .divergence import build_certificate, divergence_report, verify_concentration
from .errors import InputError, IntegrityError
from .geometry import NormBall, build_net, net_to_json
from .instances import (
    draw_sample,
    instance_from_descriptor,
    make_appendix_instance,
    run_invariant_battery,
)
from .rademacher import adversarial_sample, rad_inverse, rad_mc, rad_upper_bound
from .solver import minimize_empirical, population_minimizer
from .sweep import (
    SweepConfig,
    emit_report,
    load_sweep_result,
    run_sweep,
    sample_size_bound,
)

_FAMILY_DEFAULTS = {
    "coin": {"eps0": 0.1},
    "hard": {"d": 2, "eps0": 0.5, "m": 2, "seed": 7},
    "quadratic": {"centers": [[-1.0], [1.0]], "ball": {"family": "l2", "dim": 1}},
    "appendix": {},
}


def _out_dir(args) -> Path:
    root = args.out or os.environ.get("SCOLAB_OUT") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, subcommand: str, config: dict, seed: int | None) -> None:
    manifest = {
        "tool": "scolab",
        "version": __version__,
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    )


def _instance_from_args(args) -> tuple:
    params = dict(_FAMILY_DEFAULTS[args.family])
    if args.family in ("coin", "hard") and args.eps0 is not None:
        params["eps0"] = args.eps0
    if args.family == "hard":
        if args.dim is not None:
            params["d"] = args.dim
        if args.m is not None:
            params["m"] = args.m
        if args.seed is not None:
            params["seed"] = args.seed
    if args.family == "quadratic" and args.centers is not None:
        centers = json.loads(args.centers)
        params["centers"] = centers
        params["ball"] = {"family": "l2", "dim": len(centers[0])}
    if args.family == "appendix":
        return make_appendix_instance(), params
    return instance_from_descriptor({"family": args.family, "params": params}), params


def _cmd_instance(args) -> int:
    inst, params = _instance_from_args(args)
    battery = run_invariant_battery(inst, probes=args.probes, seed=args.seed or 0)
    print(f"instance:  {inst.label}")
    print(f"dimension: {inst.ball.dim}   lipschitz: {inst.lipschitz:g}   bound: {inst.bound:g}")
    print(f"explicit:  {inst.is_explicit}")
    for name, violation in battery["violations"].items():
        print(f"  {name:<24s} worst violation {violation:+.3e}")
    print("battery:", "PASS" if battery["ok"] else "FAIL")
    return 0 if battery["ok"] else 1


def _cmd_net(args) -> int:
    ball = NormBall(args.family, args.dim, args.p)
    net = build_net(ball, args.eps, candidate_budget=args.budget, seed=args.seed or 0)
    out = _out_dir(args)
    path = out / "net.json"
    net_to_json(net, path)
    _write_manifest(out, "net", {"family": args.family, "dim": args.dim, "eps": args.eps,
                                 "budget": args.budget}, args.seed or 0)
    print(f"net: {len(net)} points, separation {net.separation:g}, "
          f"declared radius {net.radius:g}, measured {net.measured_radius:g}")
    print(f"wrote {path}")
    return 0


def _cmd_rad(args) -> int:
    ball = NormBall(args.family, args.dim, args.p)
    if args.inverse is not None:
        print(rad_inverse(ball, args.inverse))
        return 0
    if args.upper is not None:
        print(repr(rad_upper_bound(ball, args.upper)))
        return 0
    if args.mc is not None:
        sample = adversarial_sample(ball, args.mc, args.seed or 0)
        est = rad_mc(ball, sample, trials=args.trials, seed=args.seed or 0)
        print(f"{est.value!r} (stderr {est.stderr:.3g}, n={est.n}, {est.method})")
        return 0
    raise InputError("rad needs one of --inverse, --upper, --mc")


def _cmd_erm(args) -> int:
    inst, params = _instance_from_args(args)
    sample = draw_sample(inst, args.n, args.seed or 0)
    report = minimize_empirical(inst, sample, args.tol)
    payload = {
        "instance": {"family": args.family, "params": params},
        "n": args.n,
        "point": report.point.tolist(),
        "value": report.value,
        "tol": report.tol,
        "iterations": report.iterations,
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_divergence(args) -> int:
    inst, params = _instance_from_args(args)
    x = np.array([float(v) for v in args.x.split(",")])
    sample = draw_sample(inst, args.n, args.seed or 0)
    xstar = population_minimizer(inst, args.tol).point
    cert = build_certificate(inst, xstar, tol=1e-8)
    net = None
    if not cert.is_constant:
        net = build_net(inst.ball, args.net_eps, seed=args.seed or 0)
    report = divergence_report(cert, inst, sample, x, net)
    payload = {
        "instance": {"family": args.family, "params": params},
        "minimizer": xstar.tolist(),
        "certificate_violation": cert.violation,
        "population_divergence": report.population_divergence,
        "empirical_divergence": report.empirical_divergence,
        "truncated_population": report.truncated_population,
        "truncated_empirical": report.truncated_empirical,
        "representativeness": report.representativeness,
        "certificate": report.certificate_label,
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _default_verify_config() -> dict:
    return {
        "seed": 20260810,
        "battery_probes": 400,
        "concentration_trials": 2000,
        "rep_trials": 200,
        "claims_trials": 200,
    }


def _cmd_verify(args) -> int:
    from .verifybattery import run_verification

    config = _default_verify_config()
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - set(config)
        if unknown:
            raise InputError(f"unknown verify config keys: {sorted(unknown)}")
        config.update(loaded)
    if args.seed is not None:
        config["seed"] = args.seed
    battery = run_verification(config, quick=args.quick)
    checks = battery["checks"]
    width = max(len(name) for name, _ in checks)
    failures = 0
    for name, ok in checks:
        print(f"{name:<{width}s}  {'PASS' if ok else 'FAIL'}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    if args.out or os.environ.get("SCOLAB_OUT"):
        from .divergence import concentration_reports_to_csv

        out = _out_dir(args)
        (out / "verification.csv").write_text(
            concentration_reports_to_csv(battery["concentration"])
        )
        (out / "verification.json").write_text(
            json.dumps(battery["concentration"], sort_keys=True, separators=(",", ":"))
        )
        _write_manifest(out, "verify", config, config["seed"])
    return 0 if failures == 0 else 1


def _cmd_sweep(args) -> int:
    data = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        data["master_seed"] = args.seed
    cfg = SweepConfig.from_dict(data)
    result = run_sweep(cfg, jobs=max(1, args.jobs))
    out = _out_dir(args)
    paths = emit_report(result, out)
    _write_manifest(out, "sweep", cfg.to_dict(), cfg.master_seed)
    for label, path in paths.items():
        print(f"{label}: {path}")
    print(f"cells: {len(result.cells)}   thresholds: {len(result.thresholds)}   "
          f"claim violations: {result.claim_violations}")
    return 0


def _cmd_report(args) -> int:
    result = load_sweep_result(args.results)
    out = _out_dir(args)
    paths = emit_report(result, out)
    _write_manifest(out, "report", {"results": str(args.results)}, None)
    for label, path in paths.items():
        print(f"{label}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scolab",
        description="Stochastic convex optimization generalization laboratory",
    )
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, seed_help="master seed"):
        p.add_argument("--out", "-o", help="output directory (default $SCOLAB_OUT or .)")
        p.add_argument("--seed", type=int, default=None, help=seed_help)
        p.add_argument("--jobs", type=int, default=1, help="worker pool size")

    def add_family(p):
        p.add_argument("--family", required=True,
                       choices=["coin", "hard", "quadratic", "appendix"])
        p.add_argument("--eps0", type=float, default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--centers", help="JSON list of center vectors")

    p_inst = sub.add_parser("instance", help="print a family summary and its invariant battery")
    add_family(p_inst)
    p_inst.add_argument("--probes", type=int, default=1000)
    add_common(p_inst)
    p_inst.set_defaults(func=_cmd_instance)

    p_net = sub.add_parser("net", help="build and save a packing net")
    p_net.add_argument("--family", default="l2", choices=["l1", "l2", "linf", "lp"])
    p_net.add_argument("--dim", type=int, required=True)
    p_net.add_argument("--p", type=float, default=None)
    p_net.add_argument("--eps", type=float, required=True)
    p_net.add_argument("--budget", type=int, default=20000)
    add_common(p_net)
    p_net.set_defaults(func=_cmd_net)

    p_rad = sub.add_parser("rad", help="complexity estimates and inverse lookups")
    p_rad.add_argument("--family", default="l2", choices=["l1", "l2", "linf"])
    p_rad.add_argument("--dim", type=int, default=1)
    p_rad.add_argument("--p", type=float, default=None)
    p_rad.add_argument("--inverse", type=float, default=None,
                       help="print the smallest n with bound below this eps")
    p_rad.add_argument("--upper", type=int, default=None,
                       help="print the closed-form bound at this n")
    p_rad.add_argument("--mc", type=int, default=None,
                       help="Monte Carlo estimate on an adversarial sample of this size")
    p_rad.add_argument("--trials", type=int, default=2000)
    add_common(p_rad)
    p_rad.set_defaults(func=_cmd_rad)

    p_erm = sub.add_parser("erm", help="solve one (instance, sample)")
    add_family(p_erm)
    p_erm.add_argument("--n", type=int, required=True)
    p_erm.add_argument("--tol", type=float, default=0.01)
    add_common(p_erm)
    p_erm.set_defaults(func=_cmd_erm)

    p_div = sub.add_parser("divergence", help="certificate and divergence report at a point")
    add_family(p_div)
    p_div.add_argument("--x", required=True, help="comma-separated coordinates")
    p_div.add_argument("--n", type=int, default=100)
    p_div.add_argument("--tol", type=float, default=0.01)
    p_div.add_argument("--net-eps", type=float, default=0.1)
    add_common(p_div)
    p_div.set_defaults(func=_cmd_divergence)

    p_verify = sub.add_parser("verify", help="run the verification battery")
    p_verify.add_argument("--config", default=None, help="JSON overrides for the battery")
    p_verify.add_argument("--quick", action="store_true", help="smaller trial counts")
    add_common(p_verify)
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="run a full sweep from a config file")
    p_sweep.add_argument("--config", required=True)
    add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_report = sub.add_parser("report", help="regenerate CSV/SVG from results.json")
    p_report.add_argument("--results", required=True)
    add_common(p_report)
    p_report.set_defaults(func=_cmd_report)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IntegrityError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
