"""Command line entry point: ``varsol verify | check | demo``.

Exit codes: 0 all checks pass, 1 a check failed, 2 config or usage error,
3 numerical breakdown (including scenarios flagged for excessive skips).
"""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources

import numpy as np

from .campaign import SUITE_CHOICES, format_table, load_campaign, run_campaign
from .errors import ConfigError, DomainError, VarsolError
from .hierarchy import bateman
from .implicit import FamilySpec, explicit_sample, sample_field
from .lagrangian import TINY, LagrangianSpec, lagrangian_jet
from .version import __version__

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

WEIGHT_TOL = 1e-12
NULLVECTOR_TOL = 1e-10


def default_config_path() -> str:
    return str(resources.files("varsol") / "data" / "default_campaign.json")


def cmd_verify(args: argparse.Namespace) -> int:
    overrides = {"suite": args.suite, "seed": args.seed, "samples": args.samples, "tolerance": args.tol, "order": args.order}
    if args.mix:
        overrides["mix"] = [s.strip() for s in args.mix.split(",") if s.strip()]
    campaign = load_campaign(args.config, overrides)
    start = time.perf_counter()
    report = run_campaign(campaign)
    elapsed = time.perf_counter() - start
    if args.report:
        try:
            with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(report.to_json())
        except OSError as exc:
            print(f"error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    if not args.quiet:
        print(format_table(report))
    print(f"wall time {elapsed:.2f} s; exit {report.exit_code}")
    for rec in report.failures()[: args.show_failures]:
        print(f"FAIL {rec['scenario']} #{rec['sample']} {rec['check']}: normalized {rec['normalized']} > {rec['tolerance']}")
    return report.exit_code


def homogeneity_scan(L: LagrangianSpec, points: int, seed: int) -> dict:
    """Weight-one and null-vector defects at random gradients in [0.5, 1.5]^n."""
    rng = np.random.default_rng(seed)
    worst_w = worst_m = 0.0
    skipped = 0
    for _ in range(points):
        g = rng.uniform(0.5, 1.5, size=L.n)
        phi = float(rng.uniform(-1.0, 1.0))
        try:
            jet = lagrangian_jet(L, g, phi)
        except DomainError:
            skipped += 1
            continue
        w = abs(float(g @ jet.dg) - jet.value) / (abs(jet.value) + TINY)
        m = float(np.linalg.norm(jet.M @ g)) / (float(np.linalg.norm(jet.M)) * float(np.linalg.norm(g)) + TINY)
        worst_w, worst_m = max(worst_w, w), max(worst_m, m)
    return {"weight_one_defect": worst_w, "hessian_nullvector": worst_m, "skipped": skipped, "points": points}


def cmd_check(args: argparse.Namespace) -> int:
    try:
        L = LagrangianSpec(args.n, args.lagrangian)
    except (VarsolError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    scan = homogeneity_scan(L, args.points, args.seed)
    evaluated = scan["points"] - scan["skipped"]
    print(f"L = {L.text}   n = {L.n}   points = {evaluated} (skipped {scan['skipped']})")
    ok_w = scan["weight_one_defect"] <= WEIGHT_TOL
    ok_m = scan["hessian_nullvector"] <= NULLVECTOR_TOL
    print(f"weight_one_defect   max normalized {scan['weight_one_defect']:.3e}  tol {WEIGHT_TOL:.0e}  {'pass' if ok_w else 'FAIL'}")
    print(f"hessian_nullvector  max normalized {scan['hessian_nullvector']:.3e}  tol {NULLVECTOR_TOL:.0e}  {'pass' if ok_m else 'FAIL'}")
    if evaluated == 0:
        return EXIT_NUMERIC
    return EXIT_OK if ok_w and ok_m else EXIT_FAIL


def cmd_demo(args: argparse.Namespace) -> int:
    family = FamilySpec(("phi", "phi^2"), 1.0, guess=0.6)
    print("Bateman form phi_2^2 phi_11 - 2 phi_1 phi_2 phi_12 + phi_1^2 phi_22")
    print("universal solution: x1*phi + x2*phi^2 = 1;  control field: x1*x2")
    print(f"{'t':>5} {'x1':>7} {'x2':>7} {'universal':>12} {'normalized':>11} {'control':>10}")
    worst = 0.0
    for t in np.linspace(0.0, 1.0, args.points):
        x = np.array([0.5 + t, 1.5 - 0.5 * t])
        s = sample_field(family, x)
        b = bateman(s)
        norm = abs(b) / (float(s.grad @ s.grad) * float(np.linalg.norm(s.hess)) + TINY)
        worst = max(worst, norm)
        ctrl = bateman(explicit_sample("x1*x2", x))
        print(f"{t:5.2f} {x[0]:7.3f} {x[1]:7.3f} {b:12.3e} {norm:11.3e} {ctrl:10.4f}")
    print(f"max normalized residual on the universal solution: {worst:.3e}")
    return EXIT_OK if worst <= 1e-8 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varsol", description="Universal solutions of weight-one variational problems.")
    p.add_argument("--version", action="version", version=f"varsol {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification campaign")
    v.add_argument("suite", choices=SUITE_CHOICES)
    v.add_argument("--config", default=None, help="campaign JSON (default: bundled campaign)")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--tol", type=float, default=None, help="override every tolerance")
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--order", type=int, default=None, help="restrict the hierarchy suite to one order r")
    v.add_argument("--mix", default=None, help="comma-separated Lagrangian labels for mixed iteration")
    v.add_argument("--report", default=None, help="write the JSON report here")
    v.add_argument("--quiet", action="store_true", help="omit the per-check table")
    v.add_argument("--show-failures", type=int, default=10, metavar="K")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("check", help="check a single Lagrangian")
    c.add_argument("what", choices=["homogeneity"])
    c.add_argument("--lagrangian", required=True, help="expression in g1..gN and phi")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--points", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    d = sub.add_parser("demo", help="print a worked example")
    d.add_argument("what", choices=["bateman"])
    d.add_argument("--points", type=int, default=6)
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", "unset") is None:
        args.config = default_config_path()
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VarsolError as exc:
        print(f"numerical breakdown: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
