"""Command line entry point: ``machlab {sweep,demo-averaging,check-projections,single-run}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import averaging, harness
from .leray import P, check_projection_identities, decoupling_residual
from .spectral import gradient, make_grid, random_scalar, random_vector, sobolev_norm

log = logging.getLogger("machlab")

PROJECTION_TOL = 1e-10


def _config(args) -> harness.RunConfig:
    cfg = harness.load_config(args.config) if args.config else harness.RunConfig()
    over = {}
    if args.eps:
        over["eps"] = tuple(float(x) for x in args.eps.replace(",", " ").split())
    if args.geometry:
        over["geometry"] = args.geometry
    if args.prep:
        over["prep"] = args.prep
    if args.seed is not None:
        over["seed"] = args.seed
    if args.resolution:
        parts = args.resolution.lower().split("x")
        over["nx"], over["ny"] = int(parts[0]), int(parts[-1])
    return cfg.replace(**over)


def _print_checks(checks: dict) -> None:
    for name, c in checks.items():
        val = c.get("value")
        shown = "n/a" if val is None else f"{val:.3f}"
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name:18s} {shown}")


def cmd_sweep(args) -> int:
    cfg = _config(args)
    log.info("sweep %s, config hash %s", cfg.eps, cfg.hash())
    report = harness.run_convergence_sweep(cfg)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    for p in harness.emit_report(report, args.out, formats):
        print(f"wrote {p}")
    for name, fit in report.slopes.items():
        print(f"slope {name:18s} {fit['slope']:.3f}")
    for w in report.warnings:
        print(f"warning: {w}")
    _print_checks(report.checks)
    return 0 if report.passed else 1


def cmd_demo_averaging(args) -> int:
    eps = (0.1, 0.05, 0.025, 0.0125)
    if args.eps:
        eps = tuple(float(x) for x in args.eps.replace(",", " ").split())
    system = averaging.example_system("nonskew", seed=args.seed or 0)
    res = averaging.forcing_sensitivity_experiment(system, eps)
    for e, err, ctl in zip(res["eps"], res["errors"], res["control_errors"]):
        print(f"eps={e:<8g} oscillating {err:.4e}   constant {ctl:.4e}")
    checks = {
        "oscillating_slope": {"value": res.get("slope"),
                              "passed": res.get("slope", 0.0) >= 0.9},
        "control_slope": {"value": res.get("control_slope"),
                          "passed": abs(res.get("control_slope", 1.0)) <= 0.1},
        "a_priori_bound": {"value": None, "passed": res["bound_ok"]},
    }
    _print_checks(checks)
    return 0 if all(c["passed"] for c in checks.values()) else 1


def projection_residuals(geometry: str, n_fields: int = 100, seed: int = 0, n: int = 32) -> dict:
    """Worst relative residuals of the projection identities over random fields."""
    g = make_grid(geometry, n, n if geometry == "torus" else n // 2)
    rng = np.random.default_rng(seed)
    worst = {}
    for _ in range(n_fields):
        v = random_vector(g, rng)
        scale = sobolev_norm(v)
        res = {k: val / scale for k, val in check_projection_identities(v).items()}
        f = random_scalar(g, rng)
        gf = gradient(f)
        res["gradient"] = sobolev_norm(P(gf)) / max(sobolev_norm(gf), 1e-300)
        res["decoupling"] = decoupling_residual(v) / max(scale * sobolev_norm(v, 1), 1e-300)
        for k, val in res.items():
            worst[k] = max(worst.get(k, 0.0), val)
    return worst


def cmd_check_projections(args) -> int:
    geoms = [args.geometry] if args.geometry else ["torus", "channel"]
    ok = True
    for geo in geoms:
        worst = projection_residuals(geo, seed=args.seed or 0)
        for k, val in worst.items():
            passed = val <= PROJECTION_TOL
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'}  {geo:8s} {k:14s} {val:.2e}")
    return 0 if ok else 1


def cmd_single_run(args) -> int:
    cfg = _config(args)
    eps = cfg.eps[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row = harness.run_epsilon(cfg, eps, checkpoint_dir=out, checkpoint_every=args.checkpoint_every)
    path = out / f"single_eps{eps:g}.json"
    path.write_text(json.dumps(row, indent=2, sort_keys=True))
    for k in harness.CSV_COLUMNS:
        print(f"{k:18s} {row.get(k)}")
    print(f"wrote {path}")
    return 0 if row["valid"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="machlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="key = value run configuration file")
        p.add_argument("--eps", help="comma separated eps list (descending)")
        p.add_argument("--geometry", choices=["torus", "channel"])
        p.add_argument("--prep", choices=["well", "ill"])
        p.add_argument("--out", default="machlab_out", help="output directory")
        p.add_argument("--format", default="csv,json,svg", help="subset of csv,json,svg")
        p.add_argument("--seed", type=int)
        p.add_argument("--resolution", help="N or NXxNY")

    for verb, fn in [("sweep", cmd_sweep), ("demo-averaging", cmd_demo_averaging),
                     ("check-projections", cmd_check_projections), ("single-run", cmd_single_run)]:
        p = sub.add_parser(verb)
        common(p)
        if verb == "single-run":
            p.add_argument("--checkpoint-every", type=int, default=0,
                           help="write snapshots every N steps (0: final state only)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
