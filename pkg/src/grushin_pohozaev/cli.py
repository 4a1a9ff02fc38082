"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 residual above threshold.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .exceptions import ConfigError, DomainRangeError, GrushinError, SingularSlabError
from .config import load_config
from .geometry import Grid, SubBox
from .pohozaev import check_singular_slab
from .solver import picard_solve
from .studies import (
    StudyAborted,
    identity_report,
    observed_order,
    refinement_study,
    stationarity_study,
    whole_space_study,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_THRESHOLD = 0, 1, 2, 3
IDENTITIES = ("translate-x", "translate-y", "scale-local", "scale-global")

logger = logging.getLogger("grushin_pohozaev")


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.solver.seed = args.seed
    if args.threshold is not None:
        cfg.threshold = args.threshold
    os.makedirs(args.out, exist_ok=True)
    return cfg


def _solve(cfg, grid):
    return picard_solve(cfg.nonlinearity, cfg.geometry, grid, cfg.solver)


def _check_index(cfg, kind, index):
    if kind not in ("translate-x", "translate-y"):
        return
    count = cfg.geometry.N if kind == "translate-x" else cfg.geometry.l
    if index is None or not 1 <= index <= count:
        raise ConfigError(f"{kind} needs an axis index in 1..{count}, got {index}")


def cmd_solve(args):
    cfg = _prepare(args)
    grid = Grid(cfg.bounds, cfg.resolution)
    try:
        u, trace, reports = _solve(cfg, grid)
    except GrushinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    u.to_csv(os.path.join(args.out, "solution.csv"))
    reports[-1].to_csv(os.path.join(args.out, "trace.csv"))
    rep = reports[-1]
    _write_json(
        os.path.join(args.out, "solve.json"),
        {
            "converged": rep.converged,
            "energy": rep.energy,
            "grad_norm": rep.grad_norm,
            "iterations": rep.iterations,
            "picard_trace": trace,
            "h": list(grid.spacing),
        },
    )
    if not rep.converged:
        print(f"solver did not converge (|grad| = {rep.grad_norm:.3e})", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _subdomain(cfg, grid, kind):
    if kind == "scale-global":
        return None
    if cfg.subdomain is None:
        raise ConfigError(f"{kind} needs a subdomain entry")
    try:
        return SubBox.from_bounds(grid, *cfg.subdomain)
    except (ValueError, DomainRangeError) as exc:
        raise ConfigError(f"subdomain: {exc}") from None


def cmd_verify(args):
    cfg = _prepare(args)
    kind, index = args.identity, args.index
    _check_index(cfg, kind, index)
    if args.levels is not None:
        return _verify_refinement(args, cfg, kind, index)
    grid = Grid(cfg.bounds, cfg.resolution)
    D = _subdomain(cfg, grid, kind)
    if D is not None and kind == "translate-x":
        check_singular_slab(D, cfg.geometry)
    try:
        u, _, reports = _solve(cfg, grid)
    except GrushinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if not reports[-1].converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_SOLVER
    report = identity_report(kind, u, cfg.nonlinearity, cfg.geometry, D, index)
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    print(f"{kind}: relative residual {report.relative_residual:.3e}")
    return EXIT_OK if report.relative_residual <= cfg.threshold else EXIT_THRESHOLD


def _verify_refinement(args, cfg, kind, index):
    levels = cfg.levels(args.levels)
    if cfg.subdomain is not None:
        # singular-slab and placement checks before any solve
        for m in levels:
            D = _subdomain(cfg, Grid(cfg.bounds, (m,) * len(cfg.bounds)), kind)
            if D is not None and kind == "translate-x":
                check_singular_slab(D, cfg.geometry)
    elif kind != "scale-global":
        raise ConfigError(f"{kind} needs a subdomain entry")
    try:
        table = refinement_study(
            kind, cfg.nonlinearity, cfg.geometry, cfg.bounds, levels, cfg.subdomain, index, cfg.solver
        )
    except StudyAborted as exc:
        exc.table.to_csv(os.path.join(args.out, "refinement.csv"))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    table.to_csv(os.path.join(args.out, "refinement.csv"))
    _write_json(os.path.join(args.out, "refinement.json"), {"kind": kind, **table.to_dict()})
    finest = table.rows[-1][2]
    print(f"{kind}: finest relative residual {finest:.3e}, order {table.summary['order']:.3f}")
    return EXIT_OK if finest <= cfg.threshold else EXIT_THRESHOLD


def cmd_study(args):
    cfg = _prepare(args)
    st = cfg.study
    try:
        if args.kind == "refinement":
            kind = st.get("identity", "scale-local")
            if kind not in IDENTITIES:
                raise ConfigError(f"unknown study.identity {kind!r}")
            _check_index(cfg, kind, st.get("index"))
            if kind != "scale-global" and cfg.subdomain is None:
                raise ConfigError(f"{kind} needs a subdomain entry")
            table = refinement_study(
                kind,
                cfg.nonlinearity,
                cfg.geometry,
                cfg.bounds,
                cfg.levels(args.levels),
                cfg.subdomain,
                st.get("index"),
                cfg.solver,
            )
            name = "refinement"
        elif args.kind == "whole-space":
            if "radii" not in st or "h" not in st:
                raise ConfigError("whole-space study needs study.radii and study.h")
            table = whole_space_study(cfg.nonlinearity, cfg.geometry, st["radii"], st["h"], cfg.solver)
            name = "whole_space"
        else:
            if cfg.subdomain is None or "delta" not in st:
                raise ConfigError("stationarity study needs a subdomain and study.delta")
            amp = float(st.get("perturbation", 0.0))
            center = np.array([0.5 * (a + b) for a, b in zip(*cfg.subdomain)])
            bump = None
            if amp:
                bump = lambda z: amp * np.exp(-8.0 * np.sum((z - center) ** 2, axis=-1))  # noqa: E731
            table = stationarity_study(
                cfg.nonlinearity,
                cfg.geometry,
                cfg.bounds,
                cfg.levels(args.levels),
                cfg.subdomain,
                float(st["delta"]),
                kind=st.get("variation", "translate"),
                axis=int(st.get("axis", 1)) - 1,
                steps=tuple(st.get("steps", (0.005, 0.0025, 0.00125, 0.000625))),
                oversample=int(st.get("oversample", 3)),
                perturbation=bump,
                cfg=cfg.solver,
            )
            name = "stationarity"
    except StudyAborted as exc:
        exc.table.to_csv(os.path.join(args.out, f"{args.kind.replace('-', '_')}.csv"))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if name == "whole_space":
        table.summary["boundary_term_decreasing"] = _strictly_decreasing(table.column("boundary_term"))
        table.summary["residual_decreasing"] = _strictly_decreasing(table.column("whole_space_residual"))
    elif name == "stationarity":
        table.summary["order"] = observed_order(table.column("h"), table.column("slope"))
    table.to_csv(os.path.join(args.out, f"{name}.csv"))
    _write_json(os.path.join(args.out, f"{name}.json"), table.to_dict())
    for k, v in table.summary.items():
        print(f"{k}: {v}")
    return EXIT_OK


def _strictly_decreasing(values):
    a = np.abs(np.asarray(values, dtype=float))
    return bool(np.all(np.diff(a) < 0))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--threshold", type=float, help="relative residual bound (overrides config)")
    common.add_argument("--levels", type=int, help="number of refinement levels")
    common.add_argument("--seed", type=int, help="seed for random initialization")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="grushin-pohozaev",
        description="Solve degenerate p-sub-Laplacian problems and check Pohozaev identities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve and write the solution field")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="solve and evaluate one identity")
    p.add_argument("identity", choices=IDENTITIES)
    p.add_argument("index", nargs="?", type=int, help="1-based axis for translate-x / translate-y")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("study", parents=[common], help="refinement, whole-space or stationarity study")
    p.add_argument("kind", choices=("refinement", "whole-space", "stationarity"))
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, SingularSlabError, DomainRangeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
