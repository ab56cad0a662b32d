"""
Command-line front end.

    caginalp solve --config run.yaml [--method homotopy|stepping] [--out DIR] [--seed N]
    caginalp check-hypotheses --config run.yaml [--out DIR]
    caginalp verify [--config run.yaml] [--out DIR] [--seed N]
    caginalp plotdata RUN_DIR [--out DIR]

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 acceptance failure.
``CAGINALP_LOG`` sets the log level (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from ._io import atomic_write, atomic_write_json
from .config import build_m4, build_nonlinearity, build_run, check_exponents, config_hash, read_config
from .coupled_solver import load_manifest, save_solution, solve_system
from .errors import ConfigError, SolverError
from .mesh import Grid, read_trajectory_csv, space_norms
from .nonlinearity import check_hypotheses
from .verification import run_acceptance_suite, suite_passed

log = logging.getLogger("caginalp")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _setup_logging() -> None:
    level = os.environ.get("CAGINALP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load(args) -> dict:
    cfg = read_config(args.config)
    if getattr(args, "method", None):
        cfg["solver"]["method"] = args.method
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = int(args.seed)
    if getattr(args, "out", None):
        cfg["output"]["dir"] = str(args.out)
    return cfg


def cmd_solve(args) -> int:
    cfg = _load(args)
    run = build_run(cfg, args.allow_unverified_exponents)
    if (run.out_dir / "manifest.json").exists():
        raise ConfigError(f"{run.out_dir} already holds a finished run")
    pair = solve_system(run.system, run.method)
    path = save_solution(pair, run.system, run.out_dir, run.hash, {"seed": run.seed, "config": run.raw})
    print(path)
    return EXIT_OK


def cmd_check_hypotheses(args) -> int:
    cfg = _load(args)
    F = build_nonlinearity(cfg)
    check_exponents(cfg, F, args.allow_unverified_exponents)
    nl = cfg["nonlinearity"]
    reports = check_hypotheses(
        F,
        box=float(nl["box"]),
        samples=int(nl["samples"]),
        p=float(cfg["physics"]["p"]),
        N=len(cfg["grid"]["nodes"]),
        m4=build_m4(cfg),
    )
    out = Path(cfg["output"]["dir"]) / "hypotheses.json"
    atomic_write_json(out, {"config_hash": config_hash(cfg), "nonlinearity": F.name, "reports": [r.to_json() for r in reports]})
    print(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config:
        cfg = _load(args)
    else:
        from .config import normalize

        cfg = normalize({})
        if args.seed is not None:
            cfg["seed"] = int(args.seed)
        if args.out:
            cfg["output"]["dir"] = str(args.out)
    spec = {"criteria": cfg["verify"]["criteria"], "overrides": cfg["verify"]["overrides"], "seed": cfg["seed"]}
    entries = run_acceptance_suite(spec)
    out = Path(cfg["output"]["dir"]) / "acceptance.json"
    atomic_write_json(out, entries)
    for e in entries:
        print(f"{'PASS' if e['pass'] else 'FAIL'} [{e['criterion']}] {e['case_id']} measured={e['measured']} bound={e['bound']}")
    return EXIT_OK if suite_passed(entries) else EXIT_ACCEPTANCE


def plot_rows(run_dir) -> tuple[list[str], np.ndarray, list[dict]]:
    """Per-frame norms recomputed from the stored CSVs, plus conservation drift and residuals."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"run directory {run_dir} not found")
    m = load_manifest(run_dir)
    grid = Grid(tuple(m["grid"]["extents"]), tuple(m["grid"]["nodes"]))
    u = read_trajectory_csv(run_dir / m["files"]["u"], grid, m["dt"])
    phi = read_trajectory_csv(run_dir / m["files"]["phi"], grid, m["dt"])
    cols = {
        "t": np.asarray(m["times"]),
        "u_L2": space_norms(grid, u.values, 2),
        "u_Linf": space_norms(grid, u.values, math.inf),
        "phi_L2": space_norms(grid, phi.values, 2),
        "phi_Linf": space_norms(grid, phi.values, math.inf),
        "conservation_drift": np.asarray(m["conservation"]["drift"]),
    }
    residuals = []
    for name, led in m.get("ledgers", {}).items():
        for row in led["rows"]:
            if row["residual"] is not None:
                residuals.append({"ledger": name, "lambda": row["lambda"], "iter": row["iter"], "residual": row["residual"]})
    return list(cols), np.column_stack(list(cols.values())), residuals


def cmd_plotdata(args) -> int:
    header, data, residuals = plot_rows(args.run_dir)
    out = Path(args.out) if args.out else Path(args.run_dir)
    atomic_write(
        out / "timeseries.csv",
        lambda tmp: np.savetxt(tmp, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g"),
    )

    def write_res(tmp):
        with open(tmp, "w") as fh:
            fh.write("ledger,lambda,iter,residual\n")
            for r in residuals:
                fh.write(f"{r['ledger']},{r['lambda']!r},{r['iter']},{r['residual']!r}\n")

    atomic_write(out / "residuals.csv", write_res)
    print(out / "timeseries.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caginalp", description="Coupled phase-field / heat solver and checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="random seed (overrides seed)")
        p.add_argument(
            "--allow-unverified-exponents",
            action="store_true",
            help="run even if the growth exponent is not admissible for p and the dimension",
        )

    p = sub.add_parser("solve", help="solve the coupled system and write u.csv, phi.csv, manifest.json")
    common(p)
    p.add_argument("--method", choices=["homotopy", "stepping"])
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check-hypotheses", help="estimate hypothesis constants and write hypotheses.json")
    common(p)
    p.set_defaults(func=cmd_check_hypotheses)

    p = sub.add_parser("verify", help="run the acceptance suite and write acceptance.json")
    common(p, config_required=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plotdata", help="write timeseries.csv and residuals.csv for a finished run")
    p.add_argument("run_dir")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
