"""Experiment harness: generate data, run solvers, emit traces and tables.

Subcommands
-----------
``generate``
    Write a synthetic instance (observed matrix, true factors, spec
    sidecar) as CSV files.
``solve``
    Run one method (``binno``, ``palm``, ``nmf``) on a data source and
    write a JSON report plus a per-iteration trace CSV.  Prints a
    machine-parseable summary line ``method,time,rel_error,psnr``.
``compare``
    Run several methods on the same instance(s), optionally repeated with
    shifted seeds, and write a mean/std table CSV.

Exit codes: 0 success, 1 solver failure (stalled stepsize), 2 usage or
I/O error.  ``BINNO_LOG={error|info|debug}`` controls stderr verbosity.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import nmf_lee_seung, palm_from_bilevel, palm_solve
from .bilevel import SolverConfig
from .data import (
    SyntheticSpec,
    frames_to_matrix,
    generate,
    load_matrix_csv,
    save_matrix_csv,
)
from .exceptions import BinnoError
from .metrics import evaluate
from .report import RunReport
from .slrf import SlrfParams, build_problem, default_init, solve_slrf

logger = logging.getLogger("binno")

METHODS = ("binno", "palm", "nmf")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


@dataclass
class ExperimentConfig:
    """One resolved experiment cell: method, data source, and knobs."""

    method: str
    data: str  # "synthetic", "csv", or "frames"
    csv: str | None
    frames: str | None
    spec: SyntheticSpec
    lambda1: float
    lambda2: float
    gamma1: float
    gamma2: float
    rank: int
    solver: SolverConfig
    out: str | None


def _setup_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("BINNO_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(message)s", force=True
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binno", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_flags(p):
        p.add_argument("--data", choices=["synthetic"], default="synthetic",
                       help="built-in data source (default: synthetic)")
        p.add_argument("--csv", help="load the data matrix from a CSV file")
        p.add_argument("--frames", help="load 8-bit PGM frames from a directory")
        p.add_argument("--rows", type=int, default=100, help="synthetic rows")
        p.add_argument("--cols", type=int, default=80, help="synthetic columns")
        p.add_argument("--sparsity", type=float, default=0.30,
                       help="synthetic nonzero fraction per factor entry")
        p.add_argument("--noise-std", type=float, default=0.01,
                       help="synthetic additive noise standard deviation")

    def add_solver_flags(p):
        p.add_argument("--lambda1", type=float, default=0.1)
        p.add_argument("--lambda2", type=float, default=0.1)
        p.add_argument("--gamma1", type=float, default=0.1)
        p.add_argument("--gamma2", type=float, default=0.1)
        p.add_argument("--rank", type=int, default=5)
        p.add_argument("--max-iters", type=int, default=1000)
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--nu-min", type=float, default=1e-10)
        p.add_argument("--safety-factor", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON config file; file values win over flags")

    gen = sub.add_parser("generate", help="write a synthetic instance as CSV files")
    gen.add_argument("--rows", type=int, default=100)
    gen.add_argument("--cols", type=int, default=80)
    gen.add_argument("--rank", type=int, default=5)
    gen.add_argument("--sparsity", type=float, default=0.30)
    gen.add_argument("--noise-std", type=float, default=0.01)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--config", help="JSON config file; file values win over flags")
    gen.add_argument("--out", required=True, help="output directory")

    slv = sub.add_parser("solve", help="run one method and write report + trace")
    slv.add_argument("--method", choices=METHODS, default="binno")
    add_data_flags(slv)
    add_solver_flags(slv)
    slv.add_argument("--out", help="output directory for report.json and trace.csv")

    cmp_ = sub.add_parser("compare", help="run methods side by side, write a table")
    cmp_.add_argument("--method", default="binno,nmf",
                      help="comma-separated method list (default: binno,nmf)")
    cmp_.add_argument("--repeats", type=int, default=1,
                      help="independent repetitions per method (seeds shift by 1)")
    add_data_flags(cmp_)
    add_solver_flags(cmp_)
    cmp_.add_argument("--out", required=True, help="output CSV table path")
    return parser


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Overlay values from ``--config`` JSON; the file wins on conflict."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config file {args.config}: {exc}")
    if not isinstance(overrides, dict):
        parser.error(f"config file {args.config} must hold a JSON object")
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            parser.error(f"unknown config key {key!r} in {args.config}")
        setattr(args, dest, value)


def _experiment_from_args(args: argparse.Namespace, method: str) -> ExperimentConfig:
    if args.csv and args.frames:
        raise BinnoError("exactly one data source required: got both --csv and --frames")
    data = "csv" if args.csv else "frames" if args.frames else "synthetic"
    spec = SyntheticSpec(
        m=args.rows,
        n=args.cols,
        rank=args.rank,
        sparsity=args.sparsity,
        noise_std=args.noise_std,
        seed=args.seed,
    )
    solver = SolverConfig(
        max_iters=args.max_iters,
        tol=args.tol,
        nu_min=args.nu_min,
        safety_factor=args.safety_factor,
        seed=args.seed,
    )
    return ExperimentConfig(
        method=method,
        data=data,
        csv=args.csv,
        frames=args.frames,
        spec=spec,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        gamma1=args.gamma1,
        gamma2=args.gamma2,
        rank=args.rank,
        solver=solver,
        out=getattr(args, "out", None),
    )


def _load_matrix(config: ExperimentConfig) -> np.ndarray:
    if config.data == "csv":
        logger.info("loading matrix from %s", config.csv)
        return load_matrix_csv(config.csv)
    if config.data == "frames":
        paths = sorted(Path(config.frames).glob("*.pgm"))
        if not paths:
            raise BinnoError(f"no .pgm frames found in {config.frames}")
        logger.info("loading %d frames from %s", len(paths), config.frames)
        return frames_to_matrix(paths)
    logger.info("generating synthetic instance with seed %d", config.spec.seed)
    return generate(config.spec).m_observed


def _run_method(config: ExperimentConfig, matrix: np.ndarray) -> RunReport:
    """Run one solver cell and attach reconstruction metrics."""
    params = SlrfParams(
        m=matrix.shape[0],
        n=matrix.shape[1],
        rank=config.rank,
        lambda1=config.lambda1,
        lambda2=config.lambda2,
        gamma1=config.gamma1,
        gamma2=config.gamma2,
    )
    # Frame stacks are already scaled to [0, 1]; their peak value is 1.
    max_value = 1.0 if config.data == "frames" else None
    if config.method == "binno":
        x, y, report = solve_slrf(matrix, params, config.solver)
    elif config.method == "palm":
        problem = build_problem(matrix, params)
        init = default_init(matrix, params, seed=config.solver.seed)
        x, y, report = palm_solve(
            palm_from_bilevel(problem, "upper"), init[0], init[1], config.solver
        )
    elif config.method == "nmf":
        x, y, report = nmf_lee_seung(matrix, config.rank, config.solver)
    else:
        raise BinnoError(f"unknown method {config.method!r}")
    report.metrics = evaluate(matrix, x @ y, max_value=max_value).to_dict()
    return report


def _is_stalled(report: RunReport, config: SolverConfig) -> bool:
    return not report.converged and report.iterations < config.max_iters


def _write_trace_csv(path, report: RunReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if report.psi1_trace is not None:
            fh.write("iteration,psi1,psi2,alpha,beta,nu\n")
            rows = zip(
                report.psi1_trace,
                report.psi2_trace,
                report.alpha_trace,
                report.beta_trace,
                report.nu_trace,
            )
            for i, row in enumerate(rows, start=1):
                fh.write(f"{i}," + ",".join(format(v, ".17g") for v in row) + "\n")
        else:
            fh.write("iteration,objective" + (",nu" if report.nu_trace else "") + "\n")
            for i, obj in enumerate(report.objective_trace, start=1):
                line = f"{i},{obj:.17g}"
                if report.nu_trace:
                    line += f",{report.nu_trace[i - 1]:.17g}"
                fh.write(line + "\n")


def _summary_line(report: RunReport) -> str:
    metrics = report.metrics or {}
    rel = metrics.get("relative_error", float("nan"))
    db = metrics.get("psnr_db", float("nan"))
    return (
        f"{report.method},{report.wall_time_seconds:.6g},{rel:.6g},{db:.6g}"
    )


def cmd_generate(spec: SyntheticSpec, out_path) -> int:
    """Write m_observed/x_true/y_true CSVs plus a JSON spec sidecar."""
    out = Path(out_path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        instance = generate(spec)
        save_matrix_csv(out / "m_observed.csv", instance.m_observed)
        save_matrix_csv(out / "x_true.csv", instance.x_true)
        save_matrix_csv(out / "y_true.csv", instance.y_true)
        with open(out / "spec.json", "w", encoding="utf-8") as fh:
            json.dump(dataclasses.asdict(spec), fh, indent=2, sort_keys=True)
    except OSError as exc:
        print(f"error: cannot write instance to {out}: {exc}", file=sys.stderr)
        return 2
    logger.info("wrote synthetic instance to %s", out)
    return 0


def cmd_solve(config: ExperimentConfig) -> int:
    """Run one method; write report.json and trace.csv; print a summary."""
    matrix = _load_matrix(config)
    report = _run_method(config, matrix)
    if config.out:
        out = Path(config.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
            _write_trace_csv(out / "trace.csv", report)
        except OSError as exc:
            print(f"error: cannot write report to {out}: {exc}", file=sys.stderr)
            return 2
    print(_summary_line(report))
    if _is_stalled(report, config.solver):
        logger.error("%s stalled after %d iterations", config.method, report.iterations)
        return 1
    return 0


def cmd_compare(configs: list[ExperimentConfig], out_path, repeats: int = 1) -> int:
    """Run each config on shared instances; write a mean/std table CSV."""
    if not configs:
        print("error: compare needs at least one method", file=sys.stderr)
        return 2
    if repeats < 1:
        print("error: --repeats must be >= 1", file=sys.stderr)
        return 2

    rows = []
    for config in configs:
        times, errs, psnrs = [], [], []
        failed = False
        for repeat in range(repeats):
            cell = dataclasses.replace(
                config,
                spec=dataclasses.replace(config.spec, seed=config.spec.seed + repeat),
                solver=dataclasses.replace(config.solver, seed=config.solver.seed + repeat),
            )
            try:
                matrix = _load_matrix(cell)
                report = _run_method(cell, matrix)
                if _is_stalled(report, cell.solver):
                    raise BinnoError("solver stalled")
            except BinnoError as exc:
                logger.error("%s failed on repeat %d: %s", config.method, repeat, exc)
                failed = True
                break
            times.append(report.wall_time_seconds)
            errs.append(report.metrics["relative_error"])
            psnrs.append(report.metrics["psnr_db"])

        if failed:
            rows.append((config.method,) + (float("nan"),) * 6)
            continue

        def stats(values):
            mean = float(np.mean(values))
            std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
            return mean, std

        rows.append((config.method,) + stats(times) + stats(errs) + stats(psnrs))

    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("method,time_mean,time_std,err_mean,err_std,psnr_mean,psnr_std\n")
            for row in rows:
                fh.write(row[0] + "," + ",".join(format(v, ".6g") for v in row[1:]) + "\n")
    except OSError as exc:
        print(f"error: cannot write table to {out_path}: {exc}", file=sys.stderr)
        return 2
    for row in rows:
        print(",".join(str(v) for v in row))
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    _apply_config_file(args, parser)

    try:
        if args.command == "generate":
            spec = SyntheticSpec(
                m=args.rows,
                n=args.cols,
                rank=args.rank,
                sparsity=args.sparsity,
                noise_std=args.noise_std,
                seed=args.seed,
            )
            return cmd_generate(spec, args.out)
        if args.command == "solve":
            return cmd_solve(_experiment_from_args(args, args.method))
        if args.command == "compare":
            methods = [m.strip() for m in args.method.split(",") if m.strip()]
            if not methods:
                parser.error("--method must name at least one method")
            for m in methods:
                if m not in METHODS:
                    parser.error(f"unknown method {m!r}; choose from {METHODS}")
            configs = [_experiment_from_args(args, m) for m in methods]
            return cmd_compare(configs, args.out, repeats=args.repeats)
    except BinnoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
