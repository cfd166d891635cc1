"""
Command line interface.

Every subcommand prints CSV to stdout (or to ``--out``). Exit codes: 0 success, 1 usage or input
error, 2 when a phase grid cell exceeds the solver failure budget.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from loguru import logger

from sparsebench import __version__
from sparsebench.config import Settings, load_settings
from sparsebench.ensembles import (
    AMPLITUDE_MODELS,
    ENSEMBLE_ALIASES,
    EnsembleSpec,
    SparseSignalSpec,
    realify_vector,
    sample_measurements,
    sample_sparse_signal,
    scaled_dft_vectors,
)
from sparsebench.errors import SparseBenchError
from sparsebench.fs import matrix_load, write_text
from sparsebench.geometry import (
    escape_experiment,
    gaussian_width_D_mc,
    gordon_escape_probability,
    maurey_covering_log_bound,
    maurey_error_rate,
    recovery_probability_bound,
    sample_complexity_gaussian,
)
from sparsebench.harness import (
    DEFAULT_THRESHOLD,
    PhaseGrid,
    PhaseTable,
    empirical_k_star,
    export,
    run_phase_transition,
)
from sparsebench.log import setup_logging
from sparsebench.lp import write_lp
from sparsebench.numerics import RngStream
from sparsebench.recovery import (
    basis_pursuit,
    bp_linear_program,
    check_measurement_count,
    recovery_error,
    verify_recovery,
)
from sparsebench.ric import (
    RIC_CSV_HEADER,
    operator_lln_experiment,
    restricted_isometry_constant,
    ric_condition_holds,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv(*values) -> str:
    def cell(v) -> str:
        if v is None:
            return ""
        return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)

    return ",".join(cell(v) for v in values)


def _emit(lines: list[str], out: str | None = None) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _add_ensemble_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ensemble", choices=sorted(ENSEMBLE_ALIASES), default="gaussian")
    p.add_argument("--matrix-file", help="orthogonal matrix U for --ensemble ortho")
    p.add_argument("--seed", type=int, default=0)


def _source(args) -> np.ndarray | None:
    return matrix_load(args.matrix_file) if args.matrix_file else None


def cmd_recover(args, settings: Settings) -> int:
    check_measurement_count(args.k, args.r)
    spec = EnsembleSpec(args.ensemble, args.n, args.k, args.seed, _source(args))
    stream = RngStream(args.seed)
    measurements = sample_measurements(spec, stream.child("matrix"))
    signal_spec = SparseSignalSpec(args.n, args.r, args.amp, args.seed)
    f = sample_sparse_signal(signal_spec, stream.child("signal"))
    y = measurements.matrix @ f.values
    if measurements.is_complex:
        y = realify_vector(y)
    phi = measurements.real_system()
    if args.dump_lp:
        write_lp(bp_linear_program(phi, y), args.dump_lp)
    result = basis_pursuit(phi, y, tol=settings.lp_tol, maxiter=settings.lp_maxiter)
    _emit(
        [
            "support,planted_support,l2_error,l1_objective,verdict,status",
            _csv(
                " ".join(map(str, result.support)),
                " ".join(map(str, f.support)),
                recovery_error(f, result),
                result.objective,
                verify_recovery(f, result),
                result.status,
            ),
        ]
    )
    return EXIT_OK if result.success else EXIT_NUMERICAL


def cmd_ric(args, settings: Settings) -> int:
    if args.matrix_file:
        phi = matrix_load(args.matrix_file)
    else:
        if args.n is None or args.k is None:
            raise SparseBenchError("ric needs --matrix-file or --n and --k")
        spec = EnsembleSpec(args.ensemble, args.n, args.k, args.seed)
        phi = sample_measurements(spec, RngStream(args.seed).child("matrix")).matrix
    lines = []
    if args.condition:
        verdict = ric_condition_holds(phi, args.r, budget=settings.enumeration_budget)
        lines.append("r,delta_3r,delta_4r,C_shared,verdict,verdict_per_r")
        lines.append(
            _csv(
                args.r,
                verdict.delta_3r,
                verdict.delta_4r,
                verdict.C_shared,
                verdict.holds,
                verdict.holds_per_r,
            )
        )
    else:
        mode = "sampled" if args.sampled else "exact"
        report = restricted_isometry_constant(
            phi,
            args.r,
            mode,
            trials=args.sampled or 0,
            rng=RngStream(args.seed).child("subsets"),
            budget=settings.enumeration_budget,
        )
        lines.extend([RIC_CSV_HEADER, report.to_csv_row()])
    _emit(lines)
    return EXIT_OK


def cmd_width(args, settings: Settings) -> int:
    estimate = gaussian_width_D_mc(args.n, args.r, args.samples, RngStream(args.seed))
    _emit(
        [
            "n,r,samples,mean,stderr,bound",
            _csv(args.n, args.r, estimate.samples, estimate.mean, estimate.stderr, estimate.bound),
        ]
    )
    return EXIT_OK


def cmd_escape(args, settings: Settings) -> int:
    if args.w is not None:
        bound = gordon_escape_probability(args.k, args.w)
        _emit(["k,w,probability,vacuous", _csv(args.k, args.w, bound.value, bound.vacuous)])
    elif args.r is not None and args.n is not None:
        bound = recovery_probability_bound(args.k, args.r, args.n)
        k_rn = sample_complexity_gaussian(args.r, args.n)
        _emit(
            [
                "k,r,n,k_rn,probability,vacuous",
                _csv(args.k, args.r, args.n, k_rn, bound.value, bound.vacuous),
            ]
        )
    else:
        raise SparseBenchError("escape needs --w or both --r and --n")
    return EXIT_OK


def cmd_cone_check(args, settings: Settings) -> int:
    points = escape_experiment(
        args.n, args.r, args.k, args.trials, RngStream(args.seed), args.width_samples
    )
    lines = ["n,r,k,trials,misses,frequency,stderr,width,bound,vacuous"]
    for p in points:
        counts = (p.k, p.trials, p.misses, p.frequency, p.stderr)
        lines.append(_csv(args.n, args.r, *counts, p.width, p.bound.value, p.bound.vacuous))
    _emit(lines)
    return EXIT_OK


def cmd_maurey(args, settings: Settings) -> int:
    rate = maurey_error_rate(args.n, args.m, args.trials, RngStream(args.seed))
    _emit(
        [
            "n,m,trials,mean_error_m,mean_error_4m,ratio,covering_log_bound",
            _csv(
                rate.n,
                rate.m,
                rate.trials,
                rate.mean_error_m,
                rate.mean_error_4m,
                rate.ratio,
                maurey_covering_log_bound(args.n, args.m),
            ),
        ]
    )
    return EXIT_OK


def cmd_lln(args, settings: Settings) -> int:
    points = operator_lln_experiment(
        scaled_dft_vectors(args.n),
        args.r,
        args.k,
        args.trials,
        RngStream(args.seed),
        budget=settings.enumeration_budget,
    )
    lines = ["n,r,k,trials,mean_deviation,stderr"]
    lines.extend(_csv(args.n, args.r, p.k, p.trials, p.mean, p.stderr) for p in points)
    _emit(lines)
    return EXIT_OK


def cmd_phase(args, settings: Settings) -> int:
    overrides = dict(
        ensemble=args.ensemble,
        n_values=args.n,
        r_values=args.r,
        k_min=args.k_min,
        k_max=args.k_max,
        k_step=args.k_step,
        trials=args.trials,
        seed=args.seed,
        amplitude=args.amp,
        source=_source(args),
    )
    if args.config:
        grid = PhaseGrid.from_file(args.config, **overrides)
    else:
        missing = [name for name in ("n", "r", "k_min", "k_max") if getattr(args, name) is None]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            raise SparseBenchError(f"phase needs --config or {flags}")
        grid = PhaseGrid(**{k: v for k, v in overrides.items() if v is not None})

    table = run_phase_transition(
        grid,
        workers=args.workers or settings.workers,
        progress=settings.progress,
        tol=settings.lp_tol,
        maxiter=settings.lp_maxiter,
    )
    if args.out:
        export(table, args.out, "csv")
    else:
        sys.stdout.write(table.to_csv())
    if args.svg:
        export(table, args.svg, "svg")
    if table.solver_failure_exceeded():
        logger.error("More than 10% solver failures in at least one cell")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_kstar(args, settings: Settings) -> int:
    report = empirical_k_star(PhaseTable.read(args.table), args.threshold)
    if args.out:
        export(report, args.out, "csv")
    else:
        sys.stdout.write(report.to_csv())
    if args.svg:
        export(report, args.svg, "svg")
    return EXIT_OK


def get_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="sparsebench", description="Sparse recovery laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--settings", help="YAML or TOML settings file")
    parser.add_argument("--log-level", help="override the configured log level")
    parser.add_argument("--log-file", help="also log to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="basis pursuit on one random instance")
    _add_ensemble_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--amp", choices=AMPLITUDE_MODELS, default="rademacher")
    p.add_argument("--dump-lp", help="write the LP in the c / A / b / bounds block format")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("ric", help="restricted isometry constant of a matrix")
    _add_ensemble_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=int, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="enumerate all subsets (default)")
    mode.add_argument("--sampled", type=int, metavar="N", help="lower bound from N random subsets")
    mode.add_argument("--condition", action="store_true", help="test delta_3r + 3 delta_4r <= 2")
    p.set_defaults(func=cmd_ric)

    p = sub.add_parser("width", help="Monte Carlo Gaussian width of D")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_width)

    p = sub.add_parser("escape", help="escape and recovery probability bounds")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--w", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_escape)

    p = sub.add_parser("cone-check", help="empirical kernel escape frequency")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--width-samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cone_check)

    p = sub.add_parser("maurey", help="empirical approximation rate in the l1 ball")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_maurey)

    p = sub.add_parser("lln", help="operator deviation of subsampled DFT vectors")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lln)

    p = sub.add_parser("phase", help="phase transition grid")
    p.add_argument("--config", help="YAML or TOML grid description")
    p.add_argument("--ensemble", choices=sorted(ENSEMBLE_ALIASES))
    p.add_argument("--matrix-file", help="orthogonal matrix U for --ensemble ortho")
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--r", type=int, nargs="+")
    p.add_argument("--k-min", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--k-step", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--amp", choices=AMPLITUDE_MODELS)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--svg", help="SVG plot path")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("kstar", help="empirical k* from a saved phase table")
    p.add_argument("--table", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--svg", help="SVG plot path")
    p.set_defaults(func=cmd_kstar)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = get_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.settings)
    except (SparseBenchError, OSError) as e:
        parser.error(str(e))
    setup_logging(args.log_level or settings.log_level, args.log_file or settings.log_file)
    if args.command == "phase" and args.ensemble is None and not args.config:
        args.ensemble = "gaussian"
    try:
        return args.func(args, settings)
    except SparseBenchError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"{e.filename or ''} {e.strerror or e}".strip())
        return EXIT_USAGE


__all__ = ["get_parser", "main"]


if __name__ == "__main__":
    sys.exit(main())
