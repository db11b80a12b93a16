"""Command-line front end.

Exit codes: 0 success, 2 validation error, 3 numerical degeneracy, 4 I/O.
"""

from __future__ import annotations

import argparse
import secrets
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .datasets import (
    LongitudinalDataset,
    dental_dataset,
    fit_degrees,
    load_csv,
    select_degrees,
)
from .errors import AgcmError, IoError
from .model import ORTHOGONALITY_TOL
from .report import FORMATS, emit_report, render
from .simulation import (
    CUBIC_ALT,
    LINEAR_MEAN,
    SimulationScenario,
    consistency_sweep,
    generate,
    mc_aic,
    normality_check,
)

TIME_NOTE = (
    "Timepoints are used exactly as given in the CSV header. Fitted means, RMSS and AIC "
    "do not change under an affine recoding of time (e.g. centering ages), because the "
    "polynomial column space is the same."
)


def _common(*, top: bool) -> argparse.ArgumentParser:
    """Global flags. The per-command copies default to SUPPRESS so that a
    flag given before the command is not overwritten by the subparser."""

    def default(value):
        return value if top else argparse.SUPPRESS

    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=default(None), help="RNG seed (randomized commands)")
    p.add_argument("--out", default=default(None), help="output directory; print to stdout if omitted")
    p.add_argument(
        "--format",
        dest="formats" if top else "sub_formats",
        action="append",
        choices=FORMATS,
        default=default(None),
        help="output format (repeatable; default: text)",
    )
    p.add_argument(
        "--tol", type=float, default=default(ORTHOGONALITY_TOL), help="orthogonality tolerance"
    )
    return p


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default=None, help="CSV file (default: embedded dental data)")
    p.add_argument("--group-column", default="group")
    p.add_argument("--ignore-column", action="append", default=[], help="non-measurement column to skip")


def _scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=0.5, help="serial correlation of the errors")
    p.add_argument("--errors", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--cubic-alt", action="store_true", help="use the cubic mean 3 + 2t + t^2 - t^3")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agcm",
        description="Additive growth curve models: two-stage GLS fitting, AIC selection, Monte Carlo checks.",
        epilog=TIME_NOTE,
        parents=[_common(top=True)],
    )
    common = _common(top=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit one model with explicit degrees", epilog=TIME_NOTE)
    _data_args(p)
    p.add_argument("--degrees", type=int, nargs="+", required=True, help="polynomial degree per group")

    p = sub.add_parser("select", parents=[common], help="AIC selection over a degree grid", epilog=TIME_NOTE)
    _data_args(p)
    p.add_argument("--max-degree", type=int, nargs="+", default=[3])
    p.add_argument("--min-degree", type=int, nargs="+", default=[1])

    p = sub.add_parser("simulate", parents=[common], help="generate one simulated dataset as CSV")
    _scenario_args(p)
    p.add_argument("--n", type=int, default=40)

    p = sub.add_parser("mc-aic", parents=[common], help="average AIC of the u/o/a candidates versus n")
    _scenario_args(p)
    p.add_argument("--n-grid", type=int, nargs="+", default=[20, 40, 80, 160, 320])
    p.add_argument("--reps", type=int, default=500)

    p = sub.add_parser("diag", parents=[common], help="consistency or asymptotic-normality suite")
    p.add_argument("suite", choices=("consistency", "normality"))
    _scenario_args(p)
    p.add_argument("--n-grid", type=int, nargs="+", default=[40, 160, 640])
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--reps", type=int, default=None, help="default 300 (consistency) or 5000 (normality)")
    p.add_argument("--block", type=int, default=0)
    return parser


def _load(args) -> LongitudinalDataset:
    if args.data is None:
        return dental_dataset()
    return load_csv(args.data, group_column=args.group_column, ignore_columns=args.ignore_column)


def _per_group(values: Sequence[int], k: int) -> list[int]:
    return list(values) * k if len(values) == 1 else list(values)


def _scenario(args, seed: int) -> SimulationScenario:
    cubic = CUBIC_ALT if args.cubic_alt else SimulationScenario().coefficients[1]
    return SimulationScenario(coefficients=(LINEAR_MEAN, cubic), rho=args.rho, errors=args.errors, seed=seed)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"seed = {seed}", file=sys.stderr)
    return seed


def _output(result, args, stem: str) -> None:
    formats = args.formats or ["text"]
    if args.out is not None:
        for path in emit_report(result, args.out, formats, stem=stem).values():
            print(path, file=sys.stderr)
    else:
        for fmt in formats:
            sys.stdout.write(render(result, fmt))


def _run(args) -> int:
    if args.command == "fit":
        _, res = fit_degrees(_load(args), args.degrees, tol=args.tol)
        _output(res, args, "fit")
    elif args.command == "select":
        data = _load(args)
        k = len(data.group_order)
        res = select_degrees(
            data, _per_group(args.max_degree, k), _per_group(args.min_degree, k), tol=args.tol
        )
        _output(res, args, "select")
        if res.best is None:
            print("error: no candidate model could be fitted", file=sys.stderr)
            return 2
    elif args.command == "simulate":
        seed = _seed(args)
        sc = _scenario(args, seed).with_n(args.n)
        y = generate(sc)
        labels = [f"group{g + 1}" for g, size in enumerate(sc.group_sizes) for _ in range(size)]
        data = LongitudinalDataset.from_arrays(y, sc.timepoints, labels)
        if args.out is None:
            data.write_csv(sys.stdout)
        else:
            try:
                Path(args.out).mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise IoError(f"cannot create {args.out}: {exc}") from exc
            path = Path(args.out) / "simulated.csv"
            data.to_csv(path)
            print(path, file=sys.stderr)
    elif args.command == "mc-aic":
        seed = _seed(args)
        reports = mc_aic(_scenario(args, seed), args.n_grid, args.reps, seed=seed)
        _output(reports, args, f"mc_aic_rho{args.rho:g}")
    elif args.command == "diag":
        seed = _seed(args)
        sc = _scenario(args, seed)
        if args.suite == "consistency":
            rows = consistency_sweep(sc, args.n_grid, args.reps or 300, seed=seed)
            _output(rows, args, "consistency")
        else:
            rep = normality_check(sc, args.n, args.reps or 5000, args.block, seed=seed)
            _output(rep, args, "normality")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "sub_formats", None):
        args.formats = (args.formats or []) + args.sub_formats
    try:
        return _run(args)
    except AgcmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
