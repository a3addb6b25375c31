"""Command-line harness for bound reports, verification runs, and tables.

Exit codes: 1 invalid configuration, 2 matrix parse failure, 3 factorization
failure, 4 bound inapplicable in a mode that demands applicability.

Matrix files are plain CSV: one row per line, no header, decimal floats.
Output is deterministic for a fixed (configuration, seed) pair except for the
wall-clock timing columns; pass ``--no-timings`` to drop those and obtain
byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import dense, lu_bounds, qr_bounds, tables
from .errors import (
    BoundNotApplicable,
    RankDeficient,
    SingularDiagonal,
    SingularLeadingMinor,
)
from .matgen import (
    ComponentwiseLU,
    ComponentwiseQR,
    Normwise,
    PerturbationSpec,
    graded_random,
    kahan,
    random_c_matrix,
)
from .verify import delta_halving, verify_bounds

EXIT_BAD_CONFIG = 1
EXIT_BAD_MATRIX = 2
EXIT_FACTORIZATION = 3
EXIT_INAPPLICABLE = 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_BAD_CONFIG, message)


def _add_matrix_source(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--matrix", metavar="FILE", help="CSV matrix file")
    g.add_argument("--kahan", metavar="N,THETA",
                   help="graded triangular test matrix of order N with angle THETA")
    g.add_argument("--graded", metavar="N,D1,D2",
                   help="graded random matrix (uses --seed)")


def _add_output(p: argparse.ArgumentParser):
    p.add_argument("--output", choices=("csv", "markdown", "json"), default="csv")
    p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--no-timings", action="store_true",
                   help="drop wall-clock columns for byte-identical output")


def _build_parser() -> _Parser:
    parser = _Parser(prog="fperturb",
                     description="perturbation bounds for LU and QR factorizations")
    sub = parser.add_subparsers(dest="command", required=True)

    def bound_command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_matrix_source(p)
        p.add_argument("--seed", type=int, default=0)
        _add_output(p)
        return p

    p = bound_command("lu-normwise", "normwise LU bound report")
    p.add_argument("--delta", type=float, required=True)

    p = bound_command("lu-componentwise", "componentwise LU bound report")
    p.add_argument("--epsilon", required=True,
                   help="perturbation size, or 'ge' for the n*u/(1-n*u) preset")

    p = bound_command("qr-normwise", "normwise QR bound report")
    p.add_argument("--delta", type=float, required=True, help="||dA||_F")
    p.add_argument("--delta1", type=float, default=None,
                   help="||Q^T dA||_F, defaults to --delta")

    p = bound_command("qr-componentwise", "componentwise QR bound report")
    p.add_argument("--epsilon", required=True)
    p.add_argument("--c-matrix", default="random",
                   help="envelope matrix: CSV file or 'random' (uses --seed)")

    p = bound_command("verify", "Monte Carlo bound verification")
    p.add_argument("--experiment", required=True,
                   choices=("lu-normwise", "lu-componentwise",
                            "qr-normwise", "qr-componentwise"))
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--epsilon", default=None)
    p.add_argument("--c-matrix", default="random")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--delta-halving", type=int, default=0, metavar="K",
                   help="also verify at K successive halvings of the size")

    for name in ("table1", "table2", "table3", "table4"):
        p = sub.add_parser(name, help=f"reproduce {name} of the bound comparison")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seed-sweep", type=int, default=1, metavar="K",
                       help="aggregate K consecutive seeds by per-cell medians")
        if name == "table1":
            p.add_argument("--epsilon", default=None)
        _add_output(p)

    return parser


def _parse_floats(text: str, count: int, what: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != count:
        raise CliError(EXIT_BAD_CONFIG, f"{what} expects {count} comma-separated values")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"cannot parse {what}: {exc}") from exc


def load_matrix_csv(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty matrix file")
        rows = [[float(cell) for cell in line.split(",")] for line in lines]
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError("rows have inconsistent lengths")
        return np.asarray(rows, dtype=float)
    except OSError as exc:
        raise CliError(EXIT_BAD_MATRIX, f"cannot read matrix file: {exc}") from exc
    except ValueError as exc:
        raise CliError(EXIT_BAD_MATRIX, f"cannot parse matrix file: {exc}") from exc


def _resolve_matrix(args) -> np.ndarray:
    if args.matrix:
        return load_matrix_csv(args.matrix)
    if args.kahan:
        vals = _parse_floats(args.kahan, 2, "--kahan")
        n = int(vals[0])
        try:
            return kahan(n, vals[1])
        except ValueError as exc:
            raise CliError(EXIT_BAD_CONFIG, str(exc)) from exc
    if args.graded:
        vals = _parse_floats(args.graded, 3, "--graded")
        try:
            return graded_random(int(vals[0]), vals[1], vals[2], args.seed)
        except ValueError as exc:
            raise CliError(EXIT_BAD_CONFIG, str(exc)) from exc
    raise CliError(EXIT_BAD_CONFIG,
                   "one of --matrix / --kahan / --graded is required")


def _resolve_epsilon(text: str, n: int) -> float:
    if text == "ge":
        return lu_bounds.gaussian_elimination_epsilon(n)
    try:
        value = float(text)
    except ValueError as exc:
        raise CliError(EXIT_BAD_CONFIG, f"cannot parse --epsilon: {exc}") from exc
    if value < 0.0:
        raise CliError(EXIT_BAD_CONFIG, "--epsilon must be nonnegative")
    return value


def _resolve_c(args, m: int) -> np.ndarray:
    if args.c_matrix == "random":
        return random_c_matrix(m, args.seed)
    c = load_matrix_csv(args.c_matrix)
    if c.shape != (m, m):
        raise CliError(EXIT_BAD_MATRIX, f"envelope must be {m}x{m}, got {c.shape}")
    return c


def _report_rows(report, no_timings: bool) -> list[dict]:
    row = {}
    for key, value in vars(report).items():
        if not (isinstance(value, (int, float, bool)) or value is None):
            continue
        if key.startswith("t_"):
            if no_timings:
                continue
            value = round(value, 3)
        row[key] = value
    return [row]


_FACTORIZATION_ERRORS = (SingularLeadingMinor, RankDeficient, SingularDiagonal)


def _run_command(args) -> tuple[list[dict], dict, int | None]:
    """Return (rows, timings, violations) for the parsed command."""
    t0 = time.perf_counter()
    cmd = args.command

    if cmd in ("lu-normwise", "lu-componentwise", "qr-normwise", "qr-componentwise"):
        a = _resolve_matrix(args)
        try:
            if cmd == "lu-normwise":
                report = lu_bounds.lu_normwise_bounds(dense.lu_factor(a), args.delta)
            elif cmd == "lu-componentwise":
                eps = _resolve_epsilon(args.epsilon, a.shape[0])
                report = lu_bounds.lu_componentwise_bounds(dense.lu_factor(a), eps)
            elif cmd == "qr-normwise":
                d1 = args.delta if args.delta1 is None else args.delta1
                report = qr_bounds.qr_normwise_bounds(dense.qr_factor(a), d1, args.delta)
            else:
                eps = _resolve_epsilon(args.epsilon, a.shape[0])
                c = _resolve_c(args, a.shape[0])
                report = qr_bounds.qr_componentwise_bounds(dense.qr_factor(a), c, eps)
        except _FACTORIZATION_ERRORS as exc:
            raise CliError(EXIT_FACTORIZATION, str(exc)) from exc
        rows = _report_rows(report, args.no_timings)
        return rows, {"total_s": round(time.perf_counter() - t0, 3)}, None

    if cmd == "verify":
        a = _resolve_matrix(args)
        spec = _verify_spec(args, a)
        try:
            if args.delta_halving > 0:
                reports = delta_halving(a, spec, args.trials, args.delta_halving,
                                        experiment=args.experiment)
            else:
                reports = [verify_bounds(a, spec, args.trials,
                                         experiment=args.experiment)]
        except _FACTORIZATION_ERRORS as exc:
            raise CliError(EXIT_FACTORIZATION, str(exc)) from exc
        except BoundNotApplicable as exc:
            raise CliError(EXIT_INAPPLICABLE, str(exc)) from exc
        rows = []
        for level, rep in enumerate(reports):
            size = _spec_size(spec) * 0.5 ** level
            rows.append({
                "level": level,
                "size": size,
                "trials": rep.trials,
                "violations": rep.violations,
                "skipped": len(rep.skipped),
                "max_ratio_rigorous": rep.max_ratio_rigorous,
                "max_ratio_first_order": rep.max_ratio_first_order,
            })
        violations = sum(r.violations for r in reports)
        timings = {k: round(v, 3) for k, v in reports[-1].timings.items()}
        timings["total_s"] = round(time.perf_counter() - t0, 3)
        return rows, timings, violations

    # table commands
    kwargs = {}
    if cmd == "table1" and args.epsilon is not None:
        kwargs["epsilon"] = _resolve_epsilon(args.epsilon, 10)
    if args.seed_sweep > 1:
        result = tables.seed_sweep(cmd, args.seed, args.seed_sweep, **kwargs)
    else:
        result = tables.TABLES[cmd](args.seed, **kwargs)
    columns = [c for c in result.columns
               if not (args.no_timings and c in tables.TIMING_COLUMNS)]
    rows = [{c: (round(row[c], 3) if c in tables.TIMING_COLUMNS else row[c])
             for c in columns} for row in result.rows]
    return rows, {"total_s": time.perf_counter() - t0}, None


def _verify_spec(args, a: np.ndarray) -> PerturbationSpec:
    exp = args.experiment
    if exp in ("lu-normwise", "qr-normwise"):
        if args.delta is None:
            raise CliError(EXIT_BAD_CONFIG, f"{exp} needs --delta")
        return PerturbationSpec(model=Normwise(delta=args.delta), seed=args.seed)
    if args.epsilon is None:
        raise CliError(EXIT_BAD_CONFIG, f"{exp} needs --epsilon")
    eps = _resolve_epsilon(args.epsilon, a.shape[0])
    if exp == "lu-componentwise":
        return PerturbationSpec(model=ComponentwiseLU(epsilon=eps), seed=args.seed)
    c = _resolve_c(args, a.shape[0])
    return PerturbationSpec(model=ComponentwiseQR(epsilon=eps, c=c), seed=args.seed)


def _spec_size(spec: PerturbationSpec) -> float:
    model = spec.model
    return model.delta if isinstance(model, Normwise) else model.epsilon


def _fmt(value, precise: bool) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        value = float(value)  # numpy scalars repr differently
        if not math.isfinite(value):
            return repr(value)
        return repr(value) if precise else f"{value:.3e}"
    return str(value)


def render_csv(rows: list[dict]) -> str:
    if not rows:
        return "\n"
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c], precise=True) for c in cols))
    return "\n".join(lines) + "\n"


def render_markdown(rows: list[dict]) -> str:
    if not rows:
        return "\n"
    cols = list(rows[0].keys())
    lines = ["| " + " | ".join(cols) + " |",
             "|" + "|".join("---" for _ in cols) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(row[c], precise=False) for c in cols) + " |")
    return "\n".join(lines) + "\n"


def render_json(rows: list[dict], config: dict, violations, timings) -> str:
    payload = {"config": config, "rows": rows,
               "violations": violations, "timings": timings}
    return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        rows, timings, violations = _run_command(args)
    except CliError as exc:
        print(f"fperturb: error: {exc}", file=sys.stderr)
        return exc.code

    if args.no_timings:
        timings = {}
    config = {k: v for k, v in vars(args).items()
              if k not in ("out", "output") and v is not None}
    if args.output == "json":
        text = render_json(rows, config, violations, timings)
    elif args.output == "markdown":
        text = render_markdown(rows)
    else:
        text = render_csv(rows)

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
