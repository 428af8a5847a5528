"""
Command-line front end.

    python main.py example
    python main.py spectral --model m.json [--killed]
    python main.py scale --model m.json --x-max 10 --step 0.1 --out W.csv
    python main.py survival --model m.json --u-max 10 --step 0.1 --out phi.csv
    python main.py reach --model m.json --x 5 [--u 1] [--x-max 10 --step 0.1 --out reach.csv]
    python main.py classical --model m.json [--u 1 --x 4]
    python main.py simulate --model m.json --x 5 [--u 0] --paths 100000 --seed 42
    python main.py verify --model m.json [--paths 100000 --seed 42]

Exit codes: 0 success, 1 model or usage error, 2 numerical degeneracy.
Errors are reported as a single `error: ...` line on stderr.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config import Tolerances, load_tolerances
from .errors import RiskMapError, UsageError, exit_code_for
from .model import MapModel, drift
from .model_schema import describe_model, load_example, load_model
from .montecarlo import estimate_classical, estimate_reach
from .ruin import (
    build_engine,
    classical_exit,
    classical_ruin_matrix,
    classical_survival_at_zero,
    reach_matrix,
    reach_matrix_between,
    survival,
    survival_at_zero,
)
from .scale import build_scale_function, eval_W
from .spectral import occupation_matrix, phase_matrix
from .verification import format_report, run_verification

logger = logging.getLogger("cli")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def format_matrix(name: str, M: np.ndarray) -> str:
    M = np.atleast_2d(M)
    lines = [f"{name} ="]
    for row in M:
        lines.append("  " + " ".join(f"{v:10.4f}" for v in row))
    return "\n".join(lines)


def format_vector(name: str, v: np.ndarray) -> str:
    return f"{name} = (" + ", ".join(f"{x:.4f}" for x in np.atleast_1d(v)) + ")"


def _num(v: float) -> str:
    return f"{float(v):.17g}"


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    """Write a curve file: decimal point, '\\n' line endings, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])
    logger.info(f"Wrote {len(rows)} rows to {path}")


def grid(upper: float, step: float) -> np.ndarray:
    if step <= 0 or upper < 0:
        raise UsageError("need step > 0 and a non-negative upper end")
    count = int(round(upper / step))
    return np.linspace(0.0, count * step, count + 1)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_example(args, tol: Tolerances) -> int:
    model = load_example()
    engine = build_engine(model, tol)
    print(describe_model(model))
    print(format_matrix("Lambda", engine.spec_unkilled.Lambda))
    print(format_matrix("Lambda_hat", engine.spec_killed.Lambda))
    print(format_matrix("L", engine.L))
    print(format_matrix("U", engine.U))
    print(format_vector("phi(0)", survival_at_zero(engine)))
    return 0


def cmd_spectral(args, model: MapModel, tol: Tolerances) -> int:
    data = phase_matrix(model, killed=args.killed, tol=tol)
    mu = drift(model, tol).mu
    print(f"mu = {mu:.6g}")
    label = "Lambda_hat" if args.killed else "Lambda"
    print("gamma = " + ", ".join(f"{g.real:.6g}{g.imag:+.6g}j" if g.imag else f"{g.real:.6g}" for g in data.gammas))
    print(format_matrix(label, data.Lambda))
    if data.stationary is not None:
        print(format_vector(f"pi_{label}", data.stationary))
    if not args.killed and mu > 0:
        print(format_matrix("L", occupation_matrix(model, data, tol)))
    return 0


def cmd_scale(args, model: MapModel, tol: Tolerances) -> int:
    sf = build_scale_function(model, tol)
    n = model.n
    header = ["x"] + [f"W_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    rows = [[x] + list(eval_W(sf, float(x), tol).ravel()) for x in grid(args.x_max, args.step)]
    write_csv(args.out, header, rows)
    print(format_matrix("W(0)", sf.W0))
    return 0


def cmd_survival(args, model: MapModel, tol: Tolerances) -> int:
    engine = build_engine(model, tol)
    header = ["u"] + [f"phi_{i + 1}" for i in range(model.n)]
    rows = [[u] + list(survival(engine, float(u))) for u in grid(args.u_max, args.step)]
    write_csv(args.out, header, rows)
    print(format_vector("phi(0)", rows[0][1:]))
    return 0


def cmd_reach(args, model: MapModel, tol: Tolerances) -> int:
    engine = build_engine(model, tol)
    if args.x is not None:
        R = reach_matrix_between(engine, args.u, args.x)
        print(format_matrix(f"R({args.u:g}, {args.x:g})", R))
        print(format_vector("R 1", R @ np.ones(model.n)))
    if args.out is not None:
        if args.x_max is None or args.step is None:
            raise UsageError("--out needs --x-max and --step")
        header = ["x"] + [f"reach_{i + 1}" for i in range(model.n)]
        rows = [[x] + list(reach_matrix(engine, float(x)) @ np.ones(model.n)) for x in grid(args.x_max, args.step)]
        write_csv(args.out, header, rows)
    if args.x is None and args.out is None:
        raise UsageError("reach needs --x or --out")
    return 0


def cmd_classical(args, model: MapModel, tol: Tolerances) -> int:
    engine = build_engine(model, tol)
    if args.x is not None:
        print(format_matrix(f"classical exit ({args.u:g}, {args.x:g})", classical_exit(engine, args.u, args.x)))
        print(format_matrix(f"classical ruin ({args.u:g}, {args.x:g})", classical_ruin_matrix(engine, args.u, args.x)))
    print(format_vector("classical survival at 0", classical_survival_at_zero(engine)))
    return 0


def cmd_simulate(args, model: MapModel, tol: Tolerances) -> int:
    options = dict(paths=args.paths, seed=args.seed, chunks=args.chunks, workers=args.workers, tol=tol)
    for label, estimator in (("reach", estimate_reach), ("classical", estimate_classical)):
        report = estimator(model, args.u, args.x, **options)
        print(format_vector(f"{label} estimate", report.value))
        print(format_vector(f"{label} stderr", report.stderr))
        print(format_matrix(f"{label} by end state", report.matrix))
        if report.capped:
            print(f"{label}: {report.capped} paths capped")
    return 0


def cmd_verify(args, model: MapModel, tol: Tolerances) -> int:
    report = run_verification(model, args.paths, args.seed, args.chunks, args.workers, tol)
    print(format_report(report))
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--model", type=Path, help="model document (JSON)")
    common.add_argument("--tolerances", type=Path, default=None, help="JSON file of tolerance overrides")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")
    common.add_argument("--chunks", type=int, default=1, help="independent simulation streams")
    common.add_argument("--workers", type=int, default=1, help="processes for simulation chunks")

    parser = _Parser(prog="riskmap", description="Survival under Poissonian observation for Markov-modulated risk models")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spectral", parents=[common], help="first-passage generators and L")
    p.add_argument("--killed", action="store_true")

    p = sub.add_parser("scale", parents=[common], help="scale function curve")
    p.add_argument("--x-max", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("survival", parents=[common], help="survival curve")
    p.add_argument("--u-max", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("reach", parents=[common], help="level-crossing matrix or curve")
    p.add_argument("--x", type=float)
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--x-max", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("classical", parents=[common], help="classical ruin quantities")
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--x", type=float)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimates")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("verify", parents=[common], help="analytic vs simulation agreement suite")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=42)

    sub.add_parser("example", parents=[common], help="built-in two-state example")
    return parser


HANDLERS = {
    "spectral": cmd_spectral,
    "scale": cmd_scale,
    "survival": cmd_survival,
    "reach": cmd_reach,
    "classical": cmd_classical,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
        tol = load_tolerances(args.tolerances)
        if args.command == "example":
            return cmd_example(args, tol)
        if args.model is None:
            raise UsageError(f"{args.command} needs --model")
        model = load_model(args.model)
        return HANDLERS[args.command](args, model, tol)
    except RiskMapError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except np.linalg.LinAlgError as e:
        print(f"error: linear algebra failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
