"""
Agreement suite: analytic results against the Monte Carlo oracle and
against their own identities (Sylvester residual, semigroup property).

Used by `riskmap verify` and by the test-suite.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .model import MapModel
from .montecarlo import estimate_classical, estimate_reach, estimate_survival
from .ruin import (
    build_engine,
    classical_exit,
    classical_survival_at_zero,
    reach_matrix,
    reach_matrix_between,
    survival,
    sylvester_residual,
)

logger = logging.getLogger("verification")

REACH_LEVELS = (1.0, 5.0)
SURVIVAL_CAPITALS = (0.0, 2.0)
SURVIVAL_X_MAX = 40.0
TRUNCATION_ALLOWANCE = 0.002
CLASSICAL_LEVELS = (1.0, 4.0)
SEMIGROUP_PAIRS = ((1.0, 2.0), (1.0, 3.0), (2.0, 5.0))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str):
        self.checks.append(CheckResult(name, bool(passed), detail))
        logger.info(f"{'PASS' if passed else 'FAIL'}: {name} ({detail})")


def within(
    analytic: np.ndarray,
    estimate: np.ndarray,
    stderr: np.ndarray,
    allowance: float = 0.0,
    band: float = 3.0,
) -> bool:
    """|analytic - estimate| <= band * SE + allowance, entrywise (1e-9 floor for zero SE)."""
    bound = band * np.asarray(stderr) + allowance + 1e-9
    return bool(np.all(np.abs(np.asarray(analytic) - np.asarray(estimate)) <= bound))


def _fmt(v: np.ndarray) -> str:
    return "(" + ", ".join(f"{x:.4f}" for x in np.atleast_1d(v)) + ")"


def run_verification(
    model: MapModel,
    paths: int = 100_000,
    seed: int = 42,
    chunks: int = 1,
    workers: int = 1,
    tol: Tolerances = DEFAULT_TOLERANCES,
    band: float = 3.0,
) -> VerificationReport:
    """
    Run every applicable check for the model.

    Simulation checks pass when the analytic value lies within band
    standard errors of the estimate.
    """
    report = VerificationReport()
    engine = build_engine(model, tol)
    ones = np.ones(model.n)
    positive = engine.mu > 0

    # -- identities --------------------------------------------------------
    if positive and model.all_observed:
        res = sylvester_residual(engine)
        report.add("sylvester residual", res <= tol.sylvester_residual, f"relative residual {res:.2e}")

    if positive or model.is_observed:
        worst = 0.0
        for x, y in SEMIGROUP_PAIRS:
            diff = reach_matrix(engine, x) @ reach_matrix_between(engine, x, y) - reach_matrix(engine, y)
            worst = max(worst, float(np.linalg.norm(diff)))
        report.add("semigroup R(x) R(x, y) = R(y)", worst <= 1e-10, f"max Frobenius error {worst:.2e}")

    # -- simulation ----------------------------------------------------------
    if np.any(model.sigma > 0):
        report.add("simulation checks", True, "skipped: Brownian components are not simulated")
        return report

    mc = dict(paths=paths, seed=seed, chunks=chunks, workers=workers, tol=tol)

    if positive or model.is_observed:
        for x in REACH_LEVELS:
            analytic = reach_matrix(engine, x) @ ones
            est = estimate_reach(model, 0.0, x, **mc)
            report.add(
                f"reach x={x:g}",
                within(analytic, est.value, est.stderr, band=band),
                f"analytic {_fmt(analytic)} vs MC {_fmt(est.value)} +- {_fmt(est.stderr)}",
            )

    if positive and model.all_observed:
        for u in SURVIVAL_CAPITALS:
            analytic = survival(engine, u)
            est = estimate_survival(model, u, SURVIVAL_X_MAX, **mc)
            report.add(
                f"survival u={u:g}",
                within(analytic, est.value, est.stderr, TRUNCATION_ALLOWANCE, band),
                f"analytic {_fmt(analytic)} vs MC {_fmt(est.value)} +- {_fmt(est.stderr)}, truncation bias ~ {_fmt(est.truncation_bias)}",
            )

    u, x = CLASSICAL_LEVELS
    analytic = classical_exit(engine, u, x) @ ones
    est = estimate_classical(model, u, x, **mc)
    report.add(
        f"classical exit u={u:g} x={x:g}",
        within(analytic, est.value, est.stderr, band=band),
        f"analytic {_fmt(analytic)} vs MC {_fmt(est.value)} +- {_fmt(est.stderr)}",
    )

    if positive:
        analytic = classical_survival_at_zero(engine)
        est = estimate_classical(model, 0.0, SURVIVAL_X_MAX, **mc)
        report.add(
            "classical survival at zero",
            within(analytic, est.value, est.stderr, TRUNCATION_ALLOWANCE, band),
            f"analytic {_fmt(analytic)} vs MC {_fmt(est.value)} +- {_fmt(est.stderr)}",
        )

    return report


def format_report(report: VerificationReport) -> str:
    """Format the checks as a summary block."""
    lines = []
    lines.append("=" * 60)
    lines.append("VERIFICATION")
    lines.append("-" * 60)
    for check in report.checks:
        lines.append(f"  {'PASS' if check.passed else 'FAIL'}: {check.name}")
        lines.append(f"        {check.detail}")
    lines.append("-" * 60)
    lines.append(f"  RESULT: {'PASSED' if report.passed else 'FAILED'}")
    lines.append("=" * 60)
    return "\n".join(lines)
