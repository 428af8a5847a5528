"""
Survival and level-crossing under Poissonian observation.

Ruin is declared at the first observation epoch (rate omega_{J(t)}) at
which the surplus is negative. With A_j(x) the time spent below zero in
state j before the first passage over x,

    R(x)_ij = E_0[exp(-sum_j omega_j A_j(x)); J(tau_x^+) = j | J(0) = i]
            = e^{Lambda_hat x} (I - int_0^x W(y) Delta e^{Lambda_hat y} dy)^{-1},

and the survival probability from capital 0 is phi(0) = U^{-1} 1 where U
solves Lambda U - U Lambda_hat = L Delta.

The direct formula for R(x) loses all accuracy once e^{Lambda_hat x} is tiny,
so when Lambda exists it is evaluated through M(x) = e^{Lambda x} R(x)^{-1},
which converges to U.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    CommonEigenvalue,
    DefectiveDrift,
    IllConditioned,
    InvariantViolation,
    NearSingularResolvent,
    NotAllObserved,
    OrderingError,
    SingularBracket,
    UnsupportedModel,
    ZeroDrift,
    PERTURB_HINT,
)
from .model import DriftReport, MapModel, drift, eval_F
from .numerics import clip_probabilities, mat_exp, max_imag, solve_sylvester
from .scale import ScaleFunction, build_scale_function, exit_down_transform, exit_up
from .spectral import SpectralData, occupation_matrix, phase_matrix, time_reversed_phase_matrix

logger = logging.getLogger("ruin")


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RuinEngine:
    """All ingredients of the ruin formulas for one model."""

    model: MapModel
    tol: Tolerances
    drift: DriftReport
    sf: ScaleFunction
    spec_unkilled: Optional[SpectralData]
    spec_killed: Optional[SpectralData]
    L: Optional[np.ndarray]

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def mu(self) -> float:
        return self.drift.mu

    @cached_property
    def U(self) -> np.ndarray:
        """Solution of Lambda U - U Lambda_hat = L Delta."""
        if self.spec_unkilled is None or self.L is None:
            raise DefectiveDrift("U needs a positive drift")
        return solve_sylvester(
            self.spec_unkilled.Lambda, self.spec_killed.Lambda, self.L @ self.model.Delta, self.tol
        )

    @cached_property
    def reversed_spectral(self) -> SpectralData:
        return time_reversed_phase_matrix(self.model, self.tol)


def build_engine(model: MapModel, tol: Tolerances = DEFAULT_TOLERANCES) -> RuinEngine:
    """
    Assemble scale function, first-passage generators and L.

    Raises:
        ZeroDrift: mu = 0 (the scale function has a double pole at 0)
        CommonEigenvalue: Lambda and Lambda_hat share an eigenvalue
    """
    report = drift(model, tol)
    if abs(report.mu) <= 1e-12 * max(1.0, np.max(np.abs(model.c))):
        raise ZeroDrift("zero drift: ruin quantities are not supported at mu = 0")

    sf = build_scale_function(model, tol)

    spec_unkilled = None
    L = None
    if report.mu > 0:
        spec_unkilled = phase_matrix(model, killed=False, tol=tol)
        L = occupation_matrix(model, spec_unkilled, tol)

    spec_killed = None
    if model.is_observed:
        spec_killed = phase_matrix(model, killed=True, tol=tol)
    elif spec_unkilled is not None:
        spec_killed = spec_unkilled

    if model.is_observed and spec_unkilled is not None:
        gap = np.min(np.abs(spec_unkilled.gammas[:, None] - spec_killed.gammas[None, :]))
        if gap <= tol.sylvester_separation:
            raise CommonEigenvalue(f"Lambda and Lambda_hat share an eigenvalue (gap {gap:.2e}); {PERTURB_HINT}")

    logger.info(f"ruin engine: n={model.n} mu={report.mu:.6g} observed={model.is_observed}")
    return RuinEngine(
        model=model,
        tol=tol,
        drift=report,
        sf=sf,
        spec_unkilled=spec_unkilled,
        spec_killed=spec_killed,
        L=L,
    )


# ---------------------------------------------------------------------------
# Level crossing
# ---------------------------------------------------------------------------

def _resolvent_terms(engine: RuinEngine):
    """Yield (rho_k, C_k Delta (rho_k I + Lambda_hat)^{-1}) for every pole of F^{-1}."""
    tol = engine.tol
    Lh = engine.spec_killed.Lambda
    I = np.eye(engine.n)
    for rho, C in zip(engine.sf.rhos, engine.sf.Cs):
        R = rho * I + Lh
        cond = np.linalg.cond(R)
        if cond > tol.condition_limit:
            raise NearSingularResolvent(
                f"pole {rho:.6g} of the scale function meets an eigenvalue of -Lambda_hat; {PERTURB_HINT}"
            )
        yield rho, C @ engine.model.Delta @ np.linalg.inv(R)


def bracket_integral(engine: RuinEngine, x: float) -> np.ndarray:
    """
    int_0^x W(y) Delta e^{Lambda_hat y} dy
        = sum_k C_k Delta (rho_k I + Lambda_hat)^{-1} (e^{rho_k x} e^{Lambda_hat x} - I).
    """
    if x < 0:
        raise OrderingError(f"need x >= 0, got {x}")
    n = engine.n
    if not engine.model.is_observed or x == 0:
        return np.zeros((n, n))
    E = mat_exp(engine.spec_killed.Lambda * x)
    total = np.zeros((n, n), dtype=complex)
    for rho, term in _resolvent_terms(engine):
        total += term @ (np.exp(rho * x) * E - np.eye(n))
    if max_imag(total) > engine.tol.real_residue:
        raise InvariantViolation(f"integral is not real (imaginary residue {max_imag(total):.2e})")
    return total.real


def limit_matrix(engine: RuinEngine, x: float) -> np.ndarray:
    """
    M(x) = e^{Lambda x} R(x)^{-1}, which tends to U as x grows.

    In the eigenbases of Lambda (V, H) and Lambda_hat (V_hat, H_hat):
        h_j M(x) v_hat_l = -sum_k (h_j C_k Delta v_hat_l) e^{(rho_k - gamma_j) x} / (rho_k - gamma_hat_l),
    summed over rho_k with Re rho_k <= Re gamma_j, the other coefficients being zero.
    """
    if x < 0:
        raise OrderingError(f"need x >= 0, got {x}")
    su, sk = engine.spec_unkilled, engine.spec_killed
    if su is None or not engine.model.is_observed:
        raise UnsupportedModel("limit_matrix needs a positive drift and some positive observation rate")
    tol = engine.tol
    rhos, Cs = engine.sf.rhos, engine.sf.Cs
    Delta = engine.model.Delta

    diffs = rhos[:, None] - sk.gammas[None, :]
    if np.min(np.abs(diffs)) <= tol.sylvester_separation:
        raise NearSingularResolvent(f"a pole of the scale function equals an eigenvalue of -Lambda_hat; {PERTURB_HINT}")

    n = engine.n
    Mt = np.zeros((n, n), dtype=complex)
    for j, g in enumerate(su.gammas):
        keep = (rhos - g).real <= tol.repeated_root * (1.0 + abs(g))
        # (k, l) coefficients h_j C_k Delta v_hat_l
        coeff = np.einsum("i,kil->kl", su.H[j], Cs[keep] @ Delta @ sk.V)
        growth = np.exp((rhos[keep] - g) * x)
        Mt[j] = -np.sum(coeff * growth[:, None] / diffs[keep], axis=0)

    M = su.V @ Mt @ sk.H
    if max_imag(M) > tol.real_residue:
        raise InvariantViolation(f"M({x}) is not real (imaginary residue {max_imag(M):.2e})")
    return M.real


def _reach_direct(engine: RuinEngine, x: float) -> np.ndarray:
    n = engine.n
    bracket = np.eye(n) - bracket_integral(engine, x)
    cond = np.linalg.cond(bracket)
    if cond > engine.tol.condition_limit:
        raise SingularBracket(f"I - int_0^{x} W Delta e^(Lambda_hat y) dy is singular (condition {cond:.2e})")
    return mat_exp(engine.spec_killed.Lambda * x) @ np.linalg.inv(bracket)


def reach_matrix(engine: RuinEngine, x: float) -> np.ndarray:
    """
    R(x): probability of reaching x from 0 before ruin is observed, by the
    state at the passage time.

    Raises:
        SingularBracket: the bracketed matrix cannot be inverted
        DefectiveDrift: no observation and negative drift
    """
    if x < 0:
        raise OrderingError(f"need x >= 0, got {x}")
    n = engine.n
    if x == 0:
        return np.eye(n)

    if not engine.model.is_observed:
        if engine.spec_unkilled is None:
            raise DefectiveDrift("without observation R(x) = e^{Lambda x} needs a non-negative drift")
        R = mat_exp(engine.spec_unkilled.Lambda * x)
    elif engine.spec_unkilled is not None:
        M = limit_matrix(engine, x)
        cond = np.linalg.cond(M)
        if cond > engine.tol.condition_limit:
            raise SingularBracket(f"M({x}) is singular (condition {cond:.2e})")
        R = np.linalg.solve(M, mat_exp(engine.spec_unkilled.Lambda * x))
    else:
        R = _reach_direct(engine, x)
    return clip_probabilities(R, engine.tol, f"R({x})", substochastic=True)


def inverse_reach_matrix(engine: RuinEngine, u: float) -> np.ndarray:
    """R(u)^{-1} = -sum_k e^{rho_k u} C_k Delta (rho_k I + Lambda_hat)^{-1}."""
    if u < 0:
        raise OrderingError(f"need u >= 0, got {u}")
    n = engine.n
    if u == 0:
        return np.eye(n)
    if not engine.model.is_observed:
        if engine.spec_unkilled is None:
            raise DefectiveDrift("without observation R(x) = e^{Lambda x} needs a non-negative drift")
        return mat_exp(-engine.spec_unkilled.Lambda * u)
    total = np.zeros((n, n), dtype=complex)
    for rho, term in _resolvent_terms(engine):
        total -= np.exp(rho * u) * term
    if max_imag(total) > engine.tol.real_residue:
        raise InvariantViolation(f"R({u})^-1 is not real (imaginary residue {max_imag(total):.2e})")
    return total.real


def reach_matrix_between(engine: RuinEngine, u: float, x: float) -> np.ndarray:
    """R(u, x) = R(u)^{-1} R(x): reach x before observed ruin when starting at u."""
    if not (0 <= u <= x):
        raise OrderingError(f"need 0 <= u <= x, got u={u}, x={x}")
    if u == x:
        return np.eye(engine.n)
    if u == 0:
        return reach_matrix(engine, x)
    R = inverse_reach_matrix(engine, u) @ reach_matrix(engine, x)
    return clip_probabilities(R, engine.tol, f"R({u}, {x})", substochastic=True)


# ---------------------------------------------------------------------------
# Survival
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurvivalCurve:
    us: np.ndarray
    phis: np.ndarray


def survival_at_zero(engine: RuinEngine) -> np.ndarray:
    """
    phi(0) = U^{-1} 1.

    Returns ones without observation and zeros (with a warning) for negative
    drift.

    Raises:
        NotAllObserved: some but not all omega_i are zero
        CommonEigenvalue: Lambda and Lambda_hat share an eigenvalue
    """
    n = engine.n
    if not engine.model.is_observed:
        return np.ones(n)
    if engine.mu < 0:
        logger.warning(f"drift mu={engine.mu:.6g} < 0: observed ruin is certain, returning zero survival")
        return np.zeros(n)
    if not engine.model.all_observed:
        raise NotAllObserved("survival at zero needs every observation rate omega_i > 0")
    phi = np.linalg.solve(engine.U, np.ones(n))
    return clip_probabilities(phi, engine.tol, "phi(0)")


def survival(engine: RuinEngine, u: float, stable: bool = True) -> np.ndarray:
    """
    phi(u) = R(u)^{-1} phi(0).

    The stable form keeps only the poles with Re rho_k <= 0, because phi is
    bounded and the growing terms carry zero coefficients:
        phi(u) = -sum_{Re rho_k <= 0} e^{rho_k u} C_k Delta (rho_k I + Lambda_hat)^{-1} phi(0).
    With stable=False, R(u) is inverted directly and IllConditioned is raised
    once that is hopeless.
    """
    if u < 0:
        raise OrderingError(f"need u >= 0, got {u}")
    phi0 = survival_at_zero(engine)
    if u == 0 or not engine.model.is_observed or engine.mu < 0:
        return phi0

    tol = engine.tol
    if stable:
        total = np.zeros(engine.n, dtype=complex)
        for rho, term in _resolvent_terms(engine):
            if rho.real <= tol.imag_axis_band:
                total -= np.exp(rho * u) * (term @ phi0)
        if max_imag(total) > tol.real_residue:
            raise InvariantViolation(f"phi({u}) is not real")
        phi = total.real
    else:
        R = reach_matrix(engine, u)
        cond = np.linalg.cond(R)
        if cond > tol.condition_limit:
            raise IllConditioned(
                f"R({u}) has condition number {cond:.2e}; the direct formula is only usable for smaller u"
            )
        phi = np.linalg.solve(R, phi0)
    return clip_probabilities(phi, tol, f"phi({u})")


def survival_curve(engine: RuinEngine, us: Sequence[float]) -> SurvivalCurve:
    us = np.asarray(us, dtype=float)
    phis = np.array([survival(engine, float(u)) for u in us])
    return SurvivalCurve(us=us, phis=phis)


def sylvester_residual(engine: RuinEngine) -> float:
    """|Lambda U - U Lambda_hat - L Delta|_F / |L Delta|_F."""
    Lam, Lh = engine.spec_unkilled.Lambda, engine.spec_killed.Lambda
    C = engine.L @ engine.model.Delta
    U = engine.U
    return float(np.linalg.norm(Lam @ U - U @ Lh - C) / np.linalg.norm(C))


# ---------------------------------------------------------------------------
# Classical ruin
# ---------------------------------------------------------------------------

def classical_exit(engine: RuinEngine, u: float, x: float) -> np.ndarray:
    """
    Probability of reaching x before the surplus ever goes below 0, by the
    state at the passage over x: W(u) W(x)^{-1}.

    Row sums agree with (I - Z(0, u) + W(u) W(x)^{-1} Z(0, x)) 1, i.e. with
    one minus the row sums of classical_ruin_matrix.
    """
    if not (0 <= u <= x) or x <= 0:
        raise OrderingError(f"need 0 <= u <= x and x > 0, got u={u}, x={x}")
    return exit_up(engine.sf, u, x, engine.spec_unkilled, engine.tol)


def classical_ruin_matrix(engine: RuinEngine, u: float, x: float) -> np.ndarray:
    """
    Probability of going below 0 before reaching x, by the state at that
    time: Z(0, u) - W(u) W(x)^{-1} Z(0, x).
    """
    if not (0 <= u <= x) or x <= 0:
        raise OrderingError(f"need 0 <= u <= x and x > 0, got u={u}, x={x}")
    return exit_down_transform(engine.sf, 0.0, u, x, engine.spec_unkilled, engine.tol)


def classical_survival_at_zero(engine: RuinEngine) -> np.ndarray:
    """
    Probability of never going below 0 from capital 0:
    (mu / c_i) (pi_reversed)_i / pi_i for states without Brownian part, 0 otherwise.
    """
    n = engine.n
    if engine.mu <= 0:
        logger.warning(f"drift mu={engine.mu:.6g} <= 0: classical ruin is certain")
        return np.zeros(n)
    model = engine.model
    pi_rev = engine.reversed_spectral.stationary
    pi = engine.drift.pi
    phi = np.where(model.bounded_variation, engine.mu / model.c * pi_rev / pi, 0.0)
    return clip_probabilities(phi, engine.tol, "classical survival")


# ---------------------------------------------------------------------------
# One-state closed forms
# ---------------------------------------------------------------------------

def scalar_right_inverse(model: MapModel, q: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Largest theta >= 0 with psi(theta) = q for a one-state model."""
    if model.n != 1:
        raise UnsupportedModel("scalar_right_inverse needs a one-state model")
    psi = lambda theta: float(eval_F(model, theta, tol)[0, 0]) - q
    mu = drift(model, tol).mu
    if q == 0 and mu >= 0:
        return 0.0

    # psi is convex with psi(0) = 0; for q = 0 and mu < 0 psi is negative just right of 0
    lo = 0.0 if q > 0 else 1e-9
    hi = 1.0
    while psi(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise InvariantViolation("no right inverse found")
    return float(brentq(psi, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def scalar_survival_at_zero(model: MapModel, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Phi(omega) mu / omega for a one-state model with omega > 0."""
    omega = float(model.omega[0])
    if omega <= 0:
        raise NotAllObserved("scalar survival needs omega > 0")
    mu = drift(model, tol).mu
    if mu <= 0:
        return 0.0
    return scalar_right_inverse(model, omega, tol) * mu / omega
