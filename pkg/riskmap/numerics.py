"""
Numerical kernels: polynomial roots, matrix exponential, Sylvester solver,
null vectors, adjugates and stationary vectors of generators.

Matrices here are small (n up to about 20), so everything is dense.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    PERTURB_HINT,
    CommonEigenvalue,
    DefectiveGenerator,
    InvariantViolation,
    NotSingular,
    ProbabilityRangeError,
)

logger = logging.getLogger("numerics")


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """Polynomial with complex coefficients in ascending degree."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=complex)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, theta):
        return P.polyval(theta, self.coeffs)

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial(np.zeros(1))
        return Polynomial(P.polyder(self.coeffs))

    def trimmed(self, tol: Tolerances = DEFAULT_TOLERANCES) -> "Polynomial":
        """Drop leading coefficients below poly_trim relative to the largest one."""
        scale = np.max(np.abs(self.coeffs)) if len(self.coeffs) else 0.0
        if scale == 0.0:
            return Polynomial(np.zeros(1))
        keep = np.nonzero(np.abs(self.coeffs) > tol.poly_trim * scale)[0]
        return Polynomial(self.coeffs[: keep[-1] + 1])

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max(np.max(np.abs(self.coeffs)), 1e-300)
        return bool(np.max(np.abs(self.coeffs.imag)) <= tol * scale)


def poly_roots(p: Polynomial, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    All roots of a polynomial, with multiplicity.

    Roots are the eigenvalues of the companion matrix of the monic
    normalization, each refined by a few Newton steps. A Newton step is
    only kept when it lowers |p|, so clustered roots are never pushed away.

    Args:
        p: Polynomial of degree >= 1 (after trimming)
        tol: Tolerances (poly_trim, newton_steps)

    Returns:
        Complex array of deg(p) roots.
    """
    q = p.trimmed(tol)
    if q.degree < 1:
        raise ValueError("poly_roots needs a polynomial of degree >= 1")

    monic = q.coeffs / q.coeffs[-1]
    roots = np.linalg.eigvals(P.polycompanion(monic)).astype(complex)

    dq = P.polyder(monic)
    for k, r in enumerate(roots):
        value = P.polyval(r, monic)
        for _ in range(tol.newton_steps):
            slope = P.polyval(r, dq)
            if slope == 0 or value == 0:
                break
            candidate = r - value / slope
            candidate_value = P.polyval(candidate, monic)
            if abs(candidate_value) >= abs(value):
                break
            r, value = candidate, candidate_value
        roots[k] = r
    return roots


# ---------------------------------------------------------------------------
# Matrix functions
# ---------------------------------------------------------------------------

def mat_exp(M: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling and squaring with a degree-13 Pade approximant)."""
    M = np.asarray(M)
    return scipy.linalg.expm(M)


def solve_sylvester(
    A: np.ndarray,
    B: np.ndarray,
    C: np.ndarray,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Solve A X - X B = C.

    Args:
        A, B, C: n x n matrices
        tol: Tolerances (sylvester_separation, sylvester_residual)

    Returns:
        The unique solution X.

    Raises:
        CommonEigenvalue: spectra of A and B are not separated
        InvariantViolation: residual above the configured bound
    """
    A = np.asarray(A)
    B = np.asarray(B)
    C = np.asarray(C)

    ea = scipy.linalg.eigvals(A)
    eb = scipy.linalg.eigvals(B)
    gap = np.min(np.abs(ea[:, None] - eb[None, :]))
    bound = tol.sylvester_separation * (np.linalg.norm(A) + np.linalg.norm(B))
    if gap <= bound:
        raise CommonEigenvalue(
            f"Sylvester equation has no unique solution: spectra are {gap:.3e} apart; "
            f"{PERTURB_HINT}"
        )

    # scipy solves A X + X B' = C
    X = scipy.linalg.solve_sylvester(A, -B, C)

    residual = np.linalg.norm(A @ X - X @ B - C)
    scale = np.linalg.norm(C)
    logger.debug(f"Sylvester solve: gap={gap:.3e} residual={residual:.3e}")
    if residual > tol.sylvester_residual * max(scale, 1e-300) and residual > 1e-14:
        raise InvariantViolation(f"Sylvester residual {residual:.3e} exceeds bound for |C|={scale:.3e}")
    return X


def null_vector(M: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Unit vector spanning the numerical null space of M.

    The direction of the smallest singular value is returned, scaled so that
    the first component of largest magnitude is real and positive.

    Raises:
        NotSingular: smallest singular value is not below null_rank relative
    """
    M = np.asarray(M, dtype=complex)
    _, s, vh = np.linalg.svd(M)
    if s[0] > 0 and s[-1] >= tol.null_rank * s[0]:
        raise NotSingular(f"matrix is not singular: sigma_min/sigma_max = {s[-1] / s[0]:.3e}")

    v = vh[-1].conj()
    v = v / np.linalg.norm(v)
    magnitudes = np.abs(v)
    lead = int(np.nonzero(magnitudes >= magnitudes.max() * (1 - 1e-9))[0][0])
    return v * (abs(v[lead]) / v[lead])


def adjugate(M: np.ndarray) -> np.ndarray:
    """
    Adjugate of a square matrix, valid also when M is singular.

    Uses M = U S Vh, so adj(M) = det(U) det(Vh) V diag(prod_{j != i} s_j) U^H.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    u, s, vh = np.linalg.svd(M)
    cofactors = np.array([np.prod(np.delete(s, i)) for i in range(n)])
    phase = np.linalg.det(u) * np.linalg.det(vh)
    return phase * (vh.conj().T * cofactors) @ u.conj().T


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def stationary_of_generator(G: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Stationary row vector of an irreducible generator.

    Raises:
        DefectiveGenerator: row sums are not zero within generator_rowsum
    """
    G = np.real_if_close(np.asarray(G), tol=1e6).astype(float)
    n = G.shape[0]
    scale = max(1.0, np.max(np.abs(G)))
    rowsums = G.sum(axis=1)
    if np.max(np.abs(rowsums)) > tol.generator_rowsum * scale:
        raise DefectiveGenerator(f"not a generator: row sums {np.array2string(rowsums, precision=3)}")

    A = np.vstack([G.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.min(pi) < -1e-8:
        raise DefectiveGenerator(f"stationary vector has negative entries: {pi}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def max_imag(M: np.ndarray, scale: Optional[float] = None) -> float:
    """Largest imaginary part relative to the size of M."""
    M = np.asarray(M)
    if not np.iscomplexobj(M):
        return 0.0
    if scale is None:
        scale = max(1.0, np.max(np.abs(M)))
    return float(np.max(np.abs(M.imag)) / scale)


def clip_probabilities(
    M: np.ndarray,
    tol: Tolerances = DEFAULT_TOLERANCES,
    what: str = "probability",
    substochastic: bool = False,
) -> np.ndarray:
    """
    Clip round-off outside [0, 1].

    Violations larger than probability_slack raise ProbabilityRangeError
    instead of being clipped. With substochastic=True row sums are checked too.
    """
    M = np.asarray(M, dtype=float)
    slack = tol.probability_slack
    low, high = np.min(M), np.max(M)
    if low < -slack or high > 1.0 + slack:
        raise ProbabilityRangeError(f"{what} outside [0, 1]: range [{low:.3e}, {high:.3e}]")
    if substochastic and M.ndim == 2 and np.max(M.sum(axis=1)) > 1.0 + slack:
        raise ProbabilityRangeError(f"{what} has row sums above 1: {M.sum(axis=1)}")
    if low < 0 or high > 1:
        logger.debug(f"clipped round-off in {what}: range [{low:.3e}, {high:.3e}]")
    return np.clip(M, 0.0, 1.0)
