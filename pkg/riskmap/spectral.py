"""
Spectral method for the first-passage generators.

The environment seen at the first passage over level x is a Markov chain in
x with generator Lambda (or Lambda_hat when paths are killed at the
observation rates). Both are read off the zeros of det(F(theta) - Delta)
in the closed right half-plane:

    Lambda = -V diag(gamma) V^{-1},  with F(gamma_k) v_k = Delta v_k.

F is rational in theta, so every row of F - Delta is multiplied by the
product of the transform denominators it contains. The resulting matrix
polynomial A(theta) is built coefficient by coefficient, and the zeros of
det A are the finite eigenvalues of its block-companion pencil, refined by
Newton steps on det A.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    DefectiveDrift,
    InvariantViolation,
    RepeatedEigenvalue,
    UsageError,
    WrongRootCount,
    ZeroDrift,
    PERTURB_HINT,
)
from .model import MapModel, drift, eval_F, eval_F_derivative, eval_F_killed, time_reverse
from .numerics import Polynomial, adjugate, max_imag, null_vector, stationary_of_generator

logger = logging.getLogger("spectral")


# ---------------------------------------------------------------------------
# Cleared determinant
# ---------------------------------------------------------------------------

def _horner(coeffs: np.ndarray, theta: complex) -> np.ndarray:
    A = np.zeros(coeffs.shape[1:], dtype=complex)
    for Ak in coeffs[::-1]:
        A = A * theta + Ak
    return A


@dataclass(frozen=True, eq=False)
class ClearedDeterminant:
    """
    Row-cleared cumulant A(theta) = diag(r(theta)) (F(theta) - Delta).

    r_i is the product of the transform denominators in row i, so A is a
    matrix polynomial sum_k theta^k A_k; p = det A and d = prod_i r_i.
    p is kept in product form, leading * prod_k (theta - roots_k).
    """

    model: MapModel
    killed: bool
    coeffs: np.ndarray
    roots: np.ndarray
    leading: float
    d: Polynomial
    row_degrees: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.roots)

    @property
    def p(self) -> Polynomial:
        """Monomial coefficients of p (ascending)."""
        coeffs = self.leading * P.polyfromroots(self.roots)
        if np.max(np.abs(coeffs.imag)) <= 1e-12 * max(1.0, np.max(np.abs(coeffs))):
            coeffs = coeffs.real
        return Polynomial(coeffs)

    def value(self, theta: complex) -> complex:
        """p(theta) from the product form."""
        return self.leading * np.prod(theta - self.roots)

    def row_scale(self, theta: complex) -> np.ndarray:
        return _row_scale(self.model, theta)

    def matrix(self, theta: complex) -> np.ndarray:
        return _horner(self.coeffs, theta)

    def matrix_derivative(self, theta: complex) -> np.ndarray:
        m = self.coeffs.shape[0] - 1
        if m == 0:
            return np.zeros(self.coeffs.shape[1:], dtype=complex)
        return _horner(self.coeffs[1:] * np.arange(1, m + 1)[:, None, None], theta)

    def derivative_at(self, theta: complex) -> complex:
        """p'(theta) = tr(adj(A) A'), valid at the roots."""
        return np.trace(adjugate(self.matrix(theta)) @ self.matrix_derivative(theta))


def _law_rational(law) -> Tuple[np.ndarray, np.ndarray]:
    num, den = law.rational
    return num.coeffs.real, den.coeffs.real


def _row_denominators(model: MapModel, i: int) -> List[np.ndarray]:
    dens = []
    if model.beta[i] != 0:
        dens.append(_law_rational(model.claims[i])[1])
    for (a, _), law in sorted(model.jumps.items()):
        if a == i:
            dens.append(_law_rational(law)[1])
    return dens


def _row_scale(model: MapModel, theta: complex) -> np.ndarray:
    r = np.ones(model.n, dtype=complex)
    for i in range(model.n):
        for den in _row_denominators(model, i):
            r[i] *= P.polyval(theta, den)
    return r


def _cleared_coefficients(model: MapModel, killed: bool) -> Tuple[np.ndarray, Tuple[int, ...], np.ndarray]:
    """
    Coefficient stack of A(theta), built by polynomial products only.

    Returns:
        (coeffs with A(theta) = sum_k theta^k coeffs[k], row degrees, d)
    """
    n = model.n
    omega = model.omega if killed else np.zeros(n)
    entries = [[np.zeros(1) for _ in range(n)] for _ in range(n)]
    row_degrees = []
    d = np.ones(1)
    for i in range(n):
        claim_num, claim_den = np.ones(1), np.ones(1)
        if model.beta[i] != 0:
            claim_num, claim_den = _law_rational(model.claims[i])
        jumps = {j: _law_rational(law) for (a, j), law in sorted(model.jumps.items()) if a == i}
        jump_prod = np.ones(1)
        for _, den in jumps.values():
            jump_prod = P.polymul(jump_prod, den)
        r_i = P.polymul(claim_den, jump_prod)
        d = P.polymul(d, r_i)

        base = [model.Q[i, i] - model.beta[i] - omega[i], model.c[i]]
        if model.sigma[i] > 0:
            base.append(0.5 * model.sigma[i] ** 2)
        entries[i][i] = P.polyadd(P.polymul(base, r_i), model.beta[i] * P.polymul(claim_num, jump_prod))
        for j in range(n):
            if j == i:
                continue
            if j in jumps:
                others = claim_den
                for k, (_, den) in jumps.items():
                    if k != j:
                        others = P.polymul(others, den)
                entries[i][j] = model.Q[i, j] * P.polymul(jumps[j][0], others)
            else:
                entries[i][j] = model.Q[i, j] * r_i
        row_degrees.append(len(r_i) - 1 + len(base) - 1)

    m = max(row_degrees)
    coeffs = np.zeros((m + 1, n, n))
    for i in range(n):
        for j in range(n):
            c = np.asarray(entries[i][j], dtype=float)[: m + 1]
            coeffs[: len(c), i, j] = c
    return coeffs, tuple(row_degrees), d


def _root_scale(model: MapModel) -> float:
    """Typical modulus of the roots, used to balance the pencil."""
    rates = [1.0]
    for i in range(model.n):
        rates.append((abs(model.Q[i, i]) + model.beta[i] + model.omega[i]) / model.c[i])
        if model.sigma[i] > 0:
            rates.append(2.0 * model.c[i] / model.sigma[i] ** 2)
        rates.append(np.max(np.abs(model.claims[i].T)))
    for law in model.jumps.values():
        rates.append(np.max(np.abs(law.T)))
    return float(max(rates))


def _pencil_roots(coeffs: np.ndarray, degree: int, scale: float) -> np.ndarray:
    """
    Finite eigenvalues of the block-companion pencil of A(scale * z).

    Rows are normalized first, which leaves the zeros of det A unchanged.
    The pencil has n*m eigenvalues; the degree of det A of them are finite.
    """
    m = coeffs.shape[0] - 1
    n = coeffs.shape[1]
    scaled = coeffs * scale ** np.arange(m + 1)[:, None, None]
    row_norm = np.max(np.abs(scaled), axis=(0, 2))
    scaled = scaled / row_norm[None, :, None]

    size = n * m
    C = np.zeros((size, size))
    B = np.eye(size)
    C[: size - n, n:] = np.eye(size - n)
    for k in range(m):
        C[size - n:, k * n:(k + 1) * n] = -scaled[k]
    B[size - n:, size - n:] = scaled[m]

    alpha, beta = scipy.linalg.eig(C, B, right=False, homogeneous_eigvals=True)
    finiteness = np.abs(beta) / (np.abs(alpha) + np.abs(beta))
    keep = np.argsort(-finiteness)[:degree]
    return scale * alpha[keep] / beta[keep]


def _polish_roots(coeffs: np.ndarray, roots: np.ndarray, steps: int) -> np.ndarray:
    """
    Newton steps on det A, theta <- theta - 1 / tr(A^{-1} A').

    A step is kept only when it lowers |det A| and stays within half the
    distance to the nearest other root.
    """
    m = coeffs.shape[0] - 1
    dcoeffs = coeffs[1:] * np.arange(1, m + 1)[:, None, None]
    roots = np.array(roots, dtype=complex)
    for k in range(len(roots)):
        r = roots[k]
        others = np.delete(roots, k)
        gap = np.min(np.abs(others - r)) if len(others) else np.inf
        A = _horner(coeffs, r)
        value = np.linalg.det(A)
        for _ in range(steps):
            if value == 0:
                break
            try:
                slope = np.trace(np.linalg.solve(A, _horner(dcoeffs, r)))
            except np.linalg.LinAlgError:
                break
            if slope == 0:
                break
            step = 1.0 / slope
            if abs(step) >= 0.5 * gap:
                break
            candidate = r - step
            A_candidate = _horner(coeffs, candidate)
            candidate_value = np.linalg.det(A_candidate)
            if abs(candidate_value) >= abs(value):
                break
            r, A, value = candidate, A_candidate, candidate_value
        roots[k] = r
    return roots


def cleared_determinant(
    model: MapModel,
    killed: bool,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ClearedDeterminant:
    """
    Polynomial p(theta) = det(F(theta) - Delta) d(theta) with d the product of
    all row denominators (Delta = 0 when killed is False).

    The leading coefficient of p is the determinant of the top-degree row
    coefficients; the roots come from the pencil.
    """
    coeffs, row_degrees, d = _cleared_coefficients(model, killed)
    degree = int(sum(row_degrees))
    top = np.array([coeffs[deg, i] for i, deg in enumerate(row_degrees)])
    leading = float(np.linalg.det(top))

    s = _root_scale(model)
    roots = _polish_roots(coeffs, _pencil_roots(coeffs, degree, s), tol.newton_steps)
    logger.debug(f"cleared determinant: degree={degree} scale={s:.3g} killed={killed}")
    return ClearedDeterminant(
        model=model,
        killed=killed,
        coeffs=coeffs,
        roots=roots,
        leading=leading,
        d=Polynomial(d),
        row_degrees=row_degrees,
    )


# ---------------------------------------------------------------------------
# Root bookkeeping
# ---------------------------------------------------------------------------

def sort_roots(roots: np.ndarray) -> np.ndarray:
    """Deterministic order: by real part, then conjugate pairs (+imag first)."""
    roots = np.asarray(roots, dtype=complex)
    order = np.lexsort((-roots.imag, np.round(roots.real, 10)))
    return roots[order]


def pair_conjugates(roots: np.ndarray, band: float) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """
    Make conjugate pairs exact.

    Returns the adjusted roots and the (upper, lower) index pairs; roots with
    |imag| <= band are made real.
    """
    roots = np.array(roots, dtype=complex)
    pairs = []
    used = set()
    for a in range(len(roots)):
        if a in used:
            continue
        scale = band * (1.0 + abs(roots[a]))
        if abs(roots[a].imag) <= scale:
            roots[a] = roots[a].real
            used.add(a)
            continue
        if roots[a].imag < 0:
            continue
        candidates = [b for b in range(len(roots)) if b not in used and b != a and roots[b].imag < 0]
        if not candidates:
            raise InvariantViolation(f"root {roots[a]} has no conjugate partner")
        b = min(candidates, key=lambda k: abs(roots[k] - np.conj(roots[a])))
        roots[b] = np.conj(roots[a])
        used.update((a, b))
        pairs.append((a, b))
    return roots, pairs


def check_simple(roots: np.ndarray, rel: float, exc, what: str) -> None:
    """Raise exc when two roots are closer than rel * (1 + |root|)."""
    for a in range(len(roots)):
        for b in range(a + 1, len(roots)):
            if abs(roots[a] - roots[b]) <= rel * (1.0 + abs(roots[a])):
                raise exc(
                    f"{what} {roots[a]:.6g} and {roots[b]:.6g} coincide "
                    f"(distance {abs(roots[a] - roots[b]):.2e}); Jordan chains are not supported, {PERTURB_HINT}"
                )


# ---------------------------------------------------------------------------
# Phase matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralData:
    """Right half-plane zeros of det(F - Delta), their null vectors and Lambda."""

    gammas: np.ndarray
    V: np.ndarray
    H: np.ndarray
    Lambda: np.ndarray
    killed: bool
    stationary: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.gammas)


def _select_unkilled(roots: np.ndarray, n: int, tol: Tolerances) -> np.ndarray:
    near_zero = np.abs(roots) <= tol.zero_cluster
    rest = roots[~near_zero]
    right = rest[rest.real > tol.imag_axis_band]
    logger.debug(f"unkilled roots: {near_zero.sum()} at the origin, {len(right)} in the right half-plane")
    if near_zero.sum() == 0:
        raise WrongRootCount("no root at the origin: det F(0) should vanish for a generator Q")
    if len(right) != n - 1:
        raise WrongRootCount(
            f"expected {n - 1} roots with positive real part besides 0, found {len(right)}; "
            f"the model is degenerate or outside the supported class"
        )
    return np.concatenate([[0.0], right]).astype(complex)


def _select_killed(roots: np.ndarray, n: int, tol: Tolerances) -> np.ndarray:
    right = roots[roots.real > -tol.imag_axis_band]
    logger.debug(f"killed roots: {len(right)} in the closed right half-plane")
    if len(right) != n:
        raise WrongRootCount(
            f"expected {n} roots in the closed right half-plane, found {len(right)}; "
            f"the model is degenerate or outside the supported class"
        )
    return right


def phase_matrix(model: MapModel, killed: bool, tol: Tolerances = DEFAULT_TOLERANCES) -> SpectralData:
    """
    First-passage generator Lambda (killed=False) or Lambda_hat (killed=True).

    Raises:
        DefectiveDrift: killed=False and the drift is negative
        WrongRootCount: unexpected number of right half-plane roots
        RepeatedEigenvalue: two roots (or their null vectors) coincide
    """
    if killed and not model.is_observed:
        return phase_matrix(model, killed=False, tol=tol)

    n = model.n
    if not killed:
        mu = drift(model, tol).mu
        if mu < -1e-12:
            raise DefectiveDrift(f"drift mu={mu:.6g} < 0: the first-passage generator is defective")

    cd = cleared_determinant(model, killed, tol)
    roots = cd.roots.copy()
    logger.debug(f"cleared determinant roots: {np.array2string(sort_roots(roots), precision=6)}")

    if killed:
        gammas = _select_killed(roots, n, tol)
    else:
        gammas = _select_unkilled(roots, n, tol)
    gammas, pairs = pair_conjugates(sort_roots(gammas), tol.imag_axis_band)
    check_simple(gammas, tol.repeated_root, RepeatedEigenvalue, "first-passage eigenvalues")

    V = np.zeros((n, n), dtype=complex)
    lower = {b: a for a, b in pairs}
    for k, g in enumerate(gammas):
        if k in lower:
            continue
        if not killed and g == 0:
            V[:, k] = np.ones(n) / np.sqrt(n)
            continue
        M = eval_F_killed(model, g, tol) if killed else eval_F(model, g, tol)
        v = null_vector(M, tol)
        residual = np.linalg.norm(M @ v)
        if residual > tol.null_residual * max(1.0, np.linalg.norm(M)):
            raise InvariantViolation(f"null vector residual {residual:.2e} at root {g}")
        V[:, k] = v.real if g.imag == 0 else v
    for b, a in lower.items():
        V[:, b] = np.conj(V[:, a])

    if np.linalg.cond(V) > tol.condition_limit:
        raise RepeatedEigenvalue(f"null vectors are linearly dependent; {PERTURB_HINT}")
    H = np.linalg.inv(V)
    Lam = -(V * gammas[None, :]) @ H

    if max_imag(Lam) > tol.real_residue:
        raise InvariantViolation(f"Lambda is not real (imaginary residue {max_imag(Lam):.2e})")
    Lam = Lam.real

    stationary = None
    if not killed:
        scale = max(1.0, np.max(np.abs(Lam)))
        off = Lam - np.diag(np.diag(Lam))
        if np.max(np.abs(Lam.sum(axis=1))) > tol.generator_rowsum * scale or np.min(off) < -1e-10 * scale:
            raise InvariantViolation(f"Lambda is not a generator:\n{Lam}")
        stationary = stationary_of_generator(Lam, tol)

    logger.info(f"{'killed' if killed else 'unkilled'} phase matrix: eigenvalues {np.array2string(-gammas, precision=4)}")
    return SpectralData(gammas=gammas, V=V, H=H, Lambda=Lam, killed=killed, stationary=stationary)


def time_reversed_phase_matrix(model: MapModel, tol: Tolerances = DEFAULT_TOLERANCES) -> SpectralData:
    """Lambda of the time-reversed model."""
    return phase_matrix(time_reverse(model, tol), killed=False, tol=tol)


# ---------------------------------------------------------------------------
# Occupation matrix
# ---------------------------------------------------------------------------

def occupation_matrix(
    model: MapModel,
    spectral: SpectralData,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    Expected occupation density L at level 0, the limit of e^{Lambda x} W(x).

    For a left eigenpair (gamma, h) of -Lambda,
        h L = h adj(F(gamma)) / tr(adj(F(gamma)) F'(gamma)),
    and L = V [h_m L]_m.

    Raises:
        ZeroDrift: mu = 0
    """
    if spectral.killed:
        raise UsageError("occupation_matrix needs the unkilled spectral data")
    mu = drift(model, tol).mu
    if abs(mu) <= 1e-12:
        raise ZeroDrift("zero drift: the occupation matrix has infinite entries")
    n = model.n
    if n == 1:
        return np.array([[1.0 / mu]])

    rows = np.zeros((n, n), dtype=complex)
    for k, g in enumerate(spectral.gammas):
        adj = adjugate(eval_F(model, g, tol))
        denom = np.trace(adj @ eval_F_derivative(model, g, tol))
        if abs(denom) <= tol.null_rank * max(1.0, np.linalg.norm(adj)):
            raise RepeatedEigenvalue(f"det F has a multiple zero at {g:.6g}; {PERTURB_HINT}")
        rows[k] = spectral.H[k] @ adj / denom

    L = spectral.V @ rows
    if max_imag(L) > tol.real_residue:
        raise InvariantViolation(f"occupation matrix is not real (imaginary residue {max_imag(L):.2e})")
    L = L.real
    if np.linalg.cond(L) > tol.condition_limit:
        raise InvariantViolation("occupation matrix is singular")
    logger.info(f"occupation matrix L:\n{L}")
    return L


def occupation_from_scale(spectral: SpectralData, sf, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    L assembled from the scale-function residues at the eigenvalues of -Lambda:
    L = sum_j v_j h_j C_{k(j)} where rho_{k(j)} = gamma_j.
    """
    L = np.zeros((spectral.n, spectral.n), dtype=complex)
    for j, g in enumerate(spectral.gammas):
        k = int(np.argmin(np.abs(sf.rhos - g)))
        if abs(sf.rhos[k] - g) > tol.repeated_root * (1.0 + abs(g)):
            raise InvariantViolation(f"no scale-function root matches eigenvalue {g}")
        L += np.outer(spectral.V[:, j], spectral.H[j] @ sf.Cs[k])
    return L.real
