"""
Matrix scale function W(x).

W is characterized by its transform, int_0^inf e^{-theta x} W(x) dx = F(theta)^{-1}.
F^{-1} is rational, so partial fractions over the zeros rho_k of the
cleared determinant give W as an exponential sum

    W(x) = sum_k e^{rho_k x} C_k,   C_k = adj(A(rho_k)) diag(r(rho_k)) / p'(rho_k),

from which Z(theta, x) and the two-sided exit matrices follow in closed form.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import IllConditioned, InvariantViolation, OrderingError, RepeatedRoot, PERTURB_HINT
from .model import MapModel, eval_F
from .numerics import adjugate, clip_probabilities, mat_exp, max_imag
from .spectral import SpectralData, check_simple, cleared_determinant, pair_conjugates, sort_roots

logger = logging.getLogger("scale")


@dataclass(frozen=True, eq=False)
class ScaleFunction:
    """W(x) = sum_k e^{rho_k x} C_k together with W(0)."""

    model: MapModel
    rhos: np.ndarray
    Cs: np.ndarray
    W0: np.ndarray

    @property
    def n(self) -> int:
        return self.model.n


def build_scale_function(model: MapModel, tol: Tolerances = DEFAULT_TOLERANCES) -> ScaleFunction:
    """
    Partial-fraction expansion of F(theta)^{-1}.

    Raises:
        RepeatedRoot: two poles of F^{-1} coincide (including the double
                      root at the origin when the drift is zero)
    """
    cd = cleared_determinant(model, killed=False, tol=tol)
    roots = cd.roots.copy()

    near_zero = np.abs(roots) <= tol.zero_cluster
    if near_zero.sum() > 1:
        raise RepeatedRoot(f"det F has a multiple root at the origin (zero drift); {PERTURB_HINT}")
    roots[near_zero] = 0.0

    roots, pairs = pair_conjugates(sort_roots(roots), tol.imag_axis_band)
    check_simple(roots, tol.repeated_root, RepeatedRoot, "scale-function poles")

    n = model.n
    Cs = np.zeros((len(roots), n, n), dtype=complex)
    lower = {b: a for a, b in pairs}
    for k, rho in enumerate(roots):
        if k in lower:
            continue
        C = adjugate(cd.matrix(rho)) * cd.row_scale(rho)[None, :] / cd.derivative_at(rho)
        Cs[k] = C.real if rho.imag == 0 else C
    for b, a in lower.items():
        Cs[b] = np.conj(Cs[a])

    W0 = np.diag(np.where(model.sigma == 0, 1.0 / model.c, 0.0))
    mismatch = np.max(np.abs(Cs.sum(axis=0) - W0))
    logger.debug(f"scale function: {len(roots)} poles, |sum C_k - W(0)| = {mismatch:.2e}")
    if mismatch > tol.scale_consistency * max(1.0, np.max(np.abs(W0))):
        raise InvariantViolation(f"residues do not sum to W(0) (mismatch {mismatch:.2e})")

    logger.info(f"scale function with poles {np.array2string(roots, precision=4)}")
    return ScaleFunction(model=model, rhos=roots, Cs=Cs, W0=W0)


def _check_levels(u: float, x: float) -> None:
    if not (0 <= u <= x) or x <= 0:
        raise OrderingError(f"need 0 <= u <= x and x > 0, got u={u}, x={x}")


def _real(M: np.ndarray, tol: Tolerances, what: str) -> np.ndarray:
    if max_imag(M) > tol.real_residue:
        raise InvariantViolation(f"{what} is not real (imaginary residue {max_imag(M):.2e})")
    return np.real(M)


def eval_W(sf: ScaleFunction, x: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """W(x) for x >= 0."""
    if x < 0:
        raise OrderingError(f"W(x) needs x >= 0, got {x}")
    W = np.einsum("k,kij->ij", np.exp(sf.rhos * x), sf.Cs)
    return _real(W, tol, f"W({x})")


def eval_W_integral(sf: ScaleFunction, theta: complex, x: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """int_0^x e^{-theta y} W(y) dy in closed form."""
    diff = sf.rhos - theta
    confluent = np.abs(diff) <= tol.confluent_guard
    weights = np.where(confluent, x, np.expm1(np.where(confluent, 0.0, diff) * x) / np.where(confluent, 1.0, diff))
    return np.einsum("k,kij->ij", weights, sf.Cs)


def eval_Z(sf: ScaleFunction, theta: complex, x: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Z(theta, x) = e^{theta x} (I - int_0^x e^{-theta y} W(y) dy F(theta)).

    Away from the poles, sum_k C_k / (theta - rho_k) = F(theta)^{-1} cancels
    the e^{theta x} part and

        Z(theta, x) = sum_k e^{rho_k x} C_k F(theta) / (theta - rho_k),

    which is used so that large theta x does not overflow. theta = 0 and
    theta next to a pole use the definition with F(0) = Q.
    """
    if x < 0:
        raise OrderingError(f"Z(theta, x) needs x >= 0, got {x}")
    n = sf.n
    F = eval_F(sf.model, theta, tol)
    diff = theta - sf.rhos
    if theta != 0 and np.min(np.abs(diff)) > tol.zero_cluster * (1.0 + abs(theta)):
        weights = np.exp(sf.rhos * x) / diff
        Z = np.einsum("k,kij->ij", weights, sf.Cs) @ F
    else:
        Z = np.exp(theta * x) * (np.eye(n) - eval_W_integral(sf, theta, x, tol) @ F)
    if np.imag(theta) == 0:
        return _real(Z, tol, f"Z({theta}, {x})")
    return Z


def eval_L(sf: ScaleFunction, spectral: SpectralData, x: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    L(x) = e^{Lambda x} W(x), evaluated per eigenvector of Lambda.

    h_j C_k vanishes whenever Re rho_k > Re gamma_j (L(x) stays bounded), so
    only terms with non-positive exponent are summed.
    """
    if x < 0:
        raise OrderingError(f"L(x) needs x >= 0, got {x}")
    L = np.zeros((sf.n, sf.n), dtype=complex)
    for j, g in enumerate(spectral.gammas):
        keep = (sf.rhos - g).real <= tol.repeated_root * (1.0 + abs(g))
        row = np.einsum("k,ki->i", np.exp((sf.rhos[keep] - g) * x), spectral.H[j] @ sf.Cs[keep])
        L += np.outer(spectral.V[:, j], row)
    return _real(L, tol, f"L({x})")


def eval_W_inverse(
    sf: ScaleFunction,
    x: float,
    spectral: Optional[SpectralData] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    W(x)^{-1}.

    With the unkilled spectral data this is L(x)^{-1} e^{Lambda x}, which stays
    well conditioned for large x; otherwise W(x) is inverted directly.
    """
    if spectral is not None and x > 0:
        return np.linalg.solve(eval_L(sf, spectral, x, tol), mat_exp(spectral.Lambda * x))
    W = eval_W(sf, x, tol)
    cond = np.linalg.cond(W)
    if cond > tol.condition_limit:
        raise IllConditioned(f"W({x}) is numerically singular (condition number {cond:.2e})")
    return np.linalg.inv(W)


# ---------------------------------------------------------------------------
# Two-sided exit
# ---------------------------------------------------------------------------
#
# With the unkilled spectral data the poles split into the eigenvalues of
# -Lambda (growing) and the rest (Re rho < 0). Then
#
#     W(y) = e^{-Lambda y} L + W_-(y),   Z(theta, y) = e^{-Lambda y} N + Z_b(y),
#
# where W_- and Z_b stay bounded, and both exit matrices are assembled from
# bounded pieces only.

@dataclass(frozen=True, eq=False)
class _Split:
    growing: np.ndarray
    lead: np.ndarray

    def bounded(self, const: np.ndarray, Ms: np.ndarray, rhos: np.ndarray, y: float) -> np.ndarray:
        rest = ~self.growing
        return const + np.einsum("k,kij->ij", np.exp(rhos[rest] * y), Ms[rest])


def _split(sf: ScaleFunction, spectral: SpectralData, Ms: np.ndarray, tol: Tolerances) -> _Split:
    """Match each gamma_j to its pole and collect sum_j v_j h_j Ms[k(j)]."""
    growing = np.zeros(len(sf.rhos), dtype=bool)
    lead = np.zeros((sf.n, sf.n), dtype=complex)
    for j, g in enumerate(spectral.gammas):
        k = int(np.argmin(np.abs(sf.rhos - g)))
        if abs(sf.rhos[k] - g) > tol.repeated_root * (1.0 + abs(g)):
            raise InvariantViolation(f"no scale-function pole matches eigenvalue {g}")
        growing[k] = True
        lead += np.outer(spectral.V[:, j], spectral.H[j] @ Ms[k])
    return _Split(growing=growing, lead=lead)


def _z_expansion(sf: ScaleFunction, theta: complex, tol: Tolerances):
    """
    Z(theta, y) = const + sum_k e^{rho_k y} D_k with D_k = C_k F(theta) / (theta - rho_k).

    At theta = 0 the pole at the origin contributes the constant
    I - sum_{k != 0} D_k. Returns None when theta sits on another pole.
    """
    n = sf.n
    F = eval_F(sf.model, theta, tol)
    diff = theta - sf.rhos
    near = np.abs(diff) <= tol.zero_cluster * (1.0 + abs(theta))
    D = np.zeros_like(sf.Cs, dtype=complex)
    const = np.zeros((n, n), dtype=complex)
    if near.any():
        if near.sum() > 1 or abs(theta) > tol.zero_cluster:
            return None
        D[~near] = (sf.Cs[~near] @ F) / diff[~near][:, None, None]
        const = np.eye(n) - D[~near].sum(axis=0)
    else:
        D = (sf.Cs @ F) / diff[:, None, None]
    return const, D


def exit_up(
    sf: ScaleFunction,
    u: float,
    x: float,
    spectral: Optional[SpectralData] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    P_u[reach x before going below 0, J at that time] = W(u) W(x)^{-1}.

    With the spectral data this is evaluated as
        e^{Lambda (x-u)} (I - W_-(x) L(x)^{-1} e^{Lambda x}) + W_-(u) L(x)^{-1} e^{Lambda x},
    which equals I at u = x.
    """
    _check_levels(u, x)
    if spectral is None:
        M = eval_W(sf, u, tol) @ eval_W_inverse(sf, x, spectral, tol)
    else:
        zero = np.zeros((sf.n, sf.n))
        w = _split(sf, spectral, sf.Cs, tol)
        E = mat_exp(spectral.Lambda * x)
        W_x = w.bounded(zero, sf.Cs, sf.rhos, x)
        K = np.linalg.solve(w.lead + E @ W_x, E)
        M = mat_exp(spectral.Lambda * (x - u)) @ (np.eye(sf.n) - W_x @ K) + w.bounded(zero, sf.Cs, sf.rhos, u) @ K
        M = _real(M, tol, f"exit_up({u}, {x})")
    return clip_probabilities(M, tol, f"exit_up({u}, {x})", substochastic=True)


def exit_down_transform(
    sf: ScaleFunction,
    theta: complex,
    u: float,
    x: float,
    spectral: Optional[SpectralData] = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """
    E_u[e^{theta X(tau_0^-)}; tau_0^- < tau_x^+, J(tau_0^-)]
        = Z(theta, u) - W(u) W(x)^{-1} Z(theta, x).

    With the spectral data, and G = W(x)^{-1} Z(theta, x), this is
        Z_b(u) - W_-(u) G + e^{Lambda (x-u)} (W_-(x) G - Z_b(x)),
    which vanishes at u = x and has no growing terms.
    """
    _check_levels(u, x)
    expansion = _z_expansion(sf, theta, tol) if spectral is not None else None
    if expansion is None:
        M = eval_Z(sf, theta, u, tol) - eval_W(sf, u, tol) @ eval_W_inverse(sf, x, spectral, tol) @ eval_Z(sf, theta, x, tol)
    else:
        const, D = expansion
        zero = np.zeros((sf.n, sf.n))
        w = _split(sf, spectral, sf.Cs, tol)
        z = _split(sf, spectral, D, tol)
        E = mat_exp(spectral.Lambda * x)
        W_x = w.bounded(zero, sf.Cs, sf.rhos, x)
        Zb_x = z.bounded(const, D, sf.rhos, x)
        G = np.linalg.solve(w.lead + E @ W_x, z.lead + E @ Zb_x)
        M = (
            z.bounded(const, D, sf.rhos, u)
            - w.bounded(zero, sf.Cs, sf.rhos, u) @ G
            + mat_exp(spectral.Lambda * (x - u)) @ (W_x @ G - Zb_x)
        )
    if np.imag(theta) == 0:
        M = _real(M, tol, f"exit_down_transform({theta}, {u}, {x})")
        return clip_probabilities(M, tol, f"exit_down_transform({theta}, {u}, {x})", substochastic=True)
    return M


def time_reversed_W(sf: ScaleFunction, pi: np.ndarray, x: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Scale function of the time-reversed model: diag(pi)^{-1} W(x)^T diag(pi)."""
    W = eval_W(sf, x, tol)
    return (W.T * pi[None, :]) / pi[:, None]
