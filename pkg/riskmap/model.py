"""
Markov-modulated risk model.

A MapModel describes the surplus X(t) of an insurer whose parameters are
driven by a continuous-time Markov chain J(t) on n states: premium rate c_i,
Brownian volatility sigma_i, claim intensity beta_i with a phase-type claim
law, an optional phase-type downward jump when J switches from i to j, and
the rate omega_i at which the surplus is observed.

The matrix cumulant F(theta) satisfies E[e^{theta X(t)}; J(t)] = e^{F(theta) t}.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import connected_components

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import ModelValidationError, TransformPole
from .numerics import Polynomial, stationary_of_generator

logger = logging.getLogger("model")


# ---------------------------------------------------------------------------
# Phase-type laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhaseType:
    """
    Phase-type distribution: absorption time of a Markov chain with initial
    law alpha and sub-generator T.
    """

    alpha: np.ndarray
    T: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.atleast_1d(np.asarray(self.alpha, dtype=float)))
        object.__setattr__(self, "T", np.atleast_2d(np.asarray(self.T, dtype=float)))

    # -- constructors -----------------------------------------------------

    @classmethod
    def exponential(cls, rate: float) -> "PhaseType":
        return cls(np.array([1.0]), np.array([[-float(rate)]]))

    @classmethod
    def erlang(cls, k: int, rate: float) -> "PhaseType":
        """Sum of k independent exponentials with the same rate."""
        T = -rate * np.eye(k) + rate * np.eye(k, k=1)
        alpha = np.zeros(k)
        alpha[0] = 1.0
        return cls(alpha, T)

    @classmethod
    def hyperexponential(cls, probs: Sequence[float], rates: Sequence[float]) -> "PhaseType":
        """Mixture of exponentials."""
        return cls(np.asarray(probs, dtype=float), -np.diag(np.asarray(rates, dtype=float)))

    # -- characteristics --------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.alpha)

    @cached_property
    def exit_vector(self) -> np.ndarray:
        """Absorption rates t = -T 1."""
        return -self.T.sum(axis=1)

    @cached_property
    def mean(self) -> float:
        return float(self.alpha @ np.linalg.solve(-self.T, np.ones(self.order)))

    def check(self, label: str = "phase-type") -> List[str]:
        """Return a list of problems with this law (empty when valid)."""
        errors = []
        m = self.order
        if self.T.shape != (m, m):
            return [f"{label}: T must be {m}x{m} to match alpha, got {self.T.shape}"]
        if not (np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.T))):
            return [f"{label}: entries must be finite"]
        if np.any(self.alpha < 0):
            errors.append(f"{label}: alpha has negative entries")
        if abs(self.alpha.sum() - 1.0) > 1e-9:
            errors.append(f"{label}: alpha must sum to 1 (no atom at zero), sums to {self.alpha.sum():.6g}")
        if np.any(np.diag(self.T) >= 0):
            errors.append(f"{label}: T must have a strictly negative diagonal")
        off = self.T - np.diag(np.diag(self.T))
        if np.any(off < 0):
            errors.append(f"{label}: T has negative off-diagonal entries")
        if np.any(self.T.sum(axis=1) > 1e-12):
            errors.append(f"{label}: T has positive row sums")
        if not errors and np.max(np.linalg.eigvals(self.T).real) >= -1e-12 * max(1.0, np.max(np.abs(self.T))):
            errors.append(f"{label}: T is not invertible (some phase never exits)")
        return errors

    # -- transform --------------------------------------------------------

    def lst(self, theta: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> complex:
        """Laplace-Stieltjes transform E[e^{-theta Y}] = alpha (theta I - T)^{-1} t."""
        if theta == 0:
            return 1.0
        return complex(self.alpha @ self._resolvent(theta, tol) @ self.exit_vector)

    def lst_derivative(self, theta: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> complex:
        """d/dtheta of lst: -alpha (theta I - T)^{-2} t."""
        R = self._resolvent(theta, tol)
        return complex(-self.alpha @ R @ R @ self.exit_vector)

    def _resolvent(self, theta: complex, tol: Tolerances) -> np.ndarray:
        A = theta * np.eye(self.order) - self.T
        if np.linalg.cond(A) * tol.pole_guard > 1.0:
            raise TransformPole(f"theta={theta} is a pole of a phase-type transform")
        return np.linalg.inv(A)

    @cached_property
    def rational(self) -> Tuple[Polynomial, Polynomial]:
        """
        Numerator and denominator of the transform as polynomials in theta.

        The denominator is det(theta I - T); the numerator is alpha adj(theta I - T) t,
        with the adjugate expanded by the Faddeev-LeVerrier recursion.
        """
        m = self.order
        T = self.T
        I = np.eye(m)
        c = np.zeros(m + 1)
        c[m] = 1.0
        num = np.zeros(m)
        Mk = np.zeros((m, m))
        for k in range(1, m + 1):
            Mk = T @ Mk + c[m - k + 1] * I
            c[m - k] = -np.trace(T @ Mk) / k
            num[m - k] = self.alpha @ Mk @ self.exit_vector
        return Polynomial(num), Polynomial(c)

    # -- sampling ---------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw absorption times by running the underlying chains."""
        m = self.order
        rates = -np.diag(self.T)
        jump = np.hstack([self.T - np.diag(np.diag(self.T)), self.exit_vector[:, None]]) / rates[:, None]
        cumulative = np.cumsum(jump, axis=1)
        cumulative[:, -1] = 1.0

        phase = rng.choice(m, p=self.alpha / self.alpha.sum(), size=size)
        total = np.zeros(size)
        active = np.ones(size, dtype=bool)
        while active.any():
            idx = np.nonzero(active)[0]
            ph = phase[idx]
            total[idx] += rng.exponential(1.0 / rates[ph])
            u = rng.random(len(idx))
            nxt = (u[:, None] > cumulative[ph]).sum(axis=1)
            absorbed = nxt >= m
            phase[idx] = np.minimum(nxt, m - 1)
            active[idx[absorbed]] = False
        return total


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftReport:
    pi: np.ndarray
    mu: float


@dataclass(frozen=True, eq=False)
class MapModel:
    """Markov-modulated risk process with Poissonian observation rates."""

    Q: np.ndarray
    c: np.ndarray
    beta: np.ndarray
    claims: Tuple[PhaseType, ...]
    omega: np.ndarray
    sigma: Optional[np.ndarray] = None
    jumps: Dict[Tuple[int, int], PhaseType] = field(default_factory=dict)

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = Q.shape[0]
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=float)))
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "omega", np.atleast_1d(np.asarray(self.omega, dtype=float)))
        sigma = np.zeros(n) if self.sigma is None else np.atleast_1d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "claims", tuple(self.claims))
        object.__setattr__(self, "jumps", {(int(i), int(j)): law for (i, j), law in dict(self.jumps).items()})

    @classmethod
    def create(cls, Q, c, beta, claims, omega, sigma=None, jumps=None) -> "MapModel":
        """Build a model and raise ModelValidationError listing every problem."""
        model = cls(Q=Q, c=c, beta=beta, claims=claims, omega=omega, sigma=sigma, jumps=jumps or {})
        errors = model.check()
        if errors:
            raise ModelValidationError(errors)
        return model

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def Delta(self) -> np.ndarray:
        return np.diag(self.omega)

    @property
    def is_observed(self) -> bool:
        """True when some observation rate is positive."""
        return bool(np.any(self.omega > 0))

    @property
    def all_observed(self) -> bool:
        return bool(np.all(self.omega > 0))

    @property
    def bounded_variation(self) -> np.ndarray:
        """Per-state flag: no Brownian component."""
        return self.sigma == 0

    def with_omega(self, omega) -> "MapModel":
        return MapModel(self.Q, self.c, self.beta, self.claims, omega, self.sigma, self.jumps)

    def check(self) -> List[str]:
        """Return every violated model invariant as a message."""
        n = self.n
        errors = []
        if self.Q.shape != (n, n):
            return [f"Q must be square, got shape {self.Q.shape}"]
        for name, vec in (("premium", self.c), ("claim_rate", self.beta), ("omega", self.omega), ("sigma", self.sigma)):
            if vec.shape != (n,):
                errors.append(f"{name} must have {n} entries, got {vec.shape[0]}")
        if len(self.claims) != n:
            errors.append(f"claims must have {n} entries, got {len(self.claims)}")
        if errors:
            return errors

        if not np.all(np.isfinite(self.Q)):
            errors.append("Q has non-finite entries")
        for name, vec in (("premium", self.c), ("claim_rate", self.beta), ("omega", self.omega), ("sigma", self.sigma)):
            if not np.all(np.isfinite(vec)):
                errors.append(f"{name} has non-finite entries")
        if errors:
            return errors
        off = self.Q - np.diag(np.diag(self.Q))
        if np.any(off < 0):
            errors.append("Q is not a generator: negative off-diagonal entries")
        rowsums = self.Q.sum(axis=1)
        if np.max(np.abs(rowsums)) > 1e-8 * max(1.0, np.max(np.abs(self.Q))):
            errors.append(f"Q is not a generator: row sums {rowsums.tolist()}")
        if n > 1:
            n_comp, _ = connected_components(off > 0, directed=True, connection="strong")
            if n_comp != 1:
                errors.append(f"Q is reducible ({n_comp} communicating classes)")

        for i in range(n):
            if not self.c[i] > 0:
                errors.append(f"premium[{i}] must be > 0 (state {i} would be non-increasing)")
        if np.any(self.sigma < 0):
            errors.append("sigma must be non-negative")
        if np.any(self.beta < 0):
            errors.append("claim_rate must be non-negative")
        if np.any(self.omega < 0):
            errors.append("omega must be non-negative")

        for i, law in enumerate(self.claims):
            errors.extend(law.check(f"claims[{i}]"))
        for (i, j), law in self.jumps.items():
            if not (0 <= i < n and 0 <= j < n) or i == j:
                errors.append(f"jump ({i},{j}) is not a transition between two distinct states")
                continue
            errors.extend(law.check(f"jumps[{i},{j}]"))
        return errors


# ---------------------------------------------------------------------------
# Matrix cumulant
# ---------------------------------------------------------------------------

def _as_output(F: np.ndarray, theta: complex) -> np.ndarray:
    return F.real.copy() if np.imag(theta) == 0 else F


def eval_F(model: MapModel, theta: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Matrix cumulant F(theta)_ij = delta_ij psi_i(theta) + q_ij g_ij(theta).

    psi_i(theta) = c_i theta + sigma_i^2 theta^2 / 2 - beta_i (1 - f_i(theta)) with f_i the
    claim transform; g_ij is the transform of the transition jump (1 without one).

    Raises:
        TransformPole: theta is a pole of one of the phase-type transforms
    """
    F = model.Q.astype(complex)
    for i in range(model.n):
        psi = model.c[i] * theta + 0.5 * model.sigma[i] ** 2 * theta ** 2
        if model.beta[i] != 0:
            psi -= model.beta[i] * (1.0 - model.claims[i].lst(theta, tol))
        F[i, i] += psi
    for (i, j), law in model.jumps.items():
        F[i, j] = model.Q[i, j] * law.lst(theta, tol)
    return _as_output(F, theta)


def eval_F_killed(model: MapModel, theta: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """F(theta) - diag(omega)."""
    return eval_F(model, theta, tol) - model.Delta


def eval_F_derivative(model: MapModel, theta: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Exact derivative F'(theta)."""
    D = np.zeros((model.n, model.n), dtype=complex)
    for i in range(model.n):
        D[i, i] = model.c[i] + model.sigma[i] ** 2 * theta
        if model.beta[i] != 0:
            D[i, i] += model.beta[i] * model.claims[i].lst_derivative(theta, tol)
    for (i, j), law in model.jumps.items():
        D[i, j] = model.Q[i, j] * law.lst_derivative(theta, tol)
    return _as_output(D, theta)


def drift(model: MapModel, tol: Tolerances = DEFAULT_TOLERANCES) -> DriftReport:
    """Stationary law of J and asymptotic drift mu = pi F'(0) 1."""
    pi = stationary_of_generator(model.Q, tol)
    mu = float(pi @ eval_F_derivative(model, 0.0, tol) @ np.ones(model.n))
    logger.debug(f"drift: pi={pi} mu={mu:.6g}")
    return DriftReport(pi=pi, mu=mu)


def time_reverse(model: MapModel, tol: Tolerances = DEFAULT_TOLERANCES) -> MapModel:
    """
    Time-reversed model with cumulant diag(pi)^{-1} F(theta)^T diag(pi).

    Per-state laws are unchanged; the jump on transition (i, j) is the one
    the original model attaches to (j, i).
    """
    pi = stationary_of_generator(model.Q, tol)
    Q_rev = (model.Q.T * pi[None, :]) / pi[:, None]
    np.fill_diagonal(Q_rev, np.diag(model.Q))
    jumps = {(j, i): law for (i, j), law in model.jumps.items()}
    return MapModel(Q_rev, model.c, model.beta, model.claims, model.omega, model.sigma, jumps)
