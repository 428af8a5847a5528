#!/usr/bin/env python3
"""
Tests for riskmap/numerics.py

Run with:
    python -m riskmap.test_numerics
"""

from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskmap.errors import CommonEigenvalue, DefectiveGenerator, NotSingular, ProbabilityRangeError
from riskmap.numerics import (
    Polynomial,
    adjugate,
    clip_probabilities,
    mat_exp,
    null_vector,
    poly_roots,
    solve_sylvester,
    stationary_of_generator,
)


# -- Polynomials --

def test_roots_of_quadratics():
    roots = np.sort_complex(poly_roots(Polynomial([-1.0, 0.0, 1.0])))
    assert np.allclose(roots, [-1.0, 1.0], atol=1e-12)

    roots = poly_roots(Polynomial([1.0, 0.0, 1.0]))
    assert np.allclose(np.sort(roots.imag), [-1.0, 1.0], atol=1e-12)
    assert np.allclose(roots.real, 0.0, atol=1e-12)
    print("  PASS: test_roots_of_quadratics")


def test_triple_root_stays_clustered():
    # (theta - 2)^3
    roots = poly_roots(Polynomial([-8.0, 12.0, -6.0, 1.0]))
    assert len(roots) == 3
    assert np.all(np.abs(roots - 2.0) < 1e-4), roots
    print("  PASS: test_triple_root_stays_clustered")


def test_leading_zeros_trimmed():
    roots = poly_roots(Polynomial([2.0, -1.0, 0.0, 0.0]))
    assert len(roots) == 1
    assert abs(roots[0] - 2.0) < 1e-12
    print("  PASS: test_leading_zeros_trimmed")


def test_constant_polynomial_rejected():
    with pytest.raises(ValueError):
        poly_roots(Polynomial([3.0]))
    print("  PASS: test_constant_polynomial_rejected")


def test_polynomial_derivative():
    p = Polynomial([1.0, 2.0, 3.0])
    assert np.allclose(p.derivative().coeffs, [2.0, 6.0])
    assert p(2.0) == 17.0
    assert p.is_real()
    assert not Polynomial([1.0, 1j]).is_real()
    print("  PASS: test_polynomial_derivative")


@settings(max_examples=50, deadline=None)
@given(
    coeffs=st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=8),
    lead=st.floats(min_value=0.5, max_value=5),
)
def test_roots_have_small_backward_error(coeffs, lead):
    p = Polynomial(coeffs + [lead])
    roots = poly_roots(p)
    assert len(roots) == len(coeffs)
    scale = np.max(np.abs(p.coeffs))
    for r in roots:
        size = scale * np.sum(np.abs(r) ** np.arange(p.degree + 1))
        assert abs(p(r)) <= 1e-9 * size


# -- Matrix functions --

def test_mat_exp_of_generator():
    Q = np.array([[-1.0, 1.0], [1.0, -1.0]])
    E = mat_exp(Q * 0.7)
    assert np.allclose(E.sum(axis=1), 1.0, atol=1e-14)
    # e^{Qt} = Pi + e^{-2t}(I - Pi) for this Q
    Pi = np.full((2, 2), 0.5)
    assert np.allclose(E, Pi + np.exp(-1.4) * (np.eye(2) - Pi), atol=1e-14)
    assert np.allclose(mat_exp(np.zeros((3, 3))), np.eye(3))
    print("  PASS: test_mat_exp_of_generator")


def test_sylvester_scalar():
    X = solve_sylvester(np.array([[2.0]]), np.array([[-1.0]]), np.array([[3.0]]))
    assert abs(X[0, 0] - 1.0) < 1e-14
    print("  PASS: test_sylvester_scalar")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_sylvester_recovers_constructed_solution(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(scale=0.3, size=(3, 3)) + 5.0 * np.eye(3)
    B = rng.normal(scale=0.3, size=(3, 3)) - 5.0 * np.eye(3)
    X0 = rng.normal(size=(3, 3))
    X = solve_sylvester(A, B, A @ X0 - X0 @ B)
    assert np.allclose(X, X0, atol=1e-9)


def test_sylvester_common_eigenvalue():
    with pytest.raises(CommonEigenvalue):
        solve_sylvester(np.eye(2), np.eye(2), np.ones((2, 2)))
    print("  PASS: test_sylvester_common_eigenvalue")


# -- Null vectors and adjugates --

def test_null_vector_normalization():
    v = null_vector(np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert np.allclose(v, [1.0, 0.0])

    v = null_vector(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert np.allclose(v, np.array([1.0, -1.0]) / np.sqrt(2.0))
    assert abs(np.linalg.norm(v) - 1.0) < 1e-14
    print("  PASS: test_null_vector_normalization")


def test_null_vector_not_singular():
    with pytest.raises(NotSingular):
        null_vector(np.eye(3))
    print("  PASS: test_null_vector_not_singular")


def test_adjugate():
    M = np.array([[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]])
    assert np.allclose(adjugate(M), np.linalg.det(M) * np.linalg.inv(M), atol=1e-10)

    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(adjugate(S), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-12)
    assert np.allclose(adjugate(np.array([[5.0]])), [[1.0]])
    print("  PASS: test_adjugate")


# -- Generators --

def test_stationary_vectors():
    pi = stationary_of_generator(np.array([[-1.0, 1.0], [1.0, -1.0]]))
    assert np.allclose(pi, [0.5, 0.5], atol=1e-14)

    pi = stationary_of_generator(np.array([[-2.0, 2.0], [1.0, -1.0]]))
    assert np.allclose(pi, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)
    print("  PASS: test_stationary_vectors")


def test_defective_generator():
    with pytest.raises(DefectiveGenerator):
        stationary_of_generator(np.array([[-2.0, 1.0], [1.0, -1.0]]))
    print("  PASS: test_defective_generator")


def test_clip_probabilities():
    M = clip_probabilities(np.array([[1.0 + 1e-12, -1e-12], [0.3, 0.2]]))
    assert M.max() == 1.0 and M.min() == 0.0

    with pytest.raises(ProbabilityRangeError):
        clip_probabilities(np.array([0.5, -1e-3]))
    with pytest.raises(ProbabilityRangeError):
        clip_probabilities(np.array([[0.6, 0.6], [0.1, 0.1]]), substochastic=True)
    print("  PASS: test_clip_probabilities")


if __name__ == "__main__":
    print("Running numerics tests...")
    test_roots_of_quadratics()
    test_triple_root_stays_clustered()
    test_leading_zeros_trimmed()
    test_constant_polynomial_rejected()
    test_polynomial_derivative()
    test_roots_have_small_backward_error()
    print("  PASS: test_roots_have_small_backward_error")
    test_mat_exp_of_generator()
    test_sylvester_scalar()
    test_sylvester_recovers_constructed_solution()
    print("  PASS: test_sylvester_recovers_constructed_solution")
    test_sylvester_common_eigenvalue()
    test_null_vector_normalization()
    test_null_vector_not_singular()
    test_adjugate()
    test_stationary_vectors()
    test_defective_generator()
    test_clip_probabilities()
    print("\nAll numerics tests passed!")
