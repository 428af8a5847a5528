#!/usr/bin/env python3
"""
Tests for riskmap/scale.py

Run with:
    python -m riskmap.test_scale
"""

from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest
from scipy.integrate import quad

from riskmap.errors import OrderingError, RepeatedRoot
from riskmap.model import MapModel, PhaseType, drift, eval_F, time_reverse
from riskmap.model_schema import load_example
from riskmap.numerics import mat_exp
from riskmap.scale import (
    build_scale_function,
    eval_L,
    eval_W,
    eval_W_integral,
    eval_W_inverse,
    eval_Z,
    exit_down_transform,
    exit_up,
    time_reversed_W,
)
from riskmap.spectral import occupation_matrix, phase_matrix


# -- Test models --

def with_brownian():
    return MapModel.create(
        Q=[[-1.0, 1.0], [1.0, -1.0]],
        c=[1.0, 1.0],
        beta=[1.0, 0.5],
        claims=[PhaseType.exponential(1.0), PhaseType.exponential(1.0)],
        omega=[0.4, 0.2],
        sigma=[1.0, 1.0],
    )


def with_jumps():
    return MapModel.create(
        Q=[[-2.0, 2.0], [1.0, -1.0]],
        c=[1.5, 2.0],
        beta=[1.0, 0.5],
        claims=[PhaseType.exponential(2.0), PhaseType.erlang(2, 3.0)],
        omega=[0.3, 0.1],
        jumps={(0, 1): PhaseType.exponential(4.0)},
    )


def laplace_of_W(sf, theta, upper=80.0):
    out = np.zeros((sf.n, sf.n))
    for i in range(sf.n):
        for j in range(sf.n):
            out[i, j], _ = quad(lambda y: np.exp(-theta * y) * eval_W(sf, y)[i, j], 0.0, upper, limit=200)
    return out


# -- Scale function --

def test_initial_value():
    sf = build_scale_function(load_example())
    assert np.allclose(eval_W(sf, 0.0), np.eye(2), atol=1e-10)
    assert np.allclose(sf.W0, np.eye(2))

    sf = build_scale_function(with_jumps())
    assert np.allclose(eval_W(sf, 0.0), np.diag([1.0 / 1.5, 0.5]), atol=1e-10)
    print("  PASS: test_initial_value")


def test_brownian_states_start_at_zero():
    sf = build_scale_function(with_brownian())
    assert len(sf.rhos) == 6
    assert np.allclose(eval_W(sf, 0.0), 0.0, atol=1e-9)
    # W itself has negative off-diagonal entries near 0; e^{Lambda x} W(x) does not
    data = phase_matrix(with_brownian(), killed=False)
    assert np.all(np.diag(eval_W(sf, 0.5)) > 0)
    assert np.all(eval_L(sf, data, 0.5) >= -1e-12)
    print("  PASS: test_brownian_states_start_at_zero")


def test_transform_identity():
    for model, theta in ((load_example(), 3.0), (load_example(), 5.0), (load_example(), 8.0), (with_jumps(), 5.0)):
        sf = build_scale_function(model)
        expected = np.linalg.inv(eval_F(model, theta))
        assert np.allclose(laplace_of_W(sf, theta), expected, rtol=1e-6, atol=1e-7)
    print("  PASS: test_transform_identity")


def test_integral_closed_form():
    sf = build_scale_function(load_example())
    theta, x = 0.7, 2.0
    direct = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            direct[i, j], _ = quad(lambda y: np.exp(-theta * y) * eval_W(sf, y)[i, j], 0.0, x)
    assert np.allclose(eval_W_integral(sf, theta, x), direct, atol=1e-9)
    # theta on the pole at the origin
    assert np.allclose(eval_W_integral(sf, 0.0, 0.0), 0.0)
    print("  PASS: test_integral_closed_form")


def test_zero_drift_has_double_pole():
    model = MapModel.create(
        Q=[[-1.0, 1.0], [1.0, -1.0]],
        c=[1.0, 1.0],
        beta=[1.0, 1.0],
        claims=[PhaseType.exponential(1.0), PhaseType.exponential(1.0)],
        omega=[0.4, 0.2],
    )
    with pytest.raises(RepeatedRoot):
        build_scale_function(model)
    print("  PASS: test_zero_drift_has_double_pole")


def test_negative_level_rejected():
    sf = build_scale_function(load_example())
    with pytest.raises(OrderingError):
        eval_W(sf, -1.0)
    with pytest.raises(OrderingError):
        exit_up(sf, 2.0, 1.0)
    print("  PASS: test_negative_level_rejected")


# -- Z and L --

def test_Z_definition():
    model = load_example()
    sf = build_scale_function(model)
    assert np.allclose(eval_Z(sf, 0.0, 0.0), np.eye(2))
    assert np.allclose(eval_Z(sf, 2.0, 0.0), np.eye(2), atol=1e-10)

    theta, x = 2.0, 1.5
    integral = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            integral[i, j], _ = quad(lambda y: np.exp(-theta * y) * eval_W(sf, y)[i, j], 0.0, x)
    expected = np.exp(theta * x) * (np.eye(2) - integral @ eval_F(model, theta))
    assert np.allclose(eval_Z(sf, theta, x), expected, rtol=1e-7, atol=1e-8)

    # Z(0, x) 1 = 1 because Q 1 = 0
    assert np.allclose(eval_Z(sf, 0.0, 3.0) @ np.ones(2), 1.0, atol=1e-8)
    print("  PASS: test_Z_definition")


def test_L_limit():
    model = load_example()
    sf = build_scale_function(model)
    data = phase_matrix(model, killed=False)
    L = occupation_matrix(model, data)
    assert np.allclose(eval_L(sf, data, 50.0), L, atol=1e-3)
    direct = mat_exp(data.Lambda * 2.0) @ eval_W(sf, 2.0)
    assert np.allclose(eval_L(sf, data, 2.0), direct, atol=1e-8)
    print("  PASS: test_L_limit")


def test_W_inverse_forms_agree():
    model = load_example()
    sf = build_scale_function(model)
    data = phase_matrix(model, killed=False)
    x = 3.0
    direct = np.linalg.inv(eval_W(sf, x))
    assert np.allclose(eval_W_inverse(sf, x, data), direct, rtol=1e-8, atol=1e-12)
    assert np.allclose(eval_W_inverse(sf, x), direct)
    print("  PASS: test_W_inverse_forms_agree")


# -- Two-sided exit --

def test_exit_up():
    model = load_example()
    sf = build_scale_function(model)
    data = phase_matrix(model, killed=False)
    x = 3.0
    assert np.allclose(exit_up(sf, x, x, data), np.eye(2), atol=1e-9)

    previous = np.zeros(2)
    for u in np.arange(0.0, 3.01, 0.5):
        P = exit_up(sf, u, x, data)
        assert np.all(P >= 0) and np.all(P <= 1)
        sums = P @ np.ones(2)
        assert np.all(sums >= previous - 1e-12)
        previous = sums
    print("  PASS: test_exit_up")


def test_exit_up_with_brownian_start():
    sf = build_scale_function(with_brownian())
    assert np.allclose(exit_up(sf, 0.0, 2.0), 0.0, atol=1e-9)
    print("  PASS: test_exit_up_with_brownian_start")


def test_exit_down_complements_exit_up():
    model = load_example()
    sf = build_scale_function(model)
    data = phase_matrix(model, killed=False)
    u, x = 1.0, 4.0
    up = exit_up(sf, u, x, data) @ np.ones(2)
    down = exit_down_transform(sf, 0.0, u, x, data) @ np.ones(2)
    assert np.allclose(up + down, 1.0, atol=1e-8)

    assert np.allclose(exit_down_transform(sf, 0.0, x, x, data), 0.0, atol=1e-9)
    # e^{theta X} at a negative undershoot is small for large theta
    assert np.all(exit_down_transform(sf, 200.0, u, x, data) < 0.01)
    assert np.iscomplexobj(exit_down_transform(sf, 1.0 + 1.0j, u, x, data))
    print("  PASS: test_exit_down_complements_exit_up")


def test_exit_matrices_at_high_levels():
    model = load_example()
    sf = build_scale_function(model)
    data = phase_matrix(model, killed=False)
    for x in (4.0, 8.0, 12.0, 30.0):
        assert np.allclose(exit_down_transform(sf, 0.0, x, x, data), 0.0, atol=1e-12)
        assert np.allclose(exit_up(sf, x, x, data), np.eye(2), atol=1e-12)
    for u, x in ((6.0, 12.0), (10.0, 12.0), (2.0, 30.0)):
        down = exit_down_transform(sf, 0.0, u, x, data)
        up = exit_up(sf, u, x, data)
        assert np.all(down >= 0) and np.all(up >= 0)
        assert np.allclose((up + down) @ np.ones(2), 1.0, atol=1e-8)
    print("  PASS: test_exit_matrices_at_high_levels")


def test_exit_forms_agree_at_low_levels():
    model = with_jumps()
    sf = build_scale_function(model)
    data = phase_matrix(model, killed=False)
    u, x = 0.5, 2.0
    direct_up = eval_W(sf, u) @ np.linalg.inv(eval_W(sf, x))
    assert np.allclose(exit_up(sf, u, x, data), direct_up, atol=1e-9)
    for theta in (0.0, 1.5):
        direct = eval_Z(sf, theta, u) - direct_up @ eval_Z(sf, theta, x)
        assert np.allclose(exit_down_transform(sf, theta, u, x, data), direct, atol=1e-9)
    print("  PASS: test_exit_forms_agree_at_low_levels")


def test_time_reversed_W():
    model = with_jumps()
    sf = build_scale_function(model)
    pi = drift(model).pi
    rev = build_scale_function(time_reverse(model))
    for x in (0.5, 2.0):
        assert np.allclose(time_reversed_W(sf, pi, x), eval_W(rev, x), rtol=1e-8, atol=1e-10)
    print("  PASS: test_time_reversed_W")


if __name__ == "__main__":
    print("Running scale function tests...")
    test_initial_value()
    test_brownian_states_start_at_zero()
    test_transform_identity()
    test_integral_closed_form()
    test_zero_drift_has_double_pole()
    test_negative_level_rejected()
    test_Z_definition()
    test_L_limit()
    test_W_inverse_forms_agree()
    test_exit_up()
    test_exit_up_with_brownian_start()
    test_exit_down_complements_exit_up()
    test_exit_matrices_at_high_levels()
    test_exit_forms_agree_at_low_levels()
    test_time_reversed_W()
    print("\nAll scale function tests passed!")
