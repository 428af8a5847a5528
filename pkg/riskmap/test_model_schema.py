#!/usr/bin/env python3
"""
Tests for riskmap/model_schema.py

Run with:
    python -m riskmap.test_model_schema
"""

import copy
import json
import tempfile
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import pytest

from riskmap.errors import ModelValidationError
from riskmap.model_schema import (
    EXAMPLE_MODEL,
    check_document,
    describe_model,
    load_example,
    load_model,
    model_to_document,
    save_model,
    validate_model,
)


# -- Test documents --

TWO_STATE = {
    "states": 2,
    "Q": [[-1.0, 1.0], [1.0, -1.0]],
    "premium": [1.0, 1.0],
    "claim_rate": [1.0, 0.5],
    "claims": [
        {"type": "exponential", "rate": 1.0},
        {"type": "exponential", "rate": 1.0},
    ],
    "omega": [0.4, 0.2],
}

WITH_JUMPS = {
    "states": 2,
    "Q": [[-2.0, 2.0], [1.0, -1.0]],
    "premium": [1.5, 2.0],
    "sigma": [0.0, 0.5],
    "claim_rate": [1.0, 0.5],
    "claims": [
        {"type": "exponential", "rate": 2.0},
        {"type": "phase", "alpha": [1.0, 0.0], "T": [[-3.0, 3.0], [0.0, -3.0]]},
    ],
    "omega": [0.3, 0.1],
    "jumps": {"0,1": {"type": "exponential", "rate": 4.0}},
}


def test_valid_document():
    model = validate_model(TWO_STATE)
    assert model.n == 2
    assert np.allclose(model.omega, [0.4, 0.2])
    assert np.all(model.sigma == 0)
    assert model.jumps == {}
    print("  PASS: test_valid_document")


def test_phase_law_and_jumps():
    model = validate_model(WITH_JUMPS)
    assert model.claims[1].order == 2
    assert abs(model.claims[1].mean - 2.0 / 3.0) < 1e-12
    assert set(model.jumps) == {(0, 1)}
    assert model.sigma[1] == 0.5
    print("  PASS: test_phase_law_and_jumps")


def test_unknown_key_rejected():
    doc = copy.deepcopy(TWO_STATE)
    doc["discount"] = 0.1
    model, errors = check_document(doc)
    assert model is None
    assert any("discount" in e for e in errors), errors
    print("  PASS: test_unknown_key_rejected")


def test_nonpositive_premium():
    doc = copy.deepcopy(TWO_STATE)
    doc["premium"] = [0.0, 1.0]
    with pytest.raises(ModelValidationError) as info:
        validate_model(doc)
    assert any("premium[0]" in e for e in info.value.errors)
    print("  PASS: test_nonpositive_premium")


def test_bad_generator():
    doc = copy.deepcopy(TWO_STATE)
    doc["Q"] = [[-1.0, 1.1], [1.0, -1.0]]
    model, errors = check_document(doc)
    assert model is None
    assert any("row sums" in e for e in errors), errors

    doc["Q"] = [[-1.0, 1.0, 0.0], [1.0, -1.0]]
    model, errors = check_document(doc)
    assert any("2x2" in e for e in errors), errors
    print("  PASS: test_bad_generator")


def test_bad_law_and_jump_key():
    doc = copy.deepcopy(TWO_STATE)
    doc["claims"][0] = {"type": "exponential", "rate": -1.0}
    model, errors = check_document(doc)
    assert model is None and errors

    doc = copy.deepcopy(WITH_JUMPS)
    doc["jumps"] = {"0-1": {"type": "exponential", "rate": 4.0}}
    model, errors = check_document(doc)
    assert any("'i,j'" in e for e in errors), errors

    doc["jumps"] = {"1,1": {"type": "exponential", "rate": 4.0}}
    model, errors = check_document(doc)
    assert any("distinct states" in e for e in errors), errors
    print("  PASS: test_bad_law_and_jump_key")


def test_length_mismatch():
    doc = copy.deepcopy(TWO_STATE)
    doc["omega"] = [0.4]
    model, errors = check_document(doc)
    assert any("omega must have 2 entries" in e for e in errors), errors
    print("  PASS: test_length_mismatch")


def test_non_finite_rates_rejected():
    doc = copy.deepcopy(TWO_STATE)
    doc["claim_rate"] = [float("nan"), 0.5]
    doc["omega"] = [float("nan"), 0.2]
    doc["sigma"] = [float("inf"), 0.0]
    model, errors = check_document(doc)
    assert model is None
    for name in ("claim_rate", "omega", "sigma"):
        assert any(f"{name} has non-finite entries" in e for e in errors), errors

    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "nan.json"
        path.write_text('{"states": 2, "Q": [[-1.0, 1.0], [1.0, -1.0]], "premium": [1.0, 1.0], '
                        '"claim_rate": [NaN, 0.5], "claims": [{"type": "exponential", "rate": 1.0}, '
                        '{"type": "exponential", "rate": 1.0}], "omega": [NaN, 0.2]}')
        with pytest.raises(ModelValidationError) as info:
            load_model(path)
        assert any("claim_rate" in e for e in info.value.errors)
    print("  PASS: test_non_finite_rates_rejected")


def test_save_and_load():
    model = validate_model(WITH_JUMPS)
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "nested" / "model.json"
        assert save_model(model, path)
        loaded = load_model(path)
        with open(path) as f:
            raw = json.load(f)
    assert np.allclose(loaded.Q, model.Q)
    assert np.allclose(loaded.claims[1].T, model.claims[1].T)
    assert raw["jumps"]["0,1"] == {"type": "exponential", "rate": 4.0}
    assert model_to_document(loaded) == model_to_document(model)
    print("  PASS: test_save_and_load")


def test_load_errors():
    with tempfile.TemporaryDirectory() as tmpdir:
        with pytest.raises(ModelValidationError):
            load_model(Path(tmpdir) / "missing.json")
        path = Path(tmpdir) / "broken.json"
        path.write_text("{")
        with pytest.raises(ModelValidationError):
            load_model(path)
    print("  PASS: test_load_errors")


def test_example_model():
    assert EXAMPLE_MODEL.exists()
    model = load_example()
    assert model_to_document(model) == {**TWO_STATE, "sigma": [0.0, 0.0]}
    print("  PASS: test_example_model")


def test_describe_model():
    text = describe_model(load_example())
    assert "RISK MODEL" in text
    assert "Drift mu:       0.25" in text
    assert "exponential(rate=1)" in text
    print("  PASS: test_describe_model")


if __name__ == "__main__":
    print("Running model schema tests...")
    test_valid_document()
    test_phase_law_and_jumps()
    test_unknown_key_rejected()
    test_nonpositive_premium()
    test_bad_generator()
    test_bad_law_and_jump_key()
    test_length_mismatch()
    test_non_finite_rates_rejected()
    test_save_and_load()
    test_load_errors()
    test_example_model()
    test_describe_model()
    print("\nAll model schema tests passed!")
