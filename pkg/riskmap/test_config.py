#!/usr/bin/env python3
"""
Tests for riskmap/config.py and riskmap/errors.py

Run with:
    python -m riskmap.test_config
"""

import json
import tempfile
from pathlib import Path

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))

import pytest
from pydantic import ValidationError

from riskmap.config import DEFAULT_TOLERANCES, Tolerances, load_tolerances
from riskmap.errors import (
    ModelValidationError,
    RepeatedEigenvalue,
    RiskMapError,
    UsageError,
    ZeroDrift,
    exit_code_for,
)


def test_defaults():
    assert load_tolerances(None) is DEFAULT_TOLERANCES
    assert DEFAULT_TOLERANCES.repeated_root == 1e-7
    assert DEFAULT_TOLERANCES.probability_slack == 1e-9
    print("  PASS: test_defaults")


def test_missing_file_gives_defaults():
    with tempfile.TemporaryDirectory() as tmpdir:
        tol = load_tolerances(Path(tmpdir) / "absent.json")
    assert tol == DEFAULT_TOLERANCES
    print("  PASS: test_missing_file_gives_defaults")


def test_overrides_applied():
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "tol.json"
        path.write_text(json.dumps({"repeated_root": 1e-9, "time_cap": 50.0}))
        tol = load_tolerances(path)
    assert tol.repeated_root == 1e-9
    assert tol.time_cap == 50.0
    assert tol.condition_limit == DEFAULT_TOLERANCES.condition_limit
    print("  PASS: test_overrides_applied")


def test_bad_overrides():
    with tempfile.TemporaryDirectory() as tmpdir:
        path = Path(tmpdir) / "tol.json"
        path.write_text(json.dumps({"no_such_tolerance": 1.0}))
        with pytest.raises(ModelValidationError) as info:
            load_tolerances(path)
        assert any("no_such_tolerance" in e for e in info.value.errors)

        # F' is exact, so there is no finite-difference step to override
        path.write_text(json.dumps({"fd_step": 1e-6}))
        with pytest.raises(ModelValidationError):
            load_tolerances(path)
        assert "fd_step" not in Tolerances.model_fields

        path.write_text("{not json")
        with pytest.raises(ModelValidationError):
            load_tolerances(path)

        path.write_text("[1, 2]")
        with pytest.raises(ModelValidationError):
            load_tolerances(path)
    print("  PASS: test_bad_overrides")


def test_tolerances_frozen():
    with pytest.raises(ValidationError):
        DEFAULT_TOLERANCES.repeated_root = 1.0
    with pytest.raises(ValidationError):
        Tolerances(bogus=1.0)
    print("  PASS: test_tolerances_frozen")


def test_exit_codes():
    assert exit_code_for(ModelValidationError(["bad"])) == 1
    assert exit_code_for(UsageError("bad flag")) == 1
    assert exit_code_for(ZeroDrift("mu = 0")) == 1
    assert exit_code_for(RepeatedEigenvalue("close roots")) == 2
    assert exit_code_for(ValueError("other")) == 1
    assert isinstance(RepeatedEigenvalue("x"), RiskMapError)
    assert str(ModelValidationError(["a", "b"])) == "a; b"
    print("  PASS: test_exit_codes")


if __name__ == "__main__":
    print("Running config tests...")
    test_defaults()
    test_missing_file_gives_defaults()
    test_overrides_applied()
    test_bad_overrides()
    test_tolerances_frozen()
    test_exit_codes()
    print("\nAll config tests passed!")
