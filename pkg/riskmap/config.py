"""
Numerical tolerances for riskmap.

One frozen record holds every threshold used by the numerical modules.
Projects can override any of them through a small JSON file, in the same
way per-project defaults are layered over the built-in ones.
"""

import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import ModelValidationError

logger = logging.getLogger("config")


class Tolerances(BaseModel):
    """Thresholds shared by the numerical kernels."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Polynomials
    poly_trim: float = 1e-12
    newton_steps: int = 10

    # Linear algebra
    sylvester_separation: float = 1e-9
    sylvester_residual: float = 1e-10
    null_rank: float = 1e-8
    generator_rowsum: float = 1e-8
    condition_limit: float = 1e12

    # Spectral method
    imag_axis_band: float = 1e-9
    zero_cluster: float = 1e-6
    repeated_root: float = 1e-7
    real_residue: float = 1e-9
    null_residual: float = 1e-8

    # Scale functions
    confluent_guard: float = 1e-10
    pole_guard: float = 1e-12
    scale_consistency: float = 1e-8

    # Probabilities
    probability_slack: float = 1e-9

    # Simulation
    time_cap: float = 1e6


DEFAULT_TOLERANCES = Tolerances()


def load_tolerances(path: Optional[Path]) -> Tolerances:
    """
    Load tolerance overrides from a JSON file.

    Args:
        path: File holding a JSON object with a subset of the Tolerances
              fields. None or a missing file gives the defaults.

    Returns:
        Tolerances with the overrides applied.
    """
    if path is None:
        return DEFAULT_TOLERANCES
    path = Path(path)
    if not path.exists():
        logger.info(f"No tolerance overrides at {path}, using defaults")
        return DEFAULT_TOLERANCES

    try:
        with open(path, "r") as f:
            overrides = json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise ModelValidationError([f"cannot read tolerances from {path}: {e}"])

    if not isinstance(overrides, dict):
        raise ModelValidationError([f"tolerances file {path} must hold a JSON object"])

    try:
        tol = Tolerances(**{**DEFAULT_TOLERANCES.model_dump(), **overrides})
    except ValidationError as e:
        raise ModelValidationError([f"tolerances: {err['loc'][0]}: {err['msg']}" for err in e.errors()])

    logger.info(f"Loaded {len(overrides)} tolerance overrides from {path}")
    return tol
