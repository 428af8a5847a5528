#!/usr/bin/env python3
"""
Model documents - JSON description of a MapModel.

A document lists the number of states, the generator Q, per-state premium,
volatility, claim intensity, claim law and observation rate, plus optional
jumps attached to transitions. This module handles validation, I/O and a
human-readable summary.
"""

import json
import logging
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ModelValidationError
from .model import MapModel, PhaseType, drift

logger = logging.getLogger("model_schema")

EXAMPLE_MODEL = Path(__file__).parent / "data" / "two_state.json"


# ---------------------------------------------------------------------------
# Document schema
# ---------------------------------------------------------------------------

class ExponentialLaw(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["exponential"]
    rate: float = Field(gt=0)


class PhaseLaw(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: Literal["phase"]
    alpha: List[float]
    T: List[List[float]]


LawDocument = Annotated[Union[ExponentialLaw, PhaseLaw], Field(discriminator="type")]


class ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    states: int = Field(ge=1)
    Q: List[List[float]]
    premium: List[float]
    sigma: Optional[List[float]] = None
    claim_rate: List[float]
    claims: List[LawDocument]
    omega: List[float]
    jumps: Optional[Dict[str, LawDocument]] = None


def _law_from_document(doc: LawDocument) -> PhaseType:
    if isinstance(doc, ExponentialLaw):
        return PhaseType.exponential(doc.rate)
    return PhaseType(np.array(doc.alpha, dtype=float), np.array(doc.T, dtype=float))


def _law_to_document(law: PhaseType) -> Dict:
    if law.order == 1 and law.alpha[0] == 1.0:
        return {"type": "exponential", "rate": float(-law.T[0, 0])}
    return {"type": "phase", "alpha": law.alpha.tolist(), "T": law.T.tolist()}


def _parse_transition(key: str) -> Optional[Tuple[int, int]]:
    parts = key.split(",")
    if len(parts) != 2:
        return None
    try:
        return int(parts[0].strip()), int(parts[1].strip())
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def check_document(raw: Dict) -> Tuple[Optional[MapModel], List[str]]:
    """
    Check a raw model document.

    Args:
        raw: Parsed JSON object

    Returns:
        (model or None, list_of_error_strings)
    """
    try:
        doc = ModelDocument.model_validate(raw)
    except ValidationError as e:
        errors = []
        for err in e.errors():
            loc = ".".join(str(part) for part in err["loc"])
            errors.append(f"{loc}: {err['msg']}" if loc else err["msg"])
        return None, errors

    errors = []
    n = doc.states
    if len(doc.Q) != n or any(len(row) != n for row in doc.Q):
        errors.append(f"Q must be {n}x{n} for states={n}")

    jumps = {}
    for key, law_doc in (doc.jumps or {}).items():
        transition = _parse_transition(key)
        if transition is None:
            errors.append(f"jumps: key '{key}' is not of the form 'i,j'")
            continue
        jumps[transition] = _law_from_document(law_doc)
    if errors:
        return None, errors

    model = MapModel(
        Q=np.array(doc.Q, dtype=float),
        c=np.array(doc.premium, dtype=float),
        beta=np.array(doc.claim_rate, dtype=float),
        claims=tuple(_law_from_document(law) for law in doc.claims),
        omega=np.array(doc.omega, dtype=float),
        sigma=None if doc.sigma is None else np.array(doc.sigma, dtype=float),
        jumps=jumps,
    )
    errors = model.check()
    return (model if not errors else None), errors


def validate_model(raw: Dict) -> MapModel:
    """
    Build a MapModel from a document, or raise ModelValidationError with
    every problem found.
    """
    model, errors = check_document(raw)
    if errors:
        raise ModelValidationError(errors)
    return model


# ---------------------------------------------------------------------------
# Model I/O
# ---------------------------------------------------------------------------

def model_to_document(model: MapModel) -> Dict:
    """Serialize a model into the document format."""
    doc = {
        "states": model.n,
        "Q": model.Q.tolist(),
        "premium": model.c.tolist(),
        "sigma": model.sigma.tolist(),
        "claim_rate": model.beta.tolist(),
        "claims": [_law_to_document(law) for law in model.claims],
        "omega": model.omega.tolist(),
    }
    if model.jumps:
        doc["jumps"] = {f"{i},{j}": _law_to_document(law) for (i, j), law in sorted(model.jumps.items())}
    return doc


def load_model(path: Path) -> MapModel:
    """Load and validate a model document from a JSON file."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except (json.JSONDecodeError, IOError) as e:
        raise ModelValidationError([f"cannot read model from {path}: {e}"])
    model = validate_model(raw)
    logger.info(f"Loaded {model.n}-state model from {path}")
    return model


def save_model(model: MapModel, path: Path) -> bool:
    """Save a model document to a JSON file."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(model_to_document(model), f, indent=2)
        return True
    except IOError as e:
        logger.error(f"Failed to save model to {path}: {e}")
        return False


def load_example() -> MapModel:
    """The built-in two-state example model."""
    return load_model(EXAMPLE_MODEL)


# ---------------------------------------------------------------------------
# Debug helpers
# ---------------------------------------------------------------------------

def _describe_law(law: PhaseType) -> str:
    if law.order == 1:
        return f"exponential(rate={-law.T[0, 0]:g})"
    return f"phase-type(order={law.order}, mean={law.mean:.4g})"


def describe_model(model: MapModel) -> str:
    """Format a model and its drift as a human-readable string."""
    lines = []
    lines.append("=" * 60)
    lines.append("RISK MODEL")
    lines.append(f"  States: {model.n}")
    lines.append("-" * 60)
    lines.append(f"  {'state':>5s} {'premium':>9s} {'sigma':>7s} {'claims':>8s} {'omega':>7s}  claim law")
    for i in range(model.n):
        lines.append(
            f"  {i:5d} {model.c[i]:9.4g} {model.sigma[i]:7.4g} {model.beta[i]:8.4g} "
            f"{model.omega[i]:7.4g}  {_describe_law(model.claims[i])}"
        )
    lines.append("  Generator Q:")
    for row in model.Q:
        lines.append("    " + " ".join(f"{v:9.4f}" for v in row))
    if model.jumps:
        lines.append("  Transition jumps:")
        for (i, j), law in sorted(model.jumps.items()):
            lines.append(f"    {i} -> {j}: {_describe_law(law)}")

    lines.append("-" * 60)
    report = drift(model)
    lines.append(f"  Stationary law: {' '.join(f'{p:.4f}' for p in report.pi)}")
    lines.append(f"  Drift mu:       {report.mu:.6g}")
    lines.append("=" * 60)
    return "\n".join(lines)
