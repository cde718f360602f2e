"""Small input-validation helpers shared by the modules and estimators."""

import math

import numpy as np

from .errors import ValidationError


def check_positive(value, name, module, operation):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(module, operation, f"{name} must be a real number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(module, operation, f"{name} must be finite and > 0, got {value!r}")
    return value


def check_count(value, name, module, operation, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValidationError(module, operation, f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_point(p, module, operation, name="point"):
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ValidationError(module, operation, f"{name} must be a finite 2-vector, got {p!r}")
    return arr


def check_points(X, module, operation, name="points"):
    """Coerce to a finite (k, 2) float array; a single point becomes (1, 2)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(module, operation, f"{name} must have shape (k, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(module, operation, f"{name} contains non-finite values")
    return arr


def check_unit_vector(v, module, operation, name="direction"):
    arr = check_point(v, module, operation, name)
    norm = float(np.hypot(*arr))
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(module, operation, f"{name} must have unit length, got norm {norm}")
    return arr / norm
