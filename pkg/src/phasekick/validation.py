"""Small input-validation helpers used by the public entry points.

These keep the error messages uniform and raise ValidationError so the
CLI can distinguish bad input (exit 2) from numerical trouble (exit 3).
"""

import numpy as np

from .errors import ValidationError


def as_float_array(x, name, ndim=1):
    """Coerce to a float ndarray of the given dimensionality, rejecting NaN/inf."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_finite_scalar(x, name):
    x = float(x)
    if not np.isfinite(x):
        raise ValidationError(f"{name} must be finite, got {x}")
    return x


def check_positive(x, name):
    x = check_finite_scalar(x, name)
    if x <= 0:
        raise ValidationError(f"{name} must be > 0, got {x}")
    return x


def check_nonnegative(x, name):
    x = check_finite_scalar(x, name)
    if x < 0:
        raise ValidationError(f"{name} must be >= 0, got {x}")
    return x


def check_unit_interval(x, name):
    x = check_finite_scalar(x, name)
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {x}")
    return x


def check_same_length(name_a, a, name_b, b):
    if len(a) != len(b):
        raise ValidationError(
            f"{name_a} and {name_b} must have equal length, got {len(a)} and {len(b)}"
        )


def check_nonzero_int(x, name):
    xi = int(x)
    if xi != x:
        raise ValidationError(f"{name} must be an integer, got {x}")
    if xi == 0:
        raise ValidationError(f"{name} must be nonzero")
    return xi
