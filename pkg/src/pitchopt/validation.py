"""Input validation helpers shared across the package."""

import numpy as np


def as_float_array(x, name="array", ndim=None):
    """Coerce to a finite float64 ndarray, optionally checking dimensionality."""
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value


def check_power_of_two(value, name):
    value = int(value)
    if value <= 0 or value & (value - 1):
        raise ValueError(f"{name} must be a power of two, got {value!r}")
    return value


def check_same_shape(a, b, name_a="first", name_b="second"):
    if np.shape(a) != np.shape(b):
        raise ValueError(
            f"shape mismatch: {name_a} {np.shape(a)} vs {name_b} {np.shape(b)}"
        )


def check_in_unit_interval(arr, name, open_interval=False):
    arr = np.asarray(arr)
    if open_interval:
        ok = np.all(arr > 0.0) and np.all(arr < 1.0)
    else:
        ok = np.all(arr >= 0.0) and np.all(arr <= 1.0)
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} must lie in {bounds}")
    return arr
