"""Input validation helpers shared by the functional API and the estimators."""

import math
import numbers

import numpy as np

from .exceptions import InvalidConfigError


def check_positive(value, name, allow_zero=False):
    """Return ``value`` as float after checking it is finite and positive."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidConfigError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidConfigError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidConfigError(f"{name} must be {bound}, got {value}")
    return value


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_points(points, name, ndim=3):
    """Coerce to a float64 ``(n, ndim)`` array of finite points."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != ndim:
        raise InvalidConfigError(f"{name} must have shape (n, {ndim}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidConfigError(f"{name} contains non-finite values")
    return arr


def check_vector3(vec, name, dtype=float):
    arr = np.asarray(vec, dtype=dtype)
    if arr.shape != (3,):
        raise InvalidConfigError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidConfigError(f"{name} contains non-finite values")
    return arr


def check_channel_tensor(X, allow_batch=True):
    """Validate a complex channel tensor.

    Accepts a single tensor ``(N_r, N_t, K_s)`` or, when ``allow_batch``,
    a batch ``(n, N_r, N_t, K_s)``. Returns ``(array, is_batch)`` with the
    array cast to complex128.
    """
    arr = np.asarray(X)
    if arr.ndim == 3:
        batch = False
    elif arr.ndim == 4 and allow_batch:
        batch = True
    else:
        raise InvalidConfigError(
            f"channel tensor must be 3-D (N_r, N_t, K_s){' or 4-D batched' if allow_batch else ''}, "
            f"got shape {arr.shape}"
        )
    arr = arr.astype(np.complex128, copy=False)
    if arr.size == 0:
        raise InvalidConfigError("channel tensor is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidConfigError("channel tensor contains non-finite entries")
    return arr, batch


def check_aligned(*arrays, names=None):
    """Coerce to 1-D float arrays of common length."""
    out = [np.atleast_1d(np.asarray(a, dtype=float)) for a in arrays]
    lengths = {a.shape[0] for a in out}
    if len(lengths) > 1:
        label = ", ".join(names) if names else "inputs"
        raise InvalidConfigError(f"{label} must have equal length, got {[a.shape[0] for a in out]}")
    return out
