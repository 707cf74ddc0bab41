"""Small input-validation helpers used by the public functions."""

import numpy as np

PSD_SLACK = 1e-10


def as_vector(x, name="x", dim=None):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} must have length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_matrix(a, name="A", shape=None):
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_symmetric(a, name="S", atol=1e-9):
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if not np.allclose(a, a.T, atol=atol * scale, rtol=0.0):
        raise ValueError(f"{name} must be symmetric")
    return a


def min_eig(a):
    return float(np.linalg.eigvalsh(0.5 * (a + a.T)).min())


def is_psd(a, slack=PSD_SLACK):
    return min_eig(a) >= -slack


def check_psd(a, name="S", slack=PSD_SLACK):
    check_symmetric(a, name)
    lo = min_eig(a)
    if lo < -slack:
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {lo:.3e})")
    return a


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value
