"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .exceptions import DimensionMismatch, NonPositiveInput

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


def as_matrix(value, name, *, shape=None):
    """Coerce scalars, vectors or nested lists into a 2-D float array.

    Scalars become 1x1 matrices. A 1-D input of length n becomes an n x 1
    column, which is what a noise gain ``B`` with a single input means.
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, ensure_2d=True, dtype=np.float64, input_name=name,
                      ensure_min_samples=1, ensure_min_features=1, copy=True)
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionMismatch(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    return arr


def check_square(arr, name):
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_symmetric_psd(arr, name, *, sym_tol=SYMMETRY_TOL, psd_tol=PSD_TOL):
    """Raise if ``arr`` is not symmetric PSD; return the symmetrized copy."""
    check_square(arr, name)
    scale = max(1.0, float(np.max(np.abs(arr))))
    if np.max(np.abs(arr - arr.T)) > sym_tol * scale:
        raise ValueError(f"{name} is not symmetric")
    sym = 0.5 * (arr + arr.T)
    if arr.size and np.linalg.eigvalsh(sym).min() < -psd_tol * scale:
        raise ValueError(f"{name} is not positive semidefinite")
    return sym


def check_positive_scalar(value, name):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if not np.isfinite(value) or value <= 0:
        raise NonPositiveInput(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_trajectory(X, p, name="X"):
    """Validate a trajectory array of shape (n_steps, p)."""
    X = check_array(X, dtype=np.float64, ensure_2d=False, input_name=name)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if p == 1 else X.reshape(1, -1)
    if X.shape[1] != p:
        raise DimensionMismatch(f"{name} has {X.shape[1]} columns, the model has p={p}")
    return X


def readonly(arr):
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr
