"""Input validation helpers.

Complex-valued grids and channel matrices cannot go through
``sklearn.utils.check_array`` (it rejects complex data), so the estimators
and the functional core share these small checkers instead.
"""

import numpy as np


def as_complex_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a 2-D complex128 array and verify all entries are finite."""
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def as_grid(x, name: str = "grid") -> np.ndarray:
    """A resource grid is a (n_subcarriers, n_streams) complex matrix."""
    a = as_complex_matrix(x, name)
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one subcarrier and one stream")
    return a


def as_profile(bits, n_beam: int | None = None, name: str = "profile") -> np.ndarray:
    """Coerce per-beam mantissa bitwidths to an int array and range-check them.

    An integer scalar is broadcast to a uniform profile of length ``n_beam``.
    """
    if np.isscalar(bits):
        if n_beam is None:
            raise ValueError(f"{name}: scalar bitwidth needs an explicit beam count")
        arr = np.full(n_beam, int(bits), dtype=np.int64)
    else:
        arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence of bitwidths")
    if n_beam is not None and arr.size != n_beam:
        raise ValueError(f"{name} has {arr.size} entries, expected {n_beam}")
    if arr.min() < 1 or arr.max() > 10:
        raise ValueError(f"{name} bitwidths must lie in [1, 10], got {arr.tolist()}")
    return arr


def check_positive(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return v
