"""Closed-form prediction of compression-induced detection error.

The detector error caused by a relative fronthaul error ``delta_y`` scales
with the Frobenius condition number of the channel and shrinks with the
beam and layer counts; sharing one exponent across a resource block grows
the error by ``sqrt(2 ln(4 n12))``, the expected peak-to-sigma ratio of the
``2 n12`` Gaussian components that set the exponent.  Both predictions are
order-of-magnitude estimators backed by a Gaussian product identity that is
checked here by Monte Carlo.
"""

import math
from dataclasses import dataclass

import numpy as np

from .linalg import mmse_weights
from .rng import TAG_MONTE_CARLO, stream
from .validation import as_complex_matrix, as_grid, check_positive


def common_exponent_growth_factor(n12: int) -> float:
    """Error growth from sharing one exponent over ``n12`` complex values."""
    if n12 < 1:
        raise ValueError(f"n12 must be at least 1, got {n12}")
    return math.sqrt(2.0 * math.log(4.0 * n12))


def predict_detection_error(delta_y: float, n_beam: int, n_user: int,
                            cond_f: float) -> float:
    """Relative detector error for a given relative signal error.

    ``delta_y * cond_f / sqrt(n_beam * n_user)``; with a single layer and a
    vector channel (``cond_f == 1``) this reduces to ``delta_y / sqrt(n_beam)``.
    """
    delta_y = check_positive(delta_y, "delta_y")
    cond_f = check_positive(cond_f, "cond_f")
    if n_beam < 1 or n_user < 1:
        raise ValueError("n_beam and n_user must be positive")
    return delta_y * cond_f / math.sqrt(n_beam * n_user)


def predict_detection_error_common_exp(delta_y: float, n_beam: int, n_user: int,
                                       n12: int, cond_f: float) -> float:
    """Detection-error prediction including the common-exponent growth factor."""
    return (predict_detection_error(delta_y, n_beam, n_user, cond_f)
            * common_exponent_growth_factor(n12))


@dataclass(frozen=True)
class ErrorPrediction:
    """One prediction together with the inputs it was computed from."""

    delta_y: float
    n_beam: int
    n_user: int
    n12: int
    cond_f: float
    predicted_error: float

    @classmethod
    def compute(cls, delta_y: float, n_beam: int, n_user: int, n12: int,
                cond_f: float) -> "ErrorPrediction":
        return cls(
            delta_y=delta_y, n_beam=n_beam, n_user=n_user, n12=n12, cond_f=cond_f,
            predicted_error=predict_detection_error_common_exp(
                delta_y, n_beam, n_user, n12, cond_f),
        )


def gaussian_product_mc(a, b, trials: int, seed: int = 0,
                        chunk: int = 2048) -> tuple[float, float]:
    """Monte-Carlo check of ``E ||A W B||_F^2 == ||A||_F^2 ||B||_F^2``.

    ``W`` has independent circular complex Gaussian entries of unit variance.
    Returns ``(empirical mean, exact value)``.
    """
    a = as_complex_matrix(a, "a")
    b = as_complex_matrix(b, "b")
    if trials < 1:
        raise ValueError("trials must be positive")
    inner_rows, inner_cols = a.shape[1], b.shape[0]
    rng = stream(seed, TAG_MONTE_CARLO)
    total = 0.0
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        w = (rng.standard_normal((t, inner_rows, inner_cols))
             + 1j * rng.standard_normal((t, inner_rows, inner_cols))) / np.sqrt(2.0)
        prod = np.einsum("ij,tjk,kl->til", a, w, b)
        total += float(np.sum(np.abs(prod) ** 2))
        done += t
    theoretical = float(np.linalg.norm(a) ** 2 * np.linalg.norm(b) ** 2)
    return total / trials, theoretical


def measure_detection_error(y_clean, y_decoded, h_per_rb, sigma2: float) -> float:
    """Relative detector-output error between decoded and clean grids.

    Applies the MMSE detector per resource block to both grids and returns
    ``||X_decoded - X_clean|| / ||X_clean||`` aggregated over all
    subcarriers.  ``h_per_rb`` holds the per-block effective channels,
    shape ``(n_rb, n_streams, n_layers)``.
    """
    y_clean = as_grid(y_clean, "y_clean")
    y_decoded = as_grid(y_decoded, "y_decoded")
    if y_clean.shape != y_decoded.shape:
        raise ValueError(f"shape mismatch: {y_clean.shape} vs {y_decoded.shape}")
    h_per_rb = np.asarray(h_per_rb, dtype=np.complex128)
    if h_per_rb.ndim != 3:
        raise ValueError("h_per_rb must be (n_rb, n_streams, n_layers)")
    n_rb = h_per_rb.shape[0]
    n_sc = y_clean.shape[0]
    if n_sc % n_rb != 0:
        raise ValueError(f"{n_sc} subcarriers do not split into {n_rb} blocks")
    n12 = n_sc // n_rb
    err = 0.0
    ref = 0.0
    for rb in range(n_rb):
        w = mmse_weights(h_per_rb[rb], sigma2)
        rows = slice(rb * n12, (rb + 1) * n12)
        x_clean = y_clean[rows] @ w.T
        x_decoded = y_decoded[rows] @ w.T
        err += float(np.sum(np.abs(x_decoded - x_clean) ** 2))
        ref += float(np.sum(np.abs(x_clean) ** 2))
    if ref == 0.0:
        raise ValueError("clean detector output is zero; error ratio undefined")
    return math.sqrt(err / ref)
