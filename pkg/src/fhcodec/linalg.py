"""Dense complex linear algebra for detection and beamspace construction.

Everything here is a thin, contract-enforcing layer over LAPACK-backed
numpy/scipy routines: deterministic, pure, and safe to share across threads.
"""

import numpy as np
import scipy.linalg

from .exceptions import NotPositiveDefiniteError, NumericalError
from .validation import as_complex_matrix

HERMITIAN_RTOL = 1e-10
#: Default relative cutoff on singular values when forming a pseudoinverse.
RANK_RTOL = 1e-12


def matmul(a, b) -> np.ndarray:
    """Complex matrix product with an explicit inner-dimension check."""
    a = as_complex_matrix(a, "a")
    b = as_complex_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def cholesky_solve(a, rhs) -> np.ndarray:
    """Solve ``a @ s = rhs`` for Hermitian positive-definite ``a``.

    Raises
    ------
    NotPositiveDefiniteError
        If ``a`` is not Hermitian to within ``HERMITIAN_RTOL`` (relative,
        Frobenius) or the factorization hits a non-positive pivot.
    """
    a = as_complex_matrix(a, "a")
    rhs = as_complex_matrix(rhs, "rhs")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"a must be square, got {a.shape}")
    if rhs.shape[0] != n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {n}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > HERMITIAN_RTOL * max(scale, 1.0):
        raise NotPositiveDefiniteError("matrix is not Hermitian")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin singular value decomposition ``a = U @ diag(s) @ V^H``.

    Returns ``(u, s, v)`` with orthonormal columns in ``u`` and ``v`` and
    ``s`` sorted descending.
    """
    a = as_complex_matrix(a, "a")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return u, s, vh.conj().T


def pseudoinverse(h, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values at or below ``rank_tol`` are treated as zero; the default
    cutoff is ``RANK_RTOL * s_max``, far below any quantization noise studied.
    """
    h = as_complex_matrix(h, "h")
    u, s, v = svd(h)
    if rank_tol is None:
        rank_tol = RANK_RTOL * (s[0] if s.size else 0.0)
    elif rank_tol < 0:
        raise ValueError("rank_tol must be non-negative")
    inv_s = np.where(s > rank_tol, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (v * inv_s) @ u.conj().T


def mmse_weights(h, sigma2: float) -> np.ndarray:
    """Linear MMSE detection matrix ``(H^H H + sigma2 I)^-1 H^H``.

    With ``sigma2 == 0`` this is the least-squares detector and ``h`` must
    have full column rank.
    """
    h = as_complex_matrix(h, "h")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    gram = h.conj().T @ h
    if sigma2 > 0:
        gram = gram + sigma2 * np.eye(h.shape[1])
    return cholesky_solve(gram, h.conj().T)


def cond_frobenius(h) -> float:
    """Frobenius-norm condition number ``||pinv(H)||_F * ||H||_F``."""
    h = as_complex_matrix(h, "h")
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ValueError("condition number of the zero matrix is undefined")
    return float(np.linalg.norm(pseudoinverse(h)) * norm)
