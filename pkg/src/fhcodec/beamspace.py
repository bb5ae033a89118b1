"""Beam basis construction, power sorting, and the beamspace transform.

A basis is a set of orthonormal columns of the antenna space (DFT beams,
wideband left singular vectors of the channel, or plain antenna selection),
re-ordered by the power each beam collects from the received grid so that
truncation keeps the strongest spatial directions.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .channel import ChannelRealization
from .validation import as_grid

BASIS_KINDS = ("dft", "svd", "identity")
ORTHONORMALITY_TOL = 1e-10


@dataclass
class BeamspaceBasis:
    """Power-sorted orthonormal beam matrix of shape ``(m_antennas, n_beam)``."""

    kind: str
    matrix: np.ndarray
    power_per_beam: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        self.power_per_beam = np.asarray(self.power_per_beam, dtype=np.float64)
        m, n_beam = self.matrix.shape
        if self.power_per_beam.shape != (n_beam,):
            raise ValueError("one power value per beam required")
        gram = self.matrix.conj().T @ self.matrix
        if np.max(np.abs(gram - np.eye(n_beam))) > ORTHONORMALITY_TOL:
            raise ValueError("beam columns are not orthonormal")
        if np.any(np.diff(self.power_per_beam) > 1e-12 * max(self.power_per_beam[0], 1.0)):
            raise ValueError("power_per_beam must be sorted descending")

    @property
    def m_antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_beam(self) -> int:
        return self.matrix.shape[1]


def dft_basis(m: int) -> np.ndarray:
    """Unitary DFT matrix, entry ``(j, k) = exp(-2 pi i j k / m) / sqrt(m)``."""
    if m < 1:
        raise ValueError("m must be positive")
    jk = np.outer(np.arange(m), np.arange(m))
    return np.exp(-2j * np.pi * jk / m) / np.sqrt(m)


def svd_beams(ch: ChannelRealization) -> np.ndarray:
    """Left singular vectors of the wideband stacked channel, strongest first.

    The per-block matrices are stacked horizontally so one basis serves the
    whole band; columns beyond the stack rank complete an orthonormal basis.
    """
    stacked = np.concatenate(list(ch.matrices), axis=1)
    u, _, _ = np.linalg.svd(stacked, full_matrices=True)
    return u


def build_basis(kind: str, ch: ChannelRealization | None, y, n_beam: int) -> BeamspaceBasis:
    """Construct a basis and keep the ``n_beam`` most powerful directions.

    Beam power is measured from the received grid ``y`` (the radio head only
    has the noisy signal, not the channel): ``p_k = sum_sc |c_k^H y_sc|^2``.
    Equal powers tie-break on the original column index.
    """
    if kind not in BASIS_KINDS:
        raise ValueError(f"unknown basis kind {kind!r}, expected one of {BASIS_KINDS}")
    y = as_grid(y, "y")
    m = y.shape[1]
    if not 1 <= n_beam <= m:
        raise ValueError(f"n_beam must lie in [1, {m}], got {n_beam}")
    if kind == "dft":
        candidates = dft_basis(m)
    elif kind == "identity":
        candidates = np.eye(m, dtype=np.complex128)
    else:
        if ch is None:
            raise ValueError("svd basis requires the channel realization")
        if ch.m_antennas != m:
            raise ValueError(f"channel has {ch.m_antennas} antennas, grid has {m}")
        candidates = svd_beams(ch)
    power = np.sum(np.abs(y @ candidates.conj()) ** 2, axis=0)
    order = np.argsort(-power, kind="stable")[:n_beam]
    return BeamspaceBasis(kind=kind, matrix=candidates[:, order], power_per_beam=power[order])


def to_beamspace(y, basis: BeamspaceBasis) -> np.ndarray:
    """Project an antenna-domain grid onto the beams: ``y_b = B^H y`` per subcarrier."""
    y = as_grid(y, "y")
    if y.shape[1] != basis.m_antennas:
        raise ValueError(f"grid has {y.shape[1]} streams, basis expects {basis.m_antennas}")
    return y @ basis.matrix.conj()


def effective_channel(basis: BeamspaceBasis, ch: ChannelRealization) -> np.ndarray:
    """Per-block detection channel seen after the transform, ``B^H H_rb``."""
    if ch.m_antennas != basis.m_antennas:
        raise ValueError("basis and channel antenna counts differ")
    return np.einsum("mk,rmn->rkn", basis.matrix.conj(), ch.matrices)


class BeamspaceTransformer(TransformerMixin, BaseEstimator):
    """Beamspace projection as a scikit-learn transformer.

    ``fit`` builds the power-sorted basis from the received antenna grid
    (rows are subcarriers, columns antennas); ``transform`` projects grids
    onto the selected beams.  The SVD basis additionally needs the channel
    realization passed to ``fit``.
    """

    def __init__(self, kind: str = "dft", n_beam: int | None = None):
        self.kind = kind
        self.n_beam = n_beam

    def fit(self, X, y=None, *, channel: ChannelRealization | None = None):
        X = as_grid(X, "X")
        n_beam = X.shape[1] if self.n_beam is None else self.n_beam
        self.basis_ = build_basis(self.kind, channel, X, n_beam)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "basis_"):
            raise NotFittedError("BeamspaceTransformer is not fitted yet")
        return to_beamspace(X, self.basis_)
