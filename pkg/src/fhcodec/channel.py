"""Synthetic uplink channels with controlled conditioning and sparsity.

Two generators stand in for ray-traced channels at desk scale: ``randsvd``
matrices with a prescribed singular-value spread (log-uniform, mirroring the
roughly exponential spectra of measured channels) and a clustered multipath
model built from uniform-linear-array steering vectors, which provides the
spatial sparsity the beamspace selection exploits.  Externally generated
channels can be imported through a small binary container format.

File format (all integers little-endian):

    magic   4 bytes  ``FHCH``
    version 1 byte   0x01
    n_rb    uint16
    m       uint16   antennas
    n       uint16   layers
    data    n_rb * m * n complex entries, row-major per resource block,
            each a float64 real part followed by a float64 imaginary part
"""

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import ChannelFileError
from .rng import TAG_SCENARIO, stream

_MAGIC = b"FHCH"
_VERSION = 1
_HEADER = struct.Struct("<4sBHHH")


@dataclass(eq=False)
class ChannelRealization:
    """Per-resource-block channel matrices, shape ``(n_rb, m_antennas, n_layers)``."""

    matrices: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.complex128)
        if m.ndim != 3:
            raise ValueError(f"expected (n_rb, m, n) matrices, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("channel contains non-finite entries")
        self.matrices = m

    @property
    def n_rb(self) -> int:
        return self.matrices.shape[0]

    @property
    def m_antennas(self) -> int:
        return self.matrices.shape[1]

    @property
    def n_layers(self) -> int:
        return self.matrices.shape[2]


def randsvd_channel(m: int, n: int, cond_target: float, n_rb: int, seed: int
                    ) -> ChannelRealization:
    """Random matrices with an exact, prescribed spectral condition number.

    Each resource block is an independent draw ``U diag(s) V^H`` with ``U``
    and ``V`` Haar-distributed (QR of a complex Gaussian with phase fix) and
    ``s`` log-uniformly spaced so ``s_max/s_min == cond_target``, scaled so
    ``||H||_F^2 == m * n``.  Deterministic in ``seed``; resource blocks use
    independent counter-based streams keyed by ``(seed, rb)``.
    """
    if m < n:
        raise ValueError(f"need at least as many antennas as layers, got {m} < {n}")
    if cond_target < 1.0:
        raise ValueError(f"cond_target must be >= 1, got {cond_target}")
    if n_rb < 1:
        raise ValueError("n_rb must be positive")
    exponents = np.linspace(0.0, 1.0, n) if n > 1 else np.zeros(1)
    s = cond_target ** -exponents
    s *= np.sqrt(m * n / np.sum(s**2))
    out = np.empty((n_rb, m, n), dtype=np.complex128)
    for rb in range(n_rb):
        rng = stream(seed, rb)
        u = _haar_unitary(rng, m)[:, :n]
        v = _haar_unitary(rng, n)
        out[rb] = (u * s) @ v.conj().T
    return ChannelRealization(out)


def _haar_unitary(rng: np.random.Generator, size: int) -> np.ndarray:
    g = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def steering_vector(m: int, angle_deg) -> np.ndarray:
    """Unit-norm ULA response at half-wavelength spacing."""
    angle = np.deg2rad(np.asarray(angle_deg, dtype=np.float64))
    phase = np.pi * np.outer(np.arange(m), np.sin(angle))
    return np.exp(1j * phase) / np.sqrt(m)


def clustered_channel(m: int, n: int, n_clusters: int, angle_spread_deg: float,
                      n_rb: int, seed: int) -> ChannelRealization:
    """Sparse multipath channel: per-layer sums of steering vectors.

    Cluster directions, per-layer angle jitter, and complex path gains are
    drawn once per scenario and shared across resource blocks; each block
    only rotates the path phases.  That mimics frequency-selective fading
    while keeping the spatial directions (and hence the beam selection)
    stable across frequency.  Normalized so the mean of ``||H_rb||_F^2``
    over blocks equals ``m * n``.
    """
    if not 1 <= n_clusters <= m:
        raise ValueError(f"n_clusters must lie in [1, {m}], got {n_clusters}")
    if n < 1 or n_rb < 1:
        raise ValueError("n and n_rb must be positive")
    if angle_spread_deg < 0:
        raise ValueError("angle_spread_deg must be non-negative")
    scenario = stream(seed, TAG_SCENARIO)
    centers = scenario.uniform(-60.0, 60.0, size=n_clusters)
    jitter = scenario.uniform(-1.0, 1.0, size=(n, n_clusters)) * angle_spread_deg
    gains = (scenario.standard_normal((n, n_clusters))
             + 1j * scenario.standard_normal((n, n_clusters))) / np.sqrt(2.0)
    # (m, n, n_clusters) steering responses, one per layer/path
    steer = steering_vector(m, centers[None, :] + jitter).reshape(m, n, n_clusters)
    out = np.empty((n_rb, m, n), dtype=np.complex128)
    amp = np.sqrt(m / n_clusters)
    for rb in range(n_rb):
        phases = np.exp(2j * np.pi * stream(seed, rb).uniform(size=(n, n_clusters)))
        out[rb] = amp * np.einsum("mnc,nc->mn", steer, gains * phases)
    energy = np.mean(np.sum(np.abs(out) ** 2, axis=(1, 2)))
    out *= np.sqrt(m * n / energy)
    return ChannelRealization(out)


def save_channel(ch: ChannelRealization, path) -> None:
    """Write a realization to the ``FHCH`` container (bit-exact round trip)."""
    for name, value in (("n_rb", ch.n_rb), ("m", ch.m_antennas), ("n", ch.n_layers)):
        if value > 0xFFFF:
            raise ValueError(f"{name}={value} exceeds the 16-bit header field")
    header = _HEADER.pack(_MAGIC, _VERSION, ch.n_rb, ch.m_antennas, ch.n_layers)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(ch.matrices, dtype="<c16").tobytes())


def load_channel(path) -> ChannelRealization:
    """Read a realization from the ``FHCH`` container."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ChannelFileError("file shorter than header", byte_offset=len(blob))
    magic, version, n_rb, m, n = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ChannelFileError(f"bad magic {magic!r}", byte_offset=0)
    if version != _VERSION:
        raise ChannelFileError(f"unsupported version {version}", byte_offset=4)
    if n_rb == 0 or m == 0 or n == 0:
        raise ChannelFileError("zero dimension in header", byte_offset=5)
    expected = _HEADER.size + n_rb * m * n * 16
    if len(blob) != expected:
        raise ChannelFileError(
            f"expected {expected} bytes, got {len(blob)}",
            byte_offset=min(len(blob), expected),
        )
    data = np.frombuffer(blob, dtype="<c16", offset=_HEADER.size)
    return ChannelRealization(data.reshape(n_rb, m, n).astype(np.complex128))
