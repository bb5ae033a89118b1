"""Common-exponent block floating-point codec for beamspace grids.

A grid of ``n_rb * n12`` subcarriers by ``n_beam`` beams is split into
``(beam, resource block)`` blocks of ``n12`` complex values.  Each block
stores one shared power-of-two exponent (``b_exp`` bits, biased) chosen as
the smallest ``e`` with ``max(|re|, |im|) <= 2^e``; the ``2 * n12`` real
components are scaled by ``2^-e`` and quantized to the nearest level of a
Lloyd-Max quantizer designed for the unit-variance Gaussian.  Decompression
multiplies the level back by ``2^e``.

Wire format (all integers little-endian)::

    magic    4 bytes  ``FHC1``
    version  1 byte   0x01
    n_rb     uint16
    n_beam   uint16
    n12      uint8
    b_exp    uint8
    bits     n_beam bytes, per-beam mantissa bitwidths
    sat      uint32   saturated block count
    payload  packed MSB-first, beams outer / resource blocks inner, per
             block the biased exponent then I and Q indices per subcarrier,
             zero-padded to a byte boundary

Payload length is exactly ``b_exp * n_beam * n_rb + 2 * n_sc * sum(bits)``
bits; this is asserted on every encode.
"""

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.special import ndtr, ndtri
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .exceptions import FrameParseError, NumericalError
from .validation import as_grid, as_profile

_MAGIC = b"FHC1"
_VERSION = 1
_HEADER = struct.Struct("<4sBHHBB")

#: Exponent floor (in powers of two) assigned to all-zero blocks with the
#: default 4-bit biased exponent range [-8, 7].
DEFAULT_E_MIN = -8

#: Fixed-point criterion: largest level movement under one Lloyd sweep.
_LLOYD_TOL = 1e-9
_LLOYD_MAX_ITER = 400


def _norm_pdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class QuantizerCodebook:
    """Scalar quantizer: ascending levels and the thresholds between them."""

    bits: int
    levels: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.thresholds.shape != (self.levels.size - 1,):
            raise ValueError("need exactly one threshold between adjacent levels")

    def quantize(self, values: np.ndarray) -> np.ndarray:
        """Nearest-level indices; values exactly on a threshold take the lower cell."""
        return np.searchsorted(self.thresholds, values, side="left")

    def dequantize(self, indices: np.ndarray) -> np.ndarray:
        return self.levels[indices]

    @property
    def mse(self) -> float:
        """Exact distortion for the unit Gaussian source."""
        return gaussian_codebook_mse(self.levels, self.thresholds)

    @property
    def rms_distortion(self) -> float:
        """Nominal relative precision of the quantizer on its design source."""
        return float(np.sqrt(self.mse))


def gaussian_codebook_mse(levels, thresholds) -> float:
    """Distortion of an arbitrary scalar codebook on the unit Gaussian.

    Closed form per cell ``[a, b)`` with reproduction level ``l``:
    ``int (x - l)^2 phi(x) dx = (1 + l^2) P + (a - 2l) phi(a) - (b - 2l) phi(b)``
    with ``P`` the cell mass.
    """
    levels = np.asarray(levels, dtype=np.float64)
    edges = np.concatenate(([-np.inf], np.asarray(thresholds, dtype=np.float64), [np.inf]))
    a, b = edges[:-1], edges[1:]
    prob = ndtr(b) - ndtr(a)
    pa = np.where(np.isfinite(a), _norm_pdf(np.where(np.isfinite(a), a, 0.0)), 0.0)
    pb = np.where(np.isfinite(b), _norm_pdf(np.where(np.isfinite(b), b, 0.0)), 0.0)
    first = pa - pb
    a0 = np.where(np.isfinite(a), a, 0.0)
    b0 = np.where(np.isfinite(b), b, 0.0)
    second = prob + a0 * pa - b0 * pb
    return float(np.sum(second - 2.0 * levels * first + levels**2 * prob))


def _half_cells(levels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cell masses and first moments for positive levels (lowest edge 0).

    Tail probabilities use the complementary form ``ndtr(-x)`` so the far
    cells keep full relative accuracy instead of cancelling.
    """
    inner = 0.5 * (levels[:-1] + levels[1:])
    lo = np.concatenate(([0.0], inner))
    hi = np.concatenate((inner, [np.inf]))
    hi_f = np.where(np.isfinite(hi), hi, 0.0)
    prob = ndtr(-lo) - np.where(np.isfinite(hi), ndtr(-hi_f), 0.0)
    mass = _norm_pdf(lo) - np.where(np.isfinite(hi), _norm_pdf(hi_f), 0.0)
    return inner, prob, mass


def _lloyd_sweep(levels: np.ndarray) -> np.ndarray:
    _, prob, mass = _half_cells(levels)
    return np.where(prob > 0, mass / np.where(prob > 0, prob, 1.0), levels)


@lru_cache(maxsize=None)
def lloyd_max_codebook(bits: int) -> QuantizerCodebook:
    """MSE-optimal scalar quantizer for the zero-mean unit-variance Gaussian.

    Solves the Lloyd fixed point (thresholds at level midpoints, levels at
    conditional cell means) on the positive half by a safeguarded Newton
    iteration, falling back to plain Lloyd sweeps whenever a step would
    break the level ordering.  Converged when one further Lloyd sweep moves
    no level by more than 1e-9; levels are exactly symmetric about zero.
    """
    if not 1 <= bits <= 12:
        raise ValueError(f"bits must lie in [1, 12], got {bits}")
    half = 2**bits // 2
    levels = ndtri(0.5 + (np.arange(half) + 0.5) / (2 * half))
    for _ in range(_LLOYD_MAX_ITER):
        inner, prob, mass = _half_cells(levels)
        residual = levels * prob - mass
        pdf_inner = _norm_pdf(inner)
        pdf_hi = np.concatenate((pdf_inner, [0.0]))
        edge_hi = np.concatenate((inner, [0.0]))
        # Row 0's lower edge is pinned at 0, so it contributes no derivative.
        pdf_lo = np.concatenate(([0.0], pdf_inner))
        edge_lo = np.concatenate(([0.0], inner))
        banded = np.zeros((3, half))
        banded[0, 1:] = 0.5 * pdf_inner * (levels[:-1] - inner)
        banded[1, :] = (prob + 0.5 * pdf_hi * (levels - edge_hi)
                        + 0.5 * pdf_lo * (edge_lo - levels))
        banded[2, :-1] = 0.5 * pdf_inner * (inner - levels[1:])
        try:
            new_levels = levels - scipy.linalg.solve_banded((1, 1), banded, residual)
        except (ValueError, np.linalg.LinAlgError):
            new_levels = _lloyd_sweep(levels)
        if not (new_levels[0] > 0 and np.all(np.diff(new_levels) > 0)):
            new_levels = _lloyd_sweep(levels)
        movement = np.max(np.abs(new_levels - levels))
        levels = new_levels
        if movement < 1e-12:
            break
    if np.max(np.abs(_lloyd_sweep(levels) - levels)) >= _LLOYD_TOL:
        raise NumericalError(f"Lloyd fixed point did not converge for {bits} bits")
    full = np.concatenate((-levels[::-1], levels))
    thresholds = 0.5 * (full[:-1] + full[1:])
    full.setflags(write=False)
    thresholds.setflags(write=False)
    return QuantizerCodebook(bits=bits, levels=full, thresholds=thresholds)


def block_exponent(values, e_min: int = DEFAULT_E_MIN) -> int:
    """Smallest integer ``e`` with ``max(|re|, |im|) <= 2^e``, floored at ``e_min``.

    All-zero blocks take ``e_min``.
    """
    values = np.asarray(values, dtype=np.complex128)
    if values.size == 0:
        raise ValueError("block is empty")
    peak = max(float(np.max(np.abs(values.real))), float(np.max(np.abs(values.imag))))
    return int(_exponents(np.array([peak]), e_min)[0])


def _exponents(peaks: np.ndarray, e_min: int) -> np.ndarray:
    """Vectorized octave ceiling: smallest e with peak <= 2^e, floored at e_min."""
    mant, exp = np.frexp(peaks)
    e = np.where(mant == 0.5, exp - 1, exp)
    e = np.where(peaks == 0.0, e_min, e)
    return np.maximum(e, e_min).astype(np.int64)


@dataclass(eq=False)
class CompressedFrame:
    """Header plus bit-exact payload of one compressed grid."""

    n_rb: int
    n_beam: int
    n12: int
    b_exp: int
    bits_per_beam: np.ndarray
    saturation_count: int
    payload: bytes

    def __post_init__(self):
        self.bits_per_beam = np.asarray(self.bits_per_beam, dtype=np.int64)
        expected = (self.payload_bit_length + 7) // 8
        if len(self.payload) != expected:
            raise FrameParseError(
                f"payload has {len(self.payload)} bytes, expected {expected}",
                byte_offset=min(len(self.payload), expected),
                bit_offset=min(8 * len(self.payload), self.payload_bit_length),
            )

    @property
    def n_sc(self) -> int:
        return self.n_rb * self.n12

    @property
    def payload_bit_length(self) -> int:
        return int(self.b_exp * self.n_beam * self.n_rb
                   + 2 * self.n_sc * int(np.sum(self.bits_per_beam)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompressedFrame):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(_MAGIC, _VERSION, self.n_rb, self.n_beam,
                              self.n12, self.b_exp)
        return (header + bytes(self.bits_per_beam.astype(np.uint8))
                + struct.pack("<I", self.saturation_count) + self.payload)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CompressedFrame":
        if len(blob) < _HEADER.size:
            raise FrameParseError("frame shorter than fixed header", byte_offset=len(blob))
        magic, version, n_rb, n_beam, n12, b_exp = _HEADER.unpack_from(blob, 0)
        if magic != _MAGIC:
            raise FrameParseError(f"bad magic {magic!r}", byte_offset=0)
        if version != _VERSION:
            raise FrameParseError(f"unsupported version {version}", byte_offset=4)
        offset = _HEADER.size
        if len(blob) < offset + n_beam + 4:
            raise FrameParseError("frame truncated inside profile", byte_offset=len(blob))
        bits = np.frombuffer(blob, dtype=np.uint8, count=n_beam, offset=offset).astype(np.int64)
        offset += n_beam
        (saturation,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        return cls(n_rb=n_rb, n_beam=n_beam, n12=n12, b_exp=b_exp,
                   bits_per_beam=bits, saturation_count=saturation,
                   payload=blob[offset:])


def _interleave(column: np.ndarray, n_rb: int, n12: int) -> np.ndarray:
    """(n_sc,) complex -> (n_rb, 2*n12) reals ordered I, Q per subcarrier."""
    blocks = column.reshape(n_rb, n12)
    return np.stack([blocks.real, blocks.imag], axis=-1).reshape(n_rb, 2 * n12)


def _field_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Unsigned integers -> MSB-first bit rows of the given width."""
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def encode(grid, profile, b_exp: int = 4, n12: int = 12) -> CompressedFrame:
    """Compress a beamspace grid into a common-exponent block floating-point frame.

    Exponents above the representable range are clamped to the top of the
    biased range and counted in the frame metadata rather than failing.
    """
    grid = as_grid(grid, "grid")
    n_sc, n_beam = grid.shape
    if not 1 <= b_exp <= 8:
        raise ValueError(f"b_exp must lie in [1, 8], got {b_exp}")
    if not 1 <= n12 <= 255:
        raise ValueError(f"n12 must fit a byte, got {n12}")
    if n_sc % n12 != 0:
        raise ValueError(f"{n_sc} subcarriers do not split into blocks of {n12}")
    n_rb = n_sc // n12
    if n_rb > 0xFFFF or n_beam > 0xFFFF:
        raise ValueError("grid dimensions exceed the 16-bit header fields")
    profile = as_profile(profile, n_beam)
    bias = 1 << (b_exp - 1)
    e_min, e_max = -bias, bias - 1

    saturated = 0
    pieces = []
    for beam in range(n_beam):
        comps = _interleave(grid[:, beam], n_rb, n12)
        peaks = np.max(np.abs(comps), axis=1)
        e_raw = _exponents(peaks, e_min)
        saturated += int(np.count_nonzero(e_raw > e_max))
        e = np.minimum(e_raw, e_max)
        mantissas = np.ldexp(comps, -e[:, None])
        codebook = lloyd_max_codebook(int(profile[beam]))
        indices = codebook.quantize(mantissas)
        pieces.append(np.concatenate(
            [_field_bits(e + bias, b_exp),
             _field_bits(indices, int(profile[beam])).reshape(n_rb, -1)],
            axis=1,
        ).reshape(-1))
    bit_stream = np.concatenate(pieces)
    expected_bits = b_exp * n_beam * n_rb + 2 * n_sc * int(np.sum(profile))
    assert bit_stream.size == expected_bits
    return CompressedFrame(
        n_rb=n_rb, n_beam=n_beam, n12=n12, b_exp=b_exp,
        bits_per_beam=profile, saturation_count=saturated,
        payload=np.packbits(bit_stream).tobytes(),
    )


def decode(frame: CompressedFrame) -> np.ndarray:
    """Reconstruct the beamspace grid from a frame (exact inverse of the packing)."""
    bits = np.unpackbits(np.frombuffer(frame.payload, dtype=np.uint8))
    needed = frame.payload_bit_length
    if bits.size < needed:
        raise FrameParseError("payload ends early", bit_offset=bits.size)
    bias = 1 << (frame.b_exp - 1)
    n_rb, n12 = frame.n_rb, frame.n12
    grid = np.empty((frame.n_sc, frame.n_beam), dtype=np.complex128)
    offset = 0
    for beam in range(frame.n_beam):
        width = int(frame.bits_per_beam[beam])
        block_bits = frame.b_exp + 2 * n12 * width
        rows = bits[offset:offset + n_rb * block_bits].reshape(n_rb, block_bits)
        offset += n_rb * block_bits
        e = rows[:, :frame.b_exp] @ (1 << np.arange(frame.b_exp - 1, -1, -1)) - bias
        indices = rows[:, frame.b_exp:].reshape(n_rb, 2 * n12, width) @ (
            1 << np.arange(width - 1, -1, -1))
        comps = np.ldexp(lloyd_max_codebook(width).dequantize(indices), e[:, None])
        grid[:, beam] = (comps[:, 0::2] + 1j * comps[:, 1::2]).reshape(-1)
    return grid


def grid_relative_error(original, decoded) -> float:
    """Frobenius relative error of the reconstructed grid."""
    original = as_grid(original, "original")
    decoded = as_grid(decoded, "decoded")
    if original.shape != decoded.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {decoded.shape}")
    ref = float(np.linalg.norm(original))
    if ref == 0.0:
        raise ValueError("relative error is undefined for an all-zero grid")
    return float(np.linalg.norm(decoded - original) / ref)


def compression_ratio(profile, *, n_rb: int, n12: int, n_rx: int,
                      b_fp: int, b_exp: int) -> float:
    """Fixed-point antenna bits over compressed beamspace bits.

    ``2 N_SC B_FP N_RX / (B_EXP N_beam N_RB + 2 N_SC sum(B_i))`` with
    ``N_SC = n_rb * n12``.
    """
    profile = np.asarray(profile, dtype=np.int64)
    n_sc = n_rb * n12
    numerator = 2 * n_sc * b_fp * n_rx
    denominator = b_exp * profile.size * n_rb + 2 * n_sc * int(np.sum(profile))
    return numerator / denominator


class BlockFloatingPointCodec(TransformerMixin, BaseEstimator):
    """Codec round trip as a scikit-learn transformer.

    ``transform`` compresses and immediately decompresses a grid, which is
    the distortion an downstream detector sees; ``encode``/``decode`` expose
    the bit-exact frames for the wire.
    """

    def __init__(self, bits=6, b_exp: int = 4, n12: int = 12):
        self.bits = bits
        self.b_exp = b_exp
        self.n12 = n12

    def fit(self, X=None, y=None):
        if X is not None:
            X = as_grid(X, "X")
            self.n_features_in_ = X.shape[1]
            profile = as_profile(self.bits, X.shape[1])
        elif not np.isscalar(self.bits):
            profile = as_profile(self.bits)
        else:
            profile = None
        self.codebooks_ = ({int(b): lloyd_max_codebook(int(b)) for b in profile}
                           if profile is not None else {})
        return self

    def _profile_for(self, X) -> np.ndarray:
        return as_profile(self.bits, X.shape[1])

    def encode(self, X) -> CompressedFrame:
        if not hasattr(self, "codebooks_"):
            raise NotFittedError("BlockFloatingPointCodec is not fitted yet")
        X = as_grid(X, "X")
        return encode(X, self._profile_for(X), b_exp=self.b_exp, n12=self.n12)

    def decode(self, frame: CompressedFrame) -> np.ndarray:
        return decode(frame)

    def transform(self, X) -> np.ndarray:
        return self.decode(self.encode(X))
