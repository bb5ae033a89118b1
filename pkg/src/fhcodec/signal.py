"""Transmit symbol generation, uplink propagation with AWGN, and EVM."""

import numpy as np

from .channel import ChannelRealization
from .rng import TAG_NOISE, TAG_SYMBOLS, stream
from .validation import as_grid

QAM_ORDERS = (4, 16, 64, 256)


def _axis_levels(order: int) -> tuple[np.ndarray, float]:
    """Per-axis PAM levels in Gray order and the unit-energy scale factor."""
    side = int(round(np.sqrt(order)))
    # Gray index g -> binary index b -> level (side-1) - 2*b, so the all-zero
    # bit pattern maps to the positive corner and adjacent levels differ in
    # exactly one bit.
    scale = 1.0 / np.sqrt(2.0 * (order - 1) / 3.0)
    return np.arange(side - 1, -side, -2, dtype=np.float64), scale


def _gray_to_binary(gray: np.ndarray, width: int) -> np.ndarray:
    binary = gray.copy()
    shift = 1
    while shift < width:
        binary ^= binary >> shift
        shift *= 2
    return binary


def _binary_to_gray(binary: np.ndarray) -> np.ndarray:
    return binary ^ (binary >> 1)


def qam_modulate(bits, order: int) -> np.ndarray:
    """Map a bit sequence onto Gray-coded square QAM with unit average energy.

    Per symbol the first half of the bits selects the I level, the second
    half the Q level; the all-zero pattern lands on the positive corner.
    """
    if order not in QAM_ORDERS:
        raise ValueError(f"unsupported modulation order {order}")
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    k = int(np.log2(order))
    if bits.size % k != 0:
        raise ValueError(f"bit count {bits.size} is not a multiple of {k}")
    half = k // 2
    grouped = bits.reshape(-1, k)
    weights = 1 << np.arange(half - 1, -1, -1)
    gray_i = grouped[:, :half] @ weights
    gray_q = grouped[:, half:] @ weights
    levels, scale = _axis_levels(order)
    b_i = _gray_to_binary(gray_i.astype(np.int64), half)
    b_q = _gray_to_binary(gray_q.astype(np.int64), half)
    return scale * (levels[b_i] + 1j * levels[b_q])


def qam_demodulate(symbols, order: int) -> np.ndarray:
    """Hard-decision inverse of :func:`qam_modulate`."""
    if order not in QAM_ORDERS:
        raise ValueError(f"unsupported modulation order {order}")
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    k = int(np.log2(order))
    half = k // 2
    levels, scale = _axis_levels(order)
    b_i = np.argmin(np.abs(symbols.real[:, None] / scale - levels[None, :]), axis=1)
    b_q = np.argmin(np.abs(symbols.imag[:, None] / scale - levels[None, :]), axis=1)
    gray = np.concatenate(
        [
            _binary_to_gray(b_i)[:, None] >> np.arange(half - 1, -1, -1) & 1,
            _binary_to_gray(b_q)[:, None] >> np.arange(half - 1, -1, -1) & 1,
        ],
        axis=1,
    )
    return gray.reshape(-1).astype(np.uint8)


def random_symbol_grid(n_sc: int, n_streams: int, order: int, seed: int) -> np.ndarray:
    """Random QAM resource grid, deterministic in ``seed``."""
    rng = stream(seed, TAG_SYMBOLS)
    k = int(np.log2(order))
    bits = rng.integers(0, 2, size=n_sc * n_streams * k, dtype=np.uint8)
    return qam_modulate(bits, order).reshape(n_sc, n_streams)


def transmit(x, ch: ChannelRealization, snr_db: float | None, seed: int = 0
             ) -> tuple[np.ndarray, float]:
    """Propagate a transmit grid through the channel and add receiver noise.

    The per-antenna noise variance is set against the average received
    signal power per antenna: ``sigma2 = mean(|HX|^2) / 10^(snr_db/10)``.
    ``snr_db=None`` (or ``inf``) disables noise.  Returns the antenna-domain
    grid and the ``sigma2`` actually used.
    """
    x = as_grid(x, "x")
    n_sc, n_streams = x.shape
    if n_streams != ch.n_layers:
        raise ValueError(f"grid has {n_streams} streams, channel has {ch.n_layers} layers")
    if n_sc % ch.n_rb != 0:
        raise ValueError(f"{n_sc} subcarriers do not split into {ch.n_rb} resource blocks")
    n12 = n_sc // ch.n_rb
    x_blocks = x.reshape(ch.n_rb, n12, n_streams)
    y = np.einsum("rmn,rsn->rsm", ch.matrices, x_blocks).reshape(n_sc, ch.m_antennas)
    if snr_db is None or np.isinf(snr_db):
        return y, 0.0
    signal_power = float(np.mean(np.abs(y) ** 2))
    sigma2 = signal_power / (10.0 ** (float(snr_db) / 10.0))
    rng = stream(seed, TAG_NOISE)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + np.sqrt(sigma2 / 2.0) * noise, sigma2


def evm_percent(x_hat, x_ref) -> float:
    """Aggregate RMS error vector magnitude in percent.

    ``100 * sqrt(sum|x_hat - x_ref|^2 / sum|x_ref|^2)`` over all entries.
    """
    x_hat = as_grid(x_hat, "x_hat")
    x_ref = as_grid(x_ref, "x_ref")
    if x_hat.shape != x_ref.shape:
        raise ValueError(f"shape mismatch: {x_hat.shape} vs {x_ref.shape}")
    ref_energy = float(np.sum(np.abs(x_ref) ** 2))
    if ref_energy == 0.0:
        raise ValueError("EVM is undefined for an all-zero reference")
    return 100.0 * float(np.sqrt(np.sum(np.abs(x_hat - x_ref) ** 2) / ref_energy))
