"""Baseband OFDM primitives: unitary transforms, cyclic prefix, 4-QAM, circular convolution.

Signals are carried as 1-D ``complex128`` numpy arrays throughout the package.
"""

import numpy as np

__all__ = [
    "as_complex_vector",
    "dft",
    "idft",
    "add_cyclic_prefix",
    "remove_cyclic_prefix",
    "qam4_modulate",
    "qam4_demodulate",
    "circular_convolve",
    "QAM4_POINTS",
]

_SQRT_HALF = 1.0 / np.sqrt(2.0)

# Gray map indexed by the integer value of the bit pair (b0 b1): 00, 01, 10, 11.
QAM4_POINTS = np.array(
    [1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j], dtype=np.complex128
) * _SQRT_HALF

# Taps at or below this support length are convolved by direct summation.
_DIRECT_CONV_MAX_TAPS = 64


def as_complex_vector(x, name="x"):
    """Coerce ``x`` to a non-empty, finite 1-D complex array."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf samples")
    return arr


def dft(x):
    """Unitary forward DFT (``1/sqrt(N)`` scaling)."""
    return np.fft.fft(as_complex_vector(x), norm="ortho")


def idft(x):
    """Unitary inverse DFT, the exact inverse of :func:`dft`."""
    return np.fft.ifft(as_complex_vector(x), norm="ortho")


def add_cyclic_prefix(x, L_cp):
    x = as_complex_vector(x)
    if not 0 < L_cp <= x.size:
        raise ValueError(f"L_cp must satisfy 0 < L_cp <= {x.size}, got {L_cp}")
    return np.concatenate([x[-L_cp:], x])


def remove_cyclic_prefix(x, N, L_cp):
    x = as_complex_vector(x)
    if x.size != N + L_cp:
        raise ValueError(
            f"expected {N} + {L_cp} = {N + L_cp} samples, got {x.size}"
        )
    return x[L_cp:].copy()


def qam4_modulate(bits):
    """Map bit pairs onto unit-power Gray-coded 4-QAM symbols.

    ``00 -> (1+j)/sqrt2``, ``01 -> (-1+j)/sqrt2``, ``11 -> (-1-j)/sqrt2``,
    ``10 -> (1-j)/sqrt2``.
    """
    b = np.asarray(bits)
    if b.ndim != 1:
        raise ValueError("bits must be one-dimensional")
    if b.size % 2:
        raise ValueError(f"4-QAM needs an even number of bits, got {b.size}")
    if not np.all((b == 0) | (b == 1)):
        raise ValueError("bits must be 0 or 1")
    b = b.astype(np.intp)
    return QAM4_POINTS[2 * b[0::2] + b[1::2]]


def qam4_demodulate(x):
    """Hard minimum-distance decision; returns a bit array of length ``2*len(x)``."""
    x = np.asarray(x, dtype=np.complex128)
    bits = np.empty(2 * x.size, dtype=np.int8)
    # First bit selects the real-axis sign, second the imaginary-axis sign.
    bits[0::2] = x.imag < 0
    bits[1::2] = x.real < 0
    return bits


def circular_convolve(h, x):
    """N-point circular convolution ``y[n] = sum_p h[p] x[(n - p) mod N]``.

    ``h`` is zero-padded to ``len(x)``. Short responses use direct summation
    over their non-zero taps, long ones the transform-domain product.
    """
    h = as_complex_vector(h, "h")
    x = as_complex_vector(x)
    if h.size > x.size:
        raise ValueError(f"h (length {h.size}) is longer than x (length {x.size})")
    if h.size <= _DIRECT_CONV_MAX_TAPS:
        return _circular_convolve_direct(h, x)
    return _circular_convolve_fft(h, x)


def _circular_convolve_direct(h, x):
    y = np.zeros_like(x)
    for p in np.flatnonzero(h):
        y += h[p] * np.roll(x, p)
    return y


def _circular_convolve_fft(h, x):
    hp = np.zeros_like(x)
    hp[: h.size] = h
    return np.fft.ifft(np.fft.fft(hp) * np.fft.fft(x))
