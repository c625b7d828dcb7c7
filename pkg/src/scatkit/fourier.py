"""Frequency-domain primitives: 2-D DFT, periodization, products, modulus.

Conventions: the forward transform is unnormalized and the inverse carries
the 1/M^2 factor, so ``idft2(periodize(dft2(x), k))`` equals the spatial
subsampling ``x[2^k p]`` exactly.

All public operations are value-in/value-out.  The cascade engine does its
in-place work through an :class:`Arena`, which also keeps the live/peak
complex-slot accounting auditable.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as _fft

from .errors import InvalidInputError


def _check_square_pow2(g: np.ndarray) -> int:
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidInputError(f"expected a square grid, got shape {g.shape}")
    m = g.shape[0]
    if m < 1 or m & (m - 1):
        raise InvalidInputError(f"grid size {m} is not a power of two")
    return m


def dft2(g: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT of a square power-of-two grid."""
    _check_square_pow2(g)
    return _fft.fft2(g)


def idft2(s: np.ndarray) -> np.ndarray:
    """Inverse 2-D DFT scaled by 1/M^2."""
    _check_square_pow2(s)
    return _fft.ifft2(s)


def periodize(s: np.ndarray, k: int) -> np.ndarray:
    """Fold a spectrum onto an (M/2^k)^2 grid, averaging the 2^2k aliases.

    Frequency-domain counterpart of subsampling by 2^k in space.
    """
    m = _check_square_pow2(s)
    if k < 0 or (m >> k) << k != m:
        raise InvalidInputError(f"2^{k} does not divide grid size {m}")
    if k == 0:
        return s.copy()
    t = m >> k
    return s.reshape(2**k, t, 2**k, t).mean(axis=(0, 2))


def pointwise_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product of two equally sized spectra."""
    if a.shape != b.shape:
        raise InvalidInputError(f"size mismatch {a.shape} vs {b.shape}")
    return a * b


def modulus(g: np.ndarray) -> np.ndarray:
    """Complex modulus per element, returned with zero imaginary part."""
    return np.abs(g).astype(np.result_type(g.dtype, np.complex64))


def reflect_spectrum(s: np.ndarray) -> np.ndarray:
    """Return the spectrum evaluated at -omega (index map m -> -m mod M)."""
    out = s[::-1, ::-1]
    return np.roll(np.roll(out, 1, axis=0), 1, axis=1)


def fft2_inplace(buf: np.ndarray) -> np.ndarray:
    """Forward transform of the trailing two axes, written back into
    ``buf`` (library scratch aside).  Leading axes are transform lanes;
    per-lane results are bit-identical to individual 2-D calls."""
    buf[...] = _fft.fft2(buf, axes=(-2, -1))
    return buf


def ifft2_inplace(buf: np.ndarray) -> np.ndarray:
    buf[...] = _fft.ifft2(buf, axes=(-2, -1))
    return buf


def _slots(shape, dtype) -> float:
    n = 1
    for s in shape:
        n *= s
    # one slot is one complex number; real scratch counts half
    return float(n) if np.issubdtype(np.dtype(dtype), np.complexfloating) else 0.5 * n


class Arena:
    """Per-worker scratch allocator with complex-slot accounting.

    Freed buffers are recycled by (shape, dtype) so steady-state use touches
    a fixed set of allocations.  ``peak_slots`` records the worst-case live
    count, which is what the memory bound of the cascade asserts.  FFT
    library scratch is excluded from the count, mirroring how transform
    workspace is conventionally excluded from such budgets.

    Never share one arena between concurrently executing transforms.
    """

    def __init__(self):
        self._free: dict[tuple, list[np.ndarray]] = {}
        self.live_slots = 0.0
        self.peak_slots = 0.0

    def acquire(self, shape, dtype) -> np.ndarray:
        key = (tuple(shape), np.dtype(dtype).str)
        pool = self._free.get(key)
        buf = pool.pop() if pool else np.empty(shape, dtype)
        self.live_slots += _slots(shape, dtype)
        self.peak_slots = max(self.peak_slots, self.live_slots)
        return buf

    def release(self, buf: np.ndarray) -> None:
        key = (buf.shape, buf.dtype.str)
        self._free.setdefault(key, []).append(buf)
        self.live_slots -= _slots(buf.shape, buf.dtype)

    def reset_peak(self) -> None:
        self.peak_slots = self.live_slots
