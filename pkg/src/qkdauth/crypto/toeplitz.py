"""Toeplitz hashing over GF(2).

The matrix entry convention is ``T[i][j] = seed[i + (in_len - 1) - j]``, so
``output[i]`` is entry ``i + in_len - 1`` of the integer convolution of the
seed with the input, reduced mod 2. Small instances use exact integer
convolution; large ones go through a real FFT whose rounding error stays far
below 0.5 for the key sizes this package handles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bits import BitString

_DIRECT_LIMIT = 1 << 22


@dataclass(frozen=True)
class ToeplitzSeed:
    seed: BitString
    in_len: int
    out_len: int

    def __post_init__(self):
        if self.in_len < 1 or self.out_len < 0:
            raise ValueError("in_len must be >= 1 and out_len >= 0")
        if self.out_len and len(self.seed) != self.in_len + self.out_len - 1:
            raise ValueError(
                f"seed has {len(self.seed)} bits, need in_len + out_len - 1 = "
                f"{self.in_len + self.out_len - 1}"
            )

    @classmethod
    def from_bits(cls, bits: BitString, in_len: int, out_len: int) -> ToeplitzSeed:
        """Take the leading ``in_len + out_len - 1`` bits of ``bits``."""
        need = max(in_len + out_len - 1, 0) if out_len else 0
        if len(bits) < need:
            raise ValueError(f"need {need} random bits, have {len(bits)}")
        return cls(bits[:need], in_len, out_len)

    def matrix(self) -> np.ndarray:
        """Explicit out_len x in_len matrix; only for small instances."""
        i = np.arange(self.out_len)[:, None]
        j = np.arange(self.in_len)[None, :]
        return self.seed.bits[i + self.in_len - 1 - j]


def _gf2_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size * b.size <= _DIRECT_LIMIT:
        return np.convolve(a.astype(np.int64), b.astype(np.int64)) & 1
    n = a.size + b.size - 1
    size = 1 << (n - 1).bit_length()
    fa = np.fft.rfft(a.astype(np.float64), size)
    fb = np.fft.rfft(b.astype(np.float64), size)
    c = np.fft.irfft(fa * fb, size)[:n]
    return np.rint(c).astype(np.int64) & 1


def toeplitz_hash(seed: ToeplitzSeed, data: BitString) -> BitString:
    if len(data) != seed.in_len:
        raise ValueError(f"input has {len(data)} bits, seed expects {seed.in_len}")
    if seed.out_len == 0:
        return BitString()
    conv = _gf2_conv(seed.seed.bits, data.bits)
    start = seed.in_len - 1
    return BitString(conv[start:start + seed.out_len].astype(np.uint8))
