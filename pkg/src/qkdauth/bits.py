"""Immutable bit strings backed by numpy uint8 arrays."""

from __future__ import annotations

import numpy as np


class BitString:
    """An ordered, immutable sequence of bits.

    Every key in the pipeline (raw, sifted, corrected, final) and every digest
    is carried as a ``BitString``. Equality is bitwise and includes length.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits=()):
        arr = np.asarray(bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ValueError("bit values must be 0 or 1")
        arr = arr.copy()
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def zeros(cls, n: int) -> BitString:
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> BitString:
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))

    @classmethod
    def from_str(cls, s: str) -> BitString:
        return cls([int(c) for c in s])

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> BitString:
        arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if length is not None:
            if length > arr.size:
                raise ValueError(f"requested {length} bits from {arr.size}")
            arr = arr[:length]
        return cls(arr)

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def length(self) -> int:
        return int(self._bits.size)

    def __len__(self) -> int:
        return int(self._bits.size)

    def __iter__(self):
        return (int(b) for b in self._bits)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return BitString(self._bits[idx])
        return int(self._bits[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._bits.size == other._bits.size and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash((self._bits.size, self._bits.tobytes()))

    def __xor__(self, other: BitString) -> BitString:
        if len(self) != len(other):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")
        return BitString(self._bits ^ other._bits)

    def __add__(self, other: BitString) -> BitString:
        return BitString(np.concatenate([self._bits, other._bits]))

    def __repr__(self) -> str:
        if len(self) <= 64:
            return f"BitString('{self.to_str()}')"
        return f"BitString(<{len(self)} bits>)"

    def to_str(self) -> str:
        return "".join("1" if b else "0" for b in self._bits)

    def to_bytes(self) -> bytes:
        """Pack MSB-first; the final byte is zero padded."""
        return np.packbits(self._bits).tobytes()

    def hex(self) -> str:
        return self.to_bytes().hex()

    def count(self) -> int:
        return int(self._bits.sum())
