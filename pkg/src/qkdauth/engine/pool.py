"""Per-link key pool with one-shot authentication slices.

Every committed final key occupies a range of absolute positions in the
link's generated-key stream. Authentication key bits are handed out by
absolute range and recorded; asking for a range twice is a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..bits import BitString


class KeyReuseError(RuntimeError):
    pass


@dataclass
class KeyPool:
    link_id: str
    stored: BitString = field(default_factory=BitString)
    reserved_next: BitString = field(default_factory=BitString)
    reserved_origin: int = 0
    generated_total: int = 0
    consumed_ranges: list[tuple[int, int]] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)

    def _mark(self, start: int, stop: int) -> None:
        for a, b in self.consumed_ranges:
            if start < b and a < stop:
                raise KeyReuseError(f"bits [{start}, {stop}) overlap consumed [{a}, {b})")
        self.consumed_ranges.append((start, stop))

    def auth_piece(self, index: int, nbits: int) -> BitString:
        """The ``index``-th ``nbits`` piece of the reserved slice, consumed once."""
        start = index * nbits
        if start + nbits > len(self.reserved_next):
            raise KeyReuseError(
                f"reserved slice has {len(self.reserved_next)} bits; piece {index} needs "
                f"[{start}, {start + nbits})")
        self._mark(self.reserved_origin + start, self.reserved_origin + start + nbits)
        return self.reserved_next[start:start + nbits]

    def consume_current(self, offset: int, nbits: int) -> None:
        """Record consumption of bits of the key being committed this round."""
        self._mark(self.generated_total + offset, self.generated_total + offset + nbits)

    def discard_reserved(self) -> int:
        n = len(self.reserved_next)
        self.reserved_next = BitString()
        return n

    def commit(self, final: BitString, reserved: int, skip: int = 0) -> int:
        """Append ``final`` minus its leading ``skip`` (already consumed) bits.

        The first ``reserved`` bits after the skipped prefix become the next
        round's authentication slice; the rest is stored.
        """
        origin = self.generated_total
        self.reserved_next = final[skip:skip + reserved]
        self.reserved_origin = origin + skip
        added = final[skip + reserved:]
        self.stored = self.stored + added
        self.generated_total += len(final)
        return len(added)

    def consumed_bit_indices(self) -> list[int]:
        return [i for a, b in self.consumed_ranges for i in range(a, b)]

    def snapshot(self) -> dict:
        return {
            "link_id": self.link_id,
            "stored_bits": len(self.stored),
            "reserved_bits": len(self.reserved_next),
            "generated_total": self.generated_total,
            "consumed_ranges": [list(r) for r in self.consumed_ranges],
            "rounds": list(self.history),
        }
