"""Cascade reconciliation with exact parity-disclosure accounting.

Alice's key is the reference; Bob's copy is corrected in place. Every parity
Alice announces (a full block the first time it is examined, and each half
during bisection) adds one bit to the leak count. Sub-block parities are not
cached, so re-examined blocks pay again; the count is what actually crossed
the channel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

MIN_BLOCK = 4
QBER_FLOOR = 0.005


@dataclass
class CascadeResult:
    corrected: np.ndarray
    leak_bits: int
    corrections: int
    block_sizes: list[int]


def first_block_size(qber: float, n: int) -> int:
    k1 = int(np.ceil(0.73 / max(qber, QBER_FLOOR)))
    return max(MIN_BLOCK, min(k1, max(n, 1)))


def block_schedule(qber: float, n: int, passes: int) -> list[int]:
    k1 = first_block_size(qber, n)
    return [min(k1 << p, max(n, 1)) for p in range(passes)]


def cascade(alice: np.ndarray, bob: np.ndarray, qber: float, rng: np.random.Generator,
            passes: int = 4) -> CascadeResult:
    alice = np.asarray(alice, dtype=np.uint8)
    bob = np.array(bob, dtype=np.uint8)
    n = alice.size
    if bob.size != n:
        raise ValueError("keys must have equal length")
    sizes = block_schedule(qber, n, passes)
    if n == 0:
        return CascadeResult(bob, 0, 0, sizes)

    leak = 0
    corrections = 0
    blocks: list[list[np.ndarray]] = []
    block_of: list[np.ndarray] = []
    disclosed: set[tuple[int, int]] = set()

    def odd(q: int, bid: int) -> bool:
        idx = blocks[q][bid]
        return bool((alice[idx].sum() ^ bob[idx].sum()) & 1)

    def bisect(idx: np.ndarray) -> int:
        nonlocal leak
        while idx.size > 1:
            half = idx[: idx.size // 2]
            leak += 1
            if (alice[half].sum() ^ bob[half].sum()) & 1:
                idx = half
            else:
                idx = idx[idx.size // 2:]
        return int(idx[0])

    def fix(q: int, bid: int, upto: int) -> None:
        nonlocal leak, corrections
        queue = deque([(q, bid)])
        while queue:
            q, bid = queue.popleft()
            if (q, bid) not in disclosed:
                disclosed.add((q, bid))
                leak += 1
            if not odd(q, bid):
                continue
            e = bisect(blocks[q][bid])
            bob[e] ^= 1
            corrections += 1
            for r in range(upto + 1):
                if r != q:
                    queue.append((r, int(block_of[r][e])))

    for p, size in enumerate(sizes):
        order = np.arange(n) if p == 0 else rng.permutation(n)
        blocks.append([order[i:i + size] for i in range(0, n, size)])
        where = np.empty(n, dtype=np.int64)
        where[order] = np.arange(n) // size
        block_of.append(where)
        for bid in range(len(blocks[p])):
            fix(p, bid, p)
    return CascadeResult(bob, leak, corrections, sizes)
