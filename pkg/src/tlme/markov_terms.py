"""Product terms A_n of the antiderivative (Markov) expansion.

A term is a sequence ``(f_n, ..., f_1)`` of antiderivative orders, read as
the operator product S^(f_n) ... S^(f_1) acting on rho. A sequence is valid
when its entries sum to ``n - 1`` and, counting positions p = 1, 2, ... from
the right, every suffix of length p sums to less than p.
"""

from __future__ import annotations

import math
from typing import Sequence

TermSequence = tuple[int, ...]

MAX_LENGTH = 12


def is_valid(seq: Sequence[int]) -> bool:
    seq = tuple(seq)
    if not seq:
        return False
    if any(int(f) != f or f < 0 for f in seq):
        raise ValueError(f"entries must be nonnegative integers: {seq}")
    if sum(seq) != len(seq) - 1:
        return False
    partial = 0
    for p, f in enumerate(reversed(seq), start=1):
        partial += f
        if partial >= p:
            return False
    return True


def enumerate_terms(n: int) -> list[TermSequence]:
    """All valid sequences of length n, in descending lexicographic order."""
    if not (1 <= n <= MAX_LENGTH):
        raise ValueError(f"n must lie in 1..{MAX_LENGTH}, got {n}")
    total = n - 1
    found: list[TermSequence] = []

    # built right to left; suffix holds entries for positions 1..p
    def extend(suffix: list[int], partial: int):
        p = len(suffix) + 1
        if p == n:
            last = total - partial
            if partial + last < p:
                found.append((last, *reversed(suffix)))
            return
        for f in range(0, p - partial):
            suffix.append(f)
            extend(suffix, partial + f)
            suffix.pop()

    extend([], 0)
    found.sort(reverse=True)
    return found


def count_terms(n: int) -> int:
    """Number of valid sequences of length n, the Catalan number C_{n-1}."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return math.comb(2 * (n - 1), n - 1) // n


def format_term(seq: Sequence[int]) -> str:
    return " ".join(f"S^({f})" for f in seq)
