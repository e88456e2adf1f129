"""Time-local generators built from the S-table.

The antiderivative hierarchy closes as G = L_D + sum S^(k)_l G^k for a
piecewise-constant drive. It is solved by fixed-point iteration.
:func:`explicit_sum_generator` instead expands the same series term by term
from the ballot sequences of :mod:`tlme.markov_terms`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .markov_terms import enumerate_terms
from .stable import CUTOFFS, STable, table_orders
from .superop import SIGMA_X, commutator

BORN_MARKOV = "bm"
BORN_ONLY = "born"
FULL = "full"
MARKOV_ONLY = "markov"


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Scheme:
    """Which (k, l) blocks enter the generator.

    * ``bm``: S^(0)_1 only.
    * ``born``: S^(0..K)_1, one contraction with K antiderivative orders.
    * ``full``: every block needed through order g_c^(cutoff+1).
    * ``markov``: the k = 0 blocks of ``full`` only.
    """

    kind: str
    markov_order: int = 2
    cutoff: int = 5

    def __post_init__(self):
        if self.kind not in (BORN_MARKOV, BORN_ONLY, FULL, MARKOV_ONLY):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if not 0 <= self.markov_order <= 2:
            raise ValueError("markov_order must lie in 0..2")
        if self.cutoff not in CUTOFFS:
            raise ValueError(f"cutoff must be one of {CUTOFFS}")

    @classmethod
    def born_markov(cls) -> "Scheme":
        return cls(BORN_MARKOV)

    @classmethod
    def born_only(cls, markov_order: int = 2) -> "Scheme":
        return cls(BORN_ONLY, markov_order=markov_order)

    @classmethod
    def full(cls, cutoff: int = 5) -> "Scheme":
        return cls(FULL, cutoff=cutoff)

    @classmethod
    def markov_only(cls, cutoff: int = 5) -> "Scheme":
        return cls(MARKOV_ONLY, cutoff=cutoff)

    @property
    def orders(self) -> tuple[tuple[int, int], ...]:
        if self.kind == BORN_MARKOV:
            return ((0, 1),)
        if self.kind == BORN_ONLY:
            return tuple((k, 1) for k in range(self.markov_order + 1))
        pairs = table_orders(self.cutoff)
        if self.kind == MARKOV_ONLY:
            return tuple(p for p in pairs if p[0] == 0)
        return pairs

    @property
    def label(self) -> str:
        return {BORN_MARKOV: "BM", BORN_ONLY: "Born", FULL: "NBM", MARKOV_ONLY: "Markov"}[self.kind]


@dataclass(frozen=True)
class Generator:
    matrix: np.ndarray = field(repr=False)
    scheme: Scheme
    drive_amplitude: float = 0.0
    iterations: int = 0
    residual: float = 0.0


def drive_liouvillian(g_d: float, active: bool = True) -> np.ndarray:
    """Superoperator of rho -> -i [g_D sigma_x, rho], or zero when inactive."""
    if g_d < 0:
        raise ValueError("drive amplitude must be nonnegative")
    if not active:
        return np.zeros((4, 4), dtype=complex)
    return commutator(g_d * SIGMA_X)


def _check_table(table: STable, orders):
    missing = [p for p in orders if p not in table]
    if missing:
        raise ValueError(f"table lacks blocks {missing} required by the scheme")


def assemble_generator(
    table: STable,
    scheme: Scheme,
    drive: np.ndarray | None = None,
    drive_amplitude: float = 0.0,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> Generator:
    """Fixed point of G = L_D + sum_{(k,l)} S^(k)_l G^k."""
    orders = scheme.orders
    _check_table(table, orders)
    base = np.zeros((4, 4), dtype=complex) if drive is None else np.asarray(drive, dtype=complex)
    blocks = [(k, table[(k, l)]) for k, l in orders]

    G = base + sum(S for k, S in blocks if k == 0)
    residual = np.inf
    for it in range(1, max_iter + 1):
        powers = [np.eye(4, dtype=complex)]
        new = base.copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for k, S in blocks:
                while len(powers) <= k:
                    powers.append(powers[-1] @ G)
                new += S @ powers[k]
        if not np.all(np.isfinite(new)):
            raise ConvergenceError("generator iteration diverged", float("inf"))
        residual = float(np.max(np.abs(new - G)))
        G = new
        if residual < tol:
            G.setflags(write=False)
            return Generator(G, scheme, drive_amplitude, it, residual)
    raise ConvergenceError(f"no fixed point after {max_iter} iterations", residual)


@dataclass(frozen=True)
class ExplicitSum:
    matrix: np.ndarray = field(repr=False)
    terms: tuple[tuple[tuple[int, int], ...], ...]
    complete: bool


def explicit_sum_generator(table: STable, cutoff: int) -> ExplicitSum:
    """Sum of products S^(f_n)_{l_n} ... S^(f_1)_{l_1} with sum_i (2 l_i - 1 + f_i) <= cutoff.

    Each term is a list of (f, l) factors, left to right. ``complete`` is
    False when some required block is missing from the table.
    """
    if cutoff not in CUTOFFS:
        raise ValueError(f"cutoff must be one of {CUTOFFS}")
    budget = (cutoff + 1) // 2  # sum of l_i
    total = np.zeros((4, 4), dtype=complex)
    terms = []
    complete = True
    for n in range(1, budget + 1):
        for seq in enumerate_terms(n):
            for ls in itertools.product(range(1, budget + 1), repeat=n):
                if sum(ls) > budget:
                    continue
                factors = tuple(zip(seq, ls))
                if any(f not in table for f in factors):
                    complete = False
                    continue
                prod = np.eye(4, dtype=complex)
                for f in factors:
                    prod = prod @ table[f]
                total += prod
                terms.append(factors)
    return ExplicitSum(total, tuple(terms), complete)
