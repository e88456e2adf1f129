"""Constant superoperators S^(k)_l and the table that holds them.

S^(k)_l is the k-th moment of the l-contraction self-energy. Entries scale
as g_c^(2l), so each table is computed once at unit coupling and rescaled.

Two conventions are supported.

* ``absorptive=True`` (default) keeps the real part of every diagram. This
  equals half the sum of the diagram and its mirror image. The dispersive
  (energy-shift) parts drop out, so the drive stays resonant with the bare
  splitting.
* ``absorptive=False`` keeps the full complex moments.

Population entries are identical under both.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .bath import BathSpec
from .diagrams import Diagram, nonvanishing_diagrams
from .kernels import RayQuadrature, pairing_moments, single_contraction_moment

log = logging.getLogger(__name__)

DEFAULT_REGULATOR = 1e-3
CUTOFFS = (1, 3, 5, 7)


def table_orders(cutoff: int) -> tuple[tuple[int, int], ...]:
    """(k, l) pairs needed for a generator correct through g_c^(cutoff+1).

    A factor S^(k)_l multiplies k further generators, each at least of order
    g_c^2, so it only matters when l + k <= (cutoff + 1) / 2. Pairs with
    l > 3 are not available and are left out.
    """
    if cutoff not in CUTOFFS:
        raise ValueError(f"cutoff must be one of {CUTOFFS}, got {cutoff}")
    top = (cutoff + 1) // 2
    pairs = [(k, l) for l in range(1, min(top, 3) + 1) for k in range(0, top - l + 1)]
    return tuple(sorted(pairs))


def table_is_complete(cutoff: int) -> bool:
    return (cutoff + 1) // 2 <= 3


def supported(k: int, n_c: int) -> bool:
    return 1 <= n_c <= 3 and k >= 0 and k + n_c <= 4


def coupling_power(g_c: float, n_c: int) -> float:
    # repeated products keep scaling by powers of two exact
    g2 = g_c * g_c
    out = 1.0
    for _ in range(n_c):
        out *= g2
    return out


def _diagram_value(
    diagram: Diagram,
    k: int,
    spec: BathSpec,
    delta_e: float,
    absorptive: bool,
    regulator: float,
    quadrature: RayQuadrature | None,
    cache: dict,
) -> complex:
    if diagram.n_c == 1:
        (contraction,) = diagram.contractions
        return single_contraction_moment(spec, contraction.branch, contraction.phase, k, delta_e, absorptive)
    phases = tuple(c.phase for c in diagram.contractions)
    key = (diagram.pairings, phases)
    mirror = (diagram.pairings, tuple(-d for d in phases))
    if key not in cache:
        if mirror in cache:
            # nodes for opposite phases are complex conjugates of each other
            cache[key] = {b: v.conjugate() for b, v in cache[mirror].items()}
        else:
            cache[key] = pairing_moments(spec, diagram.pairings, phases, k, delta_e, regulator, quadrature)
    value = cache[key][tuple(c.branch for c in diagram.contractions)]
    return complex(value.real) if absorptive else value


def evaluate_diagram_group(
    group: Iterable[Diagram],
    k: int,
    spec: BathSpec,
    delta_e: float = 1.0,
    *,
    absorptive: bool = True,
    regulator: float = DEFAULT_REGULATOR,
    quadrature: RayQuadrature | None = None,
) -> complex:
    """Signed sum of diagram moments (unit coupling) for diagrams sharing entries and branches."""
    group = list(group)
    if not group:
        raise ValueError("empty diagram group")
    first = group[0]
    for d in group:
        if d.vanishes or d.elements != first.elements or d.branches != first.branches:
            raise ValueError("diagram group mixes matrix entries or correlation branches")
    cache: dict = {}
    return sum(
        d.sign * _diagram_value(d, k, spec, delta_e, absorptive, regulator, quadrature, cache) for d in group
    )


@lru_cache(maxsize=256)
def _unit_superoperator(
    k: int,
    n_c: int,
    spec: BathSpec,
    delta_e: float,
    absorptive: bool,
    regulator: float,
    quadrature: RayQuadrature | None,
) -> np.ndarray:
    cache: dict = {}
    total = np.zeros((4, 4), dtype=complex)
    for d in nonvanishing_diagrams(n_c):
        value = _diagram_value(d, k, spec, delta_e, absorptive, regulator, quadrature, cache)
        total += d.sign * value * d.qubit_superoperator
    total.setflags(write=False)
    return total


def compute_S(
    k: int,
    n_c: int,
    g_c: float,
    spec: BathSpec = BathSpec(),
    delta_e: float = 1.0,
    *,
    absorptive: bool = True,
    regulator: float = DEFAULT_REGULATOR,
    quadrature: RayQuadrature | None = None,
) -> np.ndarray:
    """S^(k)_{n_c} at coupling g_c as a 4x4 superoperator."""
    if not supported(k, n_c):
        raise ValueError(f"(k={k}, n_c={n_c}) is outside the supported set k + n_c <= 4, n_c <= 3")
    if not delta_e > 0:
        raise ValueError("delta_e must be positive")
    unit = _unit_superoperator(k, n_c, spec, float(delta_e), absorptive, float(regulator), quadrature)
    return unit * coupling_power(g_c, n_c)


@dataclass(frozen=True)
class STable:
    g_c: float
    bath: BathSpec
    cutoff: int
    entries: Mapping[tuple[int, int], np.ndarray] = field(repr=False)
    delta_e: float = 1.0
    absorptive: bool = True
    regulator: float = DEFAULT_REGULATOR

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        return self.entries[key]

    def __contains__(self, key) -> bool:
        return key in self.entries

    @property
    def orders(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.entries))

    @property
    def complete(self) -> bool:
        return table_is_complete(self.cutoff)

    @staticmethod
    def is_validated(key: tuple[int, int]) -> bool:
        """Three-contraction entries have no independent finite-temperature check."""
        return key[1] <= 2

    def scaled(self, g_c: float) -> "STable":
        if self.g_c == 0:
            raise ValueError("cannot rescale a table built at zero coupling")
        entries = {
            key: _frozen(val * (coupling_power(g_c, key[1]) / coupling_power(self.g_c, key[1])))
            for key, val in self.entries.items()
        }
        return STable(g_c, self.bath, self.cutoff, MappingProxyType(entries), self.delta_e, self.absorptive, self.regulator)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def build_stable(
    g_c: float,
    bath: BathSpec = BathSpec(),
    cutoff: int = 5,
    *,
    delta_e: float = 1.0,
    absorptive: bool = True,
    regulator: float = DEFAULT_REGULATOR,
    quadrature: RayQuadrature | None = None,
) -> STable:
    if g_c < 0 or not math.isfinite(g_c):
        raise ValueError("g_c must be a finite nonnegative number")
    # computed at unit coupling and cached, then rescaled
    if not table_is_complete(cutoff):
        log.warning(
            "cutoff %d needs four-contraction terms, which are not implemented; "
            "the table is incomplete and its results are unvalidated",
            cutoff,
        )
    entries = {
        (k, l): _frozen(
            compute_S(k, l, g_c, bath, delta_e, absorptive=absorptive, regulator=regulator, quadrature=quadrature)
        )
        for k, l in table_orders(cutoff)
    }
    return STable(g_c, bath, cutoff, MappingProxyType(entries), delta_e, absorptive, regulator)
