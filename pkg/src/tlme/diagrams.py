"""Irreducible Keldysh self-energy diagrams for the sigma_+ b + h.c. coupling.

A diagram is a set of 2 n_c time-ordered vertices, each on the upper (ket)
or lower (bra) contour and carrying sigma_+ or sigma_-, joined pairwise by
bath contractions. Each contraction is labelled by

* ``branch``: PLUS when the bath emission correlator C^+ appears,
  MINUS for C^-;
* ``phase``: the sign d in its time dependence
  ``int f^branch(w) exp(i d (dE - w) s) dw`` with s the time it spans.

The qubit part is ``sign * kron(K, B.T)`` with K the upper operators in
reverse time order and B the lower operators in time order.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .bath import MINUS, PLUS
from .superop import SIGMA_MINUS, SIGMA_PLUS, sandwich

MAX_CONTRACTIONS = 3


class Contour(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


class Op(enum.Enum):
    RAISE = "raise"
    LOWER = "lower"

    @property
    def matrix(self) -> np.ndarray:
        return SIGMA_PLUS if self is Op.RAISE else SIGMA_MINUS


@dataclass(frozen=True)
class Vertex:
    position: int
    contour: Contour
    op: Op


@dataclass(frozen=True)
class Contraction:
    left: int
    right: int
    branch: str
    phase: int


def _spans_all_gaps(pairs, n_vertices: int) -> bool:
    return all(any(a <= j < b for a, b in pairs) for j in range(1, n_vertices))


@lru_cache(maxsize=None)
def irreducible_pairings(n_c: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Perfect matchings of positions 1..2n_c that cannot be cut between vertices."""

    def matchings(points):
        if not points:
            yield ()
            return
        first, rest = points[0], points[1:]
        for i, other in enumerate(rest):
            for tail in matchings(rest[:i] + rest[i + 1 :]):
                yield ((first, other),) + tail

    found = [m for m in matchings(tuple(range(1, 2 * n_c + 1))) if _spans_all_gaps(m, 2 * n_c)]
    return tuple(sorted(found))


@dataclass(frozen=True)
class Diagram:
    vertices: tuple[Vertex, ...]
    pairings: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = len(self.vertices)
        if n == 0 or n % 2 or len(self.pairings) * 2 != n:
            raise ValueError("a diagram needs 2 n_c vertices and n_c pairings")
        if [v.position for v in self.vertices] != list(range(1, n + 1)):
            raise ValueError("vertex positions must be 1..2n_c in order")
        used = sorted(p for pair in self.pairings for p in pair)
        if used != list(range(1, n + 1)):
            raise ValueError("every vertex must belong to exactly one pairing")
        for a, b in self.pairings:
            if self.vertex(a).op is self.vertex(b).op:
                raise ValueError(f"pairing {(a, b)} must join a raising and a lowering vertex")

    @property
    def n_c(self) -> int:
        return len(self.pairings)

    def vertex(self, position: int) -> Vertex:
        return self.vertices[position - 1]

    def is_irreducible(self) -> bool:
        return _spans_all_gaps(self.pairings, len(self.vertices))

    @property
    def num_lower(self) -> int:
        return sum(v.contour is Contour.LOWER for v in self.vertices)

    @property
    def sign(self) -> int:
        return (-1) ** (self.n_c + self.num_lower)

    @cached_property
    def qubit_superoperator(self) -> np.ndarray:
        ket = np.eye(2, dtype=complex)
        bra = np.eye(2, dtype=complex)
        for v in self.vertices:
            if v.contour is Contour.UPPER:
                ket = v.op.matrix @ ket
            else:
                bra = bra @ v.op.matrix
        return sandwich(ket, bra)

    @property
    def vanishes(self) -> bool:
        return not np.any(self.qubit_superoperator)

    @property
    def elements(self) -> tuple[tuple[int, int], ...]:
        """(output, input) indices of the nonzero superoperator entries."""
        return tuple((int(a), int(b)) for a, b in np.argwhere(self.qubit_superoperator != 0))

    def _contour_key(self, position: int):
        # order along the Keldysh contour: smaller key sits further left in the product
        if self.vertex(position).contour is Contour.LOWER:
            return (0, position)
        return (1, -position)

    @cached_property
    def contractions(self) -> tuple[Contraction, ...]:
        out = []
        for a, b in self.pairings:
            left, right = (a, b) if self._contour_key(a) < self._contour_key(b) else (b, a)
            later = 1 if left > right else -1
            if self.vertex(left).op is Op.RAISE:
                out.append(Contraction(left, right, PLUS, later))
            else:
                out.append(Contraction(left, right, MINUS, -later))
        return tuple(out)

    @property
    def labels(self) -> tuple[tuple[str, int], ...]:
        return tuple((c.branch, c.phase) for c in self.contractions)

    @property
    def branches(self) -> tuple[str, ...]:
        return tuple(sorted(c.branch for c in self.contractions))

    def mirrored(self) -> "Diagram":
        """Mirror image across the time axis: contours swapped, each operator replaced by its adjoint.

        Its superoperator is the Hermitian conjugate map of this one and its
        contractions have equal branches and opposite phases, so its value is
        the complex conjugate.
        """
        flip = {Contour.UPPER: Contour.LOWER, Contour.LOWER: Contour.UPPER}
        dag = {Op.RAISE: Op.LOWER, Op.LOWER: Op.RAISE}
        verts = tuple(Vertex(v.position, flip[v.contour], dag[v.op]) for v in self.vertices)
        return Diagram(verts, self.pairings)


def _check_order(n_c: int):
    if not (1 <= n_c <= MAX_CONTRACTIONS):
        raise ValueError(f"contraction order must lie in 1..{MAX_CONTRACTIONS}, got {n_c}")


@lru_cache(maxsize=None)
def enumerate_diagrams(n_c: int) -> tuple[Diagram, ...]:
    """Every irreducible diagram with n_c contractions, in a fixed order."""
    _check_order(n_c)
    out = []
    for pairs in irreducible_pairings(n_c):
        for orientation in itertools.product((Op.RAISE, Op.LOWER), repeat=n_c):
            ops = {}
            for (a, b), first in zip(pairs, orientation):
                ops[a] = first
                ops[b] = Op.LOWER if first is Op.RAISE else Op.RAISE
            for contours in itertools.product((Contour.UPPER, Contour.LOWER), repeat=2 * n_c):
                verts = tuple(Vertex(p, contours[p - 1], ops[p]) for p in range(1, 2 * n_c + 1))
                out.append(Diagram(verts, pairs))
    return tuple(out)


def contour_shapes(n_c: int) -> tuple[tuple[tuple[int, int], ...], tuple[Contour, ...]]:
    """Distinct (pairing, contour assignment) skeletons, ignoring operator labels."""
    _check_order(n_c)
    shapes = {(d.pairings, tuple(v.contour for v in d.vertices)) for d in enumerate_diagrams(n_c)}
    return tuple(sorted(shapes, key=lambda s: (s[0], [c.value for c in s[1]])))


@lru_cache(maxsize=None)
def nonvanishing_diagrams(n_c: int) -> tuple[Diagram, ...]:
    return tuple(d for d in enumerate_diagrams(n_c) if not d.vanishes)


def group_diagrams(n_c: int) -> dict[tuple, list[Diagram]]:
    """Nonvanishing diagrams keyed by (superoperator entries, branches)."""
    groups: dict[tuple, list[Diagram]] = {}
    for d in nonvanishing_diagrams(n_c):
        groups.setdefault((d.elements, d.branches), []).append(d)
    return groups
