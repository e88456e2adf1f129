"""Liouville-space conventions for the qubit.

Basis order is (up, down) with up = index 0, and density matrices are
vectorized row-major: (rho_uu, rho_ud, rho_du, rho_dd). In this order the
map rho -> A rho B is the 4x4 matrix kron(A, B.T).
"""

from __future__ import annotations

import numpy as np

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

TRACE_ROW = np.array([1, 0, 0, 1], dtype=complex)

EXCITED = np.array([[1, 0], [0, 0]], dtype=complex)
GROUND = np.array([[0, 0], [0, 1]], dtype=complex)

ELEMENT_LABELS = ("uu", "ud", "du", "dd")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(4)


def unvec(v: np.ndarray) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape(2, 2)


def sandwich(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> left @ rho @ right."""
    return np.kron(left, np.asarray(right).T)


def commutator(h: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> -i [h, rho]."""
    return -1j * (sandwich(h, IDENTITY) - sandwich(IDENTITY, h))


def apply(superop: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return unvec(superop @ vec(rho))


def trace_defect(superop: np.ndarray) -> float:
    """Largest entry of TRACE_ROW @ superop; zero for trace-preserving generators."""
    return float(np.max(np.abs(TRACE_ROW @ superop)))


def adjoint_conjugate(superop: np.ndarray) -> np.ndarray:
    """Superoperator of rho -> (L rho^dagger)^dagger.

    Equal to L itself exactly when L maps Hermitian matrices to Hermitian
    matrices.
    """
    perm = [0, 2, 1, 3]
    return np.conj(superop[np.ix_(perm, perm)])
