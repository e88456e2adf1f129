"""Time-domain quadrature of one-contraction kernels.

This path never touches the frequency-domain rules. It builds
``W(s) = exp(i d dE s) C^branch(+-s)`` from the correlation functions and
integrates its moments directly in time:

    M_k(t) = int_t^inf (t - s)^k / k! W(s) ds

``M_k(0)`` is the k-th antiderivative moment of the kernel. Past a horizon T
the correlators are replaced by their large-time expansion, built from the
Taylor coefficients of f at w = 0. Each power-law times oscillation tail is
then summed in closed form with incomplete gamma functions.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import mpmath
import numpy as np

from .bath import PLUS, BathSpec, QuadratureError, correlation_time_domain, gauss_legendre, spectrum_taylor_coefficients
from .diagrams import nonvanishing_diagrams
from .stable import coupling_power

TAIL_TERMS = 14


def time_edges(lowers: Sequence[float], horizon: float, width: float = 0.5) -> np.ndarray:
    """Panel edges on [0, horizon]: geometric near 0, uniform after, containing every lower limit."""
    graded = [0.0] + [10.0**p for p in range(-10, 0)]
    uniform = np.arange(1.0, horizon + width / 2, width)
    edges = np.concatenate([graded, [0.5], uniform, np.asarray(lowers, dtype=float), [horizon]])
    edges = np.unique(edges[(edges >= 0) & (edges <= horizon)])
    return edges


def antiderivative_moments(
    kernel: Callable[[np.ndarray], np.ndarray],
    k: int,
    lowers: Sequence[float],
    horizon: float,
    tail: Callable[[int], complex] | None = None,
    order: int = 16,
    rtol: float = 1e-9,
) -> np.ndarray:
    """int_t^inf (t - s)^k / k! kernel(s) ds for each t in ``lowers``.

    ``tail(j)`` must return int_horizon^inf s^j kernel(s) ds. Without it the
    kernel is assumed negligible past the horizon. Two Gauss orders are
    compared, and a mismatch above ``rtol`` raises :class:`QuadratureError`.
    """
    lowers = np.atleast_1d(np.asarray(lowers, dtype=float))
    if np.any(lowers < 0) or np.any(lowers >= horizon):
        raise ValueError("lower limits must lie in [0, horizon)")
    edges = time_edges(lowers, horizon)
    estimates = []
    for n in (order, order + 8):
        x, w = gauss_legendre(n)
        a, b = edges[:-1, None], edges[1:, None]
        half = 0.5 * (b - a)
        s = 0.5 * (a + b) + half * x
        q = half * w
        vals = kernel(s.ravel()).reshape(s.shape) * q
        # M_j(edge_i) = int_{edge_i}^inf s^j kernel
        sums = []
        for j in range(k + 1):
            panel = (vals * s**j).sum(axis=1)
            cum = np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]])
            if tail is not None:
                cum = cum + tail(j)
            sums.append(cum)
        idx = np.searchsorted(edges, lowers)
        out = np.zeros(lowers.shape, dtype=complex)
        for j in range(k + 1):
            out += math.comb(k, j) * lowers ** (k - j) * (-1) ** j * sums[j][idx]
        estimates.append(out / math.factorial(k))
    residual = np.abs(estimates[1] - estimates[0])
    # tolerance relative to the largest moment of the batch; tails at large t are tiny
    if np.any(residual > rtol * max(float(np.abs(estimates[1]).max()), 1e-6)):
        raise QuadratureError("time quadrature did not converge", float(residual.max()))
    return estimates[1]


def contraction_kernel(spec: BathSpec, branch: str, phase: int, delta_e: float = 1.0):
    """W(s) for one contraction, from the time-domain correlators."""
    sign = 1 if branch == PLUS else -1

    def kernel(s: np.ndarray) -> np.ndarray:
        corr = correlation_time_domain(spec, sign * phase * s, branch)
        return np.exp(1j * phase * delta_e * s) * corr

    return kernel


def _oscillatory_tail(m: int, a: float, horizon: float) -> complex:
    # int_T^inf s^m e^{i a s} ds = (-i a)^(-m-1) Gamma(m+1, -i a T), summed in the Abel sense
    z = -1j * a
    return complex(mpmath.gammainc(m + 1, z * horizon) * mpmath.mpc(z) ** (-m - 1))


def contraction_tail(spec: BathSpec, branch: str, phase: int, horizon: float, delta_e: float = 1.0, terms: int = TAIL_TERMS):
    """Large-s expansion of W: int_0^inf f e^{-i d w s} dw ~ sum (-1)^(n+1) f^(n)(0) / (-i d s)^(n+1)."""
    coeffs = spectrum_taylor_coefficients(spec, branch, terms)

    def tail(j: int) -> complex:
        total = 0j
        for n in range(terms + 1):
            if coeffs[n] == 0:
                continue
            amp = (-1) ** (n + 1) * math.factorial(n) * coeffs[n] * (-1j * phase) ** (-(n + 1))
            total += amp * _oscillatory_tail(j - n - 1, phase * delta_e, horizon)
        return total

    return tail


def default_horizon(spec: BathSpec) -> float:
    # the asymptotic series is good once exp(-2 pi T / beta) is negligible
    return 60.0 if spec.zero_temperature else max(60.0, 6.0 * spec.beta)


def kernel_moments(
    spec: BathSpec,
    branch: str,
    phase: int,
    k: int,
    lowers: Sequence[float] = (0.0,),
    delta_e: float = 1.0,
) -> np.ndarray:
    """int_t^inf (t - s)^k / k! W(s) ds for one contraction, at each t in ``lowers``."""
    horizon = default_horizon(spec) + float(np.max(lowers))
    return antiderivative_moments(
        contraction_kernel(spec, branch, phase, delta_e),
        k,
        lowers,
        horizon,
        tail=contraction_tail(spec, branch, phase, horizon, delta_e),
    )


def one_contraction_superoperators(
    k: int,
    g_c: float,
    spec: BathSpec,
    lowers: Sequence[float],
    delta_e: float = 1.0,
    absorptive: bool = True,
) -> np.ndarray:
    """sum over diagrams of sign * g^2 * M_k(t) * qubit part; shape (len(lowers), 4, 4)."""
    lowers = np.atleast_1d(np.asarray(lowers, dtype=float))
    moments = {}
    total = np.zeros((lowers.size, 4, 4), dtype=complex)
    for d in nonvanishing_diagrams(1):
        (c,) = d.contractions
        key = (c.branch, c.phase)
        if key not in moments:
            m = kernel_moments(spec, c.branch, c.phase, k, lowers, delta_e)
            moments[key] = m.real.astype(complex) if absorptive else m
        total += d.sign * moments[key][:, None, None] * d.qubit_superoperator
    return total * coupling_power(g_c, 1)


def compute_S_oracle(
    k: int,
    n_c: int,
    g_c: float,
    spec: BathSpec = BathSpec(),
    delta_e: float = 1.0,
    *,
    absorptive: bool = True,
) -> np.ndarray:
    """S^(k)_1 by direct time quadrature of the one-contraction kernel."""
    if n_c != 1:
        raise ValueError("the time-domain oracle covers one contraction only")
    if not 0 <= k <= 3:
        raise ValueError("antiderivative order must lie in 0..3")
    return one_contraction_superoperators(k, g_c, spec, [0.0], delta_e, absorptive)[0]
