"""Ohmic bath with a Lorentz-Drude cutoff.

Frequencies and times are measured in units of the qubit splitting.
The two spectral functions are ``f^+ = J (n + 1)`` (emission) and
``f^- = J n`` (absorption), and the matching correlation functions are

    C^-(tau) = int_0^inf J n^-  e^{+i w tau} dw
    C^+(tau) = int_0^inf J n^+  e^{-i w tau} dw
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.special import bernoulli, exp1

PLUS = "plus"
MINUS = "minus"
BRANCHES = (PLUS, MINUS)

MAX_DERIVATIVE = 4


class QuadratureError(RuntimeError):
    """Raised when a quadrature misses its tolerance; carries the residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (estimated residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class BathSpec:
    """Inverse temperature and cutoff frequency. ``beta=math.inf`` is zero temperature."""

    beta: float = 10.0
    omega_c: float = 10.0

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not (self.omega_c > 0 and math.isfinite(self.omega_c)):
            raise ValueError(f"omega_c must be positive and finite, got {self.omega_c}")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)


def _check_branch(branch: str) -> str:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be {PLUS!r} or {MINUS!r}, got {branch!r}")
    return branch


def _as_real_array(omega, strict: bool):
    w = np.asarray(omega, dtype=float)
    bad = w <= 0 if strict else w < 0
    if np.any(bad):
        raise ValueError(f"frequency must be {'> 0' if strict else '>= 0'}")
    return w


def _scalar_or_array(x, like):
    return x.item() if np.ndim(like) == 0 else x


def spectral_density(spec: BathSpec, omega):
    """J(w) = w / (1 + (w/wc)^2)."""
    w = _as_real_array(omega, strict=False)
    return _scalar_or_array(w / (1.0 + (w / spec.omega_c) ** 2), omega)


def bose_occupation(spec: BathSpec, omega, branch: str):
    """n^-(w) = 1/(e^{beta w} - 1) and n^+ = n^- + 1."""
    _check_branch(branch)
    w = _as_real_array(omega, strict=True)
    if spec.zero_temperature:
        n = np.zeros_like(w)
    else:
        x = spec.beta * w
        n = np.exp(-x) / -np.expm1(-x)
    if branch == PLUS:
        n = n + 1.0
    return _scalar_or_array(n, omega)


def spectrum(spec: BathSpec, omega, branch: str):
    """f^±(w) = J(w) n^±(w), continued to w = 0 by its limit 1/beta."""
    _check_branch(branch)
    w = _as_real_array(omega, strict=False)
    out = np.asarray(complex_spectrum(spec, np.where(w > 0, w, 1.0), branch).real)
    if np.any(w == 0):
        limit = 0.0 if spec.zero_temperature else 1.0 / spec.beta
        out = np.where(w == 0, limit, out)
    return _scalar_or_array(out, omega)


def complex_spectrum(spec: BathSpec, omega, branch: str):
    """f^± at complex frequency (analytic continuation off the positive axis).

    Written without ``1/expm1(+beta w)`` so that large |w| on a rotated ray
    does not overflow.
    """
    w = np.asarray(omega, dtype=complex)
    J = w / (1.0 + (w / spec.omega_c) ** 2)
    if spec.zero_temperature:
        return J if branch == PLUS else np.zeros_like(w)
    x = spec.beta * w
    if branch == PLUS:
        return J / -np.expm1(-x)
    _check_branch(branch)
    return J * np.exp(-x) / -np.expm1(-x)


def _drude_derivative(spec: BathSpec, w, j: int):
    # J = (wc^2/2) [1/(w + i wc) + 1/(w - i wc)]
    wc = spec.omega_c
    return wc**2 * (-1) ** j * math.factorial(j) * np.real((w + 1j * wc) ** (-j - 1))


@lru_cache(maxsize=None)
def _occupation_polynomial(m: int) -> np.ndarray:
    # d^m n / dw^m = beta^m P_m(n), from n' = -beta n (1 + n)
    p = np.array([0.0, 1.0])
    for _ in range(m):
        p = -npoly.polymul([0.0, 1.0, 1.0], npoly.polyder(p))
    return p


def _occupation_derivative(spec: BathSpec, w, branch: str, m: int):
    if m == 0:
        return np.asarray(bose_occupation(spec, w, branch), dtype=float)
    if spec.zero_temperature:
        return np.zeros_like(w)
    n = np.asarray(bose_occupation(spec, w, MINUS), dtype=float)
    return spec.beta**m * npoly.polyval(n, _occupation_polynomial(m))


def spectrum_derivative(spec: BathSpec, omega, branch: str, k: int):
    """k-th frequency derivative of f^±, by the Leibniz rule on J and n^±."""
    _check_branch(branch)
    if not (0 <= k <= MAX_DERIVATIVE) or int(k) != k:
        raise ValueError(f"derivative order must be an integer in 0..{MAX_DERIVATIVE}, got {k}")
    w = _as_real_array(omega, strict=True)
    if k == 0:
        return spectrum(spec, omega, branch)
    total = np.zeros_like(w)
    for j in range(k + 1):
        total = total + math.comb(k, j) * _drude_derivative(spec, w, j) * _occupation_derivative(
            spec, w, branch, k - j
        )
    return _scalar_or_array(total, omega)


def spectrum_taylor_coefficients(spec: BathSpec, branch: str, order: int) -> np.ndarray:
    """Coefficients c_n of f^±(w) = sum c_n w^n about w = 0, for n <= order."""
    _check_branch(branch)
    drude = np.zeros(order + 1)
    for j in range(0, (order - 1) // 2 + 1):
        drude[2 * j + 1] = (-1) ** j / spec.omega_c ** (2 * j)
    if spec.zero_temperature:
        return drude.copy() if branch == PLUS else np.zeros(order + 1)
    # J n^- = (1/beta) (J/w) * (x/(e^x - 1)), x = beta w
    B = bernoulli(order + 1)
    bose = np.array([B[m] * spec.beta**m / math.factorial(m) for m in range(order + 1)])
    ratio = drude[1:]
    c = npoly.polymul(ratio, bose)[: order + 1] / spec.beta
    c = np.pad(c, (0, order + 1 - len(c)))
    return c + drude if branch == PLUS else c


# --- time domain ---------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_nodes(edges: np.ndarray, order: int):
    x, w = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (0.5 * (a + b) + half * x).ravel(), (half * w).ravel()


def _frequency_edges(spec: BathSpec, upper: float, tau_max: float) -> np.ndarray:
    width = min(1.0, 0.5 * spec.omega_c)
    if not spec.zero_temperature:
        width = min(width, 3.0 / spec.beta)
    if tau_max > 0:
        width = min(width, math.pi / tau_max)
    # graded panels near w = 0 resolve the 1/beta structure of the occupation
    small = [0.0] + [width * 2.0**-j for j in range(6, 0, -1)]
    count = max(1, int(math.ceil((upper - width) / width)))
    return np.concatenate([small, np.linspace(width, upper, count + 1)])


def _drude_tail(spec: BathSpec, omega0: float, tau: np.ndarray, sigma: int) -> np.ndarray:
    """int_{omega0}^inf J(w) e^{i sigma w tau} dw for tau > 0."""
    wc = spec.omega_c
    total = np.zeros(tau.shape, dtype=complex)
    safe = wc * tau < 600.0
    for a in (1j * wc, -1j * wc):
        # int_W^inf e^{i s w t}/(w + a) dw = e^{-i s a t} E1(-i s (W + a) t)
        t = tau[safe]
        total[safe] += np.exp(-1j * sigma * a * t) * exp1(-1j * sigma * (omega0 + a) * t)
        # the prefactor overflows in double precision for long times
        for i in np.nonzero(~safe)[0]:
            t = tau[i]
            total[i] += complex(mpmath.exp(-1j * sigma * a * t) * mpmath.e1(-1j * sigma * (omega0 + a) * t))
    return 0.5 * wc**2 * total


def correlation_time_domain(
    spec: BathSpec,
    tau,
    branch: str,
    omega_max: float | None = None,
    rtol: float = 1e-6,
    order: int = 20,
):
    """C^±(tau) by panel quadrature in frequency.

    The occupation is negligible beyond a split frequency of 40/beta (at
    least 4). Past the split only the Drude part of C^+ survives, and it is
    integrated in closed form with exponential integrals. With
    ``omega_max=None`` the integral runs to infinity, so C^+(0) is infinite.
    A finite ``omega_max`` truncates the integral there.

    The error estimate compares two Gauss orders on the same panels;
    :class:`QuadratureError` is raised when it exceeds ``rtol``.
    """
    _check_branch(branch)
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    sigma = 1 if branch == MINUS else -1
    # conjugation symmetry: C(-tau) = conj C(tau)
    ta = np.abs(t)
    tau_max = float(ta.max()) if ta.size else 0.0

    split = 4.0 if spec.zero_temperature else max(4.0, 40.0 / spec.beta)
    if omega_max is not None:
        if omega_max <= 0:
            raise ValueError("omega_max must be positive")
        split = min(split, float(omega_max))
    edges = _frequency_edges(spec, split, tau_max)

    results = []
    for n in (order, order + order // 2):
        w, q = _panel_nodes(edges, n)
        f = spectrum(spec, w, branch) * q
        vals = np.empty(ta.shape, dtype=complex)
        for start in range(0, ta.size, 256):
            chunk = ta[start : start + 256]
            vals[start : start + 256] = np.exp(1j * sigma * np.outer(chunk, w)) @ f
        results.append(vals)
    value = results[1]
    residual = np.abs(results[1] - results[0])
    scale = np.maximum(np.abs(value), 1e-300)
    if np.any(residual > rtol * scale + 1e-14):
        raise QuadratureError("correlation quadrature did not converge", float(residual.max()))

    if branch == PLUS and (omega_max is None or omega_max > split):
        pos = ta > 0
        tail = np.zeros(ta.shape, dtype=complex)
        tail[pos] = _drude_tail(spec, split, ta[pos], sigma)
        if omega_max is None:
            tail[~pos] = np.inf
        else:
            tail[pos] -= _drude_tail(spec, float(omega_max), ta[pos], sigma)
            wc = spec.omega_c
            tail[~pos] = 0.5 * wc**2 * math.log((omega_max**2 + wc**2) / (split**2 + wc**2))
        value = value + tail
    value = np.where(t < 0, np.conj(value), value)
    return value.item() if np.ndim(tau) == 0 else value


def bath_decay_time(
    spec: BathSpec,
    fraction: float = 0.05,
    omega_max: float = 200.0,
    t_max: float = 100.0,
    step: float = 0.05,
) -> float:
    """Earliest time after which |C^+(tau)| stays below ``fraction`` of |C^+(0)|.

    Used as the practical correlation time of the bath.
    """
    grid = np.arange(0.0, t_max + step / 2, step)
    mag = np.abs(correlation_time_domain(spec, grid, PLUS, omega_max=omega_max))
    above = np.nonzero(mag >= fraction * mag[0])[0]
    last = above[-1]
    if last == grid.size - 1:
        raise ValueError("correlation function has not decayed within t_max")
    return float(grid[last + 1])
