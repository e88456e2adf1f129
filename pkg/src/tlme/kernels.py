"""Frequency-domain evaluation of diagram moments.

Each contraction contributes ``W(s) = int f(w) exp(i d (dE - w) s) dw`` where
s is the time span of the contraction. A diagram's kernel is the product of
its contraction factors integrated over inner vertex times. Its k-th moment
``int_0^inf (-tau)^k / k! Sigma(tau) dtau`` is the k-th Taylor coefficient of
the Laplace transform, which for a product of exponentials is

    (-1)^k * sum_{|e| = k} prod_j (z + Lambda_j)^(-1 - e_j)   at z -> 0,

with Lambda_j the summed rates of the contractions open in gap j.

Two evaluators are provided.

* :func:`single_contraction_moment` is exact for one contraction. The
  resonance 1/(dE - w + i0)^(k+1) splits into a delta-derivative term
  (spectrum derivative at dE) and a Hadamard finite-part integral.
* :func:`pairing_moments` handles any number of contractions. Each frequency
  integral is rotated onto the ray ``w = r exp(-i d theta)``, so that every
  W(s) becomes a sum of decaying exponentials. Trapezoidal nodes in log r
  are then fed through the Laplace formula above.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bath import MINUS, PLUS, BathSpec, complex_spectrum, gauss_legendre, spectrum, spectrum_derivative


@dataclass(frozen=True)
class RayQuadrature:
    """Trapezoidal rule in x = log r along a rotated frequency ray."""

    step: float = 0.15
    x_min: float = -16.0
    x_max: float = 20.0
    angle: float = math.pi / 4

    def nodes(self, spec: BathSpec, branch: str, phase: int, delta_e: float):
        """Weights w_m and rates mu_m with W(s) = sum_m w_m exp(-mu_m s)."""
        x = np.arange(self.x_min, self.x_max + self.step / 2, self.step)
        rot = np.exp(-1j * phase * self.angle)
        omega = np.exp(x) * rot
        weights = complex_spectrum(spec, omega, branch) * omega * self.step
        rates = -1j * phase * (delta_e - omega)
        return weights, rates


DEFAULT_RAY = RayQuadrature()
# three nested frequency integrals: a coarser step keeps the cost near 10 s at ~1e-4 accuracy
COARSE_RAY = RayQuadrature(step=0.25)


def default_quadrature(n_c: int) -> RayQuadrature:
    return COARSE_RAY if n_c >= 3 else DEFAULT_RAY


def compositions(total: int, parts: int):
    """All tuples of ``parts`` nonnegative integers summing to ``total``."""
    for combo in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1, *combo, total + parts - 1)
        yield tuple(edges[i + 1] - edges[i] - 1 for i in range(parts))


def _open_gaps(pairing, n_gaps: int):
    return [[i for i, (a, b) in enumerate(pairing) if a <= j < b] for j in range(1, n_gaps + 1)]


def pairing_moments(
    spec: BathSpec,
    pairing: tuple[tuple[int, int], ...],
    phases: tuple[int, ...],
    k: int,
    delta_e: float = 1.0,
    regulator: float = 0.0,
    quadrature: RayQuadrature | None = None,
) -> dict[tuple[str, ...], complex]:
    """k-th moment for one pairing and phase pattern, for every branch pattern.

    ``regulator`` damps the kernel by exp(-eta tau). Beyond one contraction
    the 1/tau tails of the correlators (f(0) = 1/beta is finite) make some
    coherence moments diverge logarithmically or worse as eta -> 0.
    """
    n = len(pairing)
    quadrature = quadrature or default_quadrature(n)
    gaps = _open_gaps(pairing, 2 * n - 1)
    rates, weights = [], []
    for i, d in enumerate(phases):
        w_plus, mu = quadrature.nodes(spec, PLUS, d, delta_e)
        w_minus, _ = quadrature.nodes(spec, MINUS, d, delta_e)
        shape = [1] * n
        shape[i] = mu.size
        rates.append(mu.reshape(shape))
        weights.append(np.stack([w_plus, w_minus]))
    lams = [regulator + sum(rates[i] for i in members) for members in gaps]
    inv = [1.0 / lam for lam in lams]

    denom = 0.0
    for e in compositions(k, len(lams)):
        term = 1.0
        for g, ej in zip(inv, e):
            term = term * g ** (1 + ej)
        denom = denom + term
    denom = (-1) ** k * np.broadcast_to(denom, [w.shape[1] for w in weights])

    out = denom
    for w in weights:
        # contract the leading node axis; the branch axis is appended at the end
        out = np.tensordot(out, w, axes=([0], [1]))
    result = {}
    for idx in itertools.product((0, 1), repeat=n):
        result[tuple(PLUS if j == 0 else MINUS for j in idx)] = complex(out[idx])
    return result


# --- single contraction: delta derivative plus finite part ----------------


def _finite_part_window(m: int, half: float) -> float:
    # Hadamard finite part of int_{-h}^{h} x^{-m} dx
    if m <= 0:
        return (half ** (1 - m) - (-half) ** (1 - m)) / (1 - m)
    if m % 2 == 1:
        return 0.0
    return 2.0 * half ** (1 - m) / (1 - m)


def finite_part_integral(spec: BathSpec, branch: str, order: int, delta_e: float = 1.0) -> float:
    """FP int_0^inf f(w) / (dE - w)^order dw for order in 1..4.

    Around the pole the Taylor polynomial of f is removed and integrated
    exactly. The remainder is written as an integral over f^(order), so
    nothing cancels numerically.
    """
    if not 1 <= order <= 4:
        raise ValueError("finite-part order must lie in 1..4")
    c = delta_e
    half = 0.5 * c

    def outer(w):
        return spectrum(spec, w, branch) / (c - w) ** order

    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    left = integrate.quad(outer, 0.0, c - half, **opts)[0]
    mid = integrate.quad(outer, c + half, 50.0 * c + 5.0 * spec.omega_c, **opts)[0]
    right = integrate.quad(outer, 50.0 * c + 5.0 * spec.omega_c, np.inf, **opts)[0]

    inner = 0.0
    for j in range(order):
        inner += float(spectrum_derivative(spec, c, branch, j)) / math.factorial(j) * _finite_part_window(
            order - j, half
        )
    # remainder: (f(c+x) - T(x)) / x^order = int_0^1 (1-u)^(order-1)/(order-1)! f^(order)(c + u x) du
    xg, wg = gauss_legendre(48)
    x = half * xg
    u = 0.5 * (xg + 1.0)
    wu = 0.5 * wg
    grid = c + np.outer(x, u)
    deriv = spectrum_derivative(spec, grid, branch, order)
    kernel = (1.0 - u) ** (order - 1) / math.factorial(order - 1)
    inner += float(half * wg @ (deriv @ (wu * kernel)))
    return left + (-1) ** order * inner + mid + right


def single_contraction_moment(
    spec: BathSpec,
    branch: str,
    phase: int,
    k: int,
    delta_e: float = 1.0,
    absorptive: bool = True,
) -> complex:
    """k-th moment of one contraction.

    The rate 1/(eta - i d x)^(k+1), with x = dE - w, tends to
    (i d)^(k+1) [FP x^-(k+1) - i pi d (-1)^k/k! delta^(k)(x)]. This gives

        pi (i d)^k / k! f^(k)(dE) + (-1)^k (i d)^(k+1) FP int f / x^(k+1).

    With ``absorptive`` only the real part is kept. A diagram and its mirror
    image are complex conjugates, so this is half their sum.
    """
    if not 0 <= k <= 3:
        raise ValueError("antiderivative order must lie in 0..3 for one contraction")
    d = phase
    delta_part = math.pi * (1j * d) ** k / math.factorial(k) * float(spectrum_derivative(spec, delta_e, branch, k))
    pv_coeff = (-1) ** k * (1j * d) ** (k + 1)
    if absorptive:
        # (i d)^k is real for even k and imaginary for odd k
        if k % 2 == 0:
            return complex(delta_part.real)
        return complex((pv_coeff * finite_part_integral(spec, branch, k + 1, delta_e)).real)
    return complex(delta_part + pv_coeff * finite_part_integral(spec, branch, k + 1, delta_e))
