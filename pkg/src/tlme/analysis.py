"""Trace distances, the backflow witness and initial-correlation terms.

Cutting the memory integral at t = 0 splits each Markov order k into a
history part A_k and a restart part B_k. Both contain the same boundary
term, Shat^(k)(t) rho_(k)(0), with

    Shat^(k)(t) = int_inf^t Sigma^(k)(t') dt' = -int_t^inf (t - s)^k / k! Sigma(s) ds.

Here Shat is evaluated for one contraction in two independent ways. The A
branch integrates the kernel in time. The B branch subtracts the ray
closed form of the partial moment from the exact S^(k)_1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import expm

from .bath import BathSpec
from .diagrams import group_diagrams, nonvanishing_diagrams
from .evolve import Trajectory, propagate
from .generator import Generator
from .kernels import RayQuadrature, pairing_moments, single_contraction_moment
from .oracle import one_contraction_superoperators
from .stable import STable, coupling_power
from .superop import unvec, vec

HERMITICITY_TOL = 1e-10
MAX_IC_ORDER = 2
# fine ray for partial moments at large t
IC_RAY = RayQuadrature(step=0.125, x_min=-22.0, x_max=20.0)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b."""
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    if np.max(np.abs(diff - diff.conj().T)) > HERMITICITY_TOL:
        raise ValueError("difference of the two states is not Hermitian")
    herm = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(herm))))


@dataclass(frozen=True)
class DistanceSeries:
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")
        if np.any(self.values < -1e-12) or np.any(self.values > 1 + 1e-12):
            raise ValueError("trace distance outside [0, 1]")

    @property
    def peak(self) -> float:
        return float(self.values.max())

    @property
    def peak_time(self) -> float:
        return float(self.times[int(np.argmax(self.values))])


def distance_series(a: Trajectory, b: Trajectory, label: str | None = None) -> DistanceSeries:
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times)) > 1e-12:
        raise ValueError("trajectories are on different time grids")
    values = np.array([trace_distance(x, y) for x, y in zip(a.states, b.states)])
    return DistanceSeries(a.times.copy(), values, label if label is not None else f"D_{a.label}_{b.label}")


def backflow_witness(series: DistanceSeries) -> float:
    """Sum of the increases of D after its global maximum."""
    d = series.values[int(np.argmax(series.values)) :]
    steps = np.diff(d)
    return float(steps[steps > 0].sum())


# --- initial correlations ------------------------------------------------


@dataclass(frozen=True)
class InitialCorrelationTerm:
    k: int
    t: float
    value: np.ndarray = field(repr=False)
    applied: np.ndarray | None = field(default=None, repr=False)


def _check_order(k: int):
    if not 0 <= k <= MAX_IC_ORDER:
        raise ValueError(f"initial-correlation order must lie in 0..{MAX_IC_ORDER}")


def _times(t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    return t


def ic_superoperators_quadrature(
    k: int, times, g_c: float, spec: BathSpec = BathSpec(), *, absorptive: bool = True
) -> np.ndarray:
    """Shat^(k)(t) from time-domain quadrature; shape (len(times), 4, 4)."""
    _check_order(k)
    return -one_contraction_superoperators(k, g_c, spec, _times(times), absorptive=absorptive)


def _ray_partial_moment(spec, branch, phase, k, t, quadrature):
    # int_t^inf (t-s)^k/k! W(s) ds = S - (-1)^k sum_m w_m (1 - e^{-mu_m t}) / mu_m^(k+1)
    w, mu = quadrature.nodes(spec, branch, phase, 1.0)
    removed = (w / mu ** (k + 1)) @ -np.expm1(-np.outer(mu, t))
    exact = single_contraction_moment(spec, branch, phase, k, absorptive=False)
    return exact - (-1) ** k * removed


def ic_superoperators_closed_form(
    k: int,
    times,
    g_c: float,
    spec: BathSpec = BathSpec(),
    *,
    absorptive: bool = True,
    quadrature: RayQuadrature = IC_RAY,
) -> np.ndarray:
    """Shat^(k)(t) as minus the exact moment plus the ray closed form of the part on [0, t]."""
    _check_order(k)
    t = _times(times)
    moments = {}
    total = np.zeros((t.size, 4, 4), dtype=complex)
    for d in nonvanishing_diagrams(1):
        (c,) = d.contractions
        key = (c.branch, c.phase)
        if key not in moments:
            m = _ray_partial_moment(spec, c.branch, c.phase, k, t, quadrature)
            moments[key] = m.real.astype(complex) if absorptive else m
        total += d.sign * moments[key][:, None, None] * d.qubit_superoperator
    return -total * coupling_power(g_c, 1)


def initial_correlation_term(
    k: int,
    t: float,
    table: STable,
    generator: Generator | None = None,
    rho0: np.ndarray | None = None,
    branch: str = "A",
) -> InitialCorrelationTerm:
    """Shat^(k)(t), and Shat^(k)(t) G^k rho(0) when a generator and state are given.

    ``branch`` picks the evaluation: "A" is time quadrature, "B" the closed form.
    """
    if branch == "A":
        value = ic_superoperators_quadrature(k, [t], table.g_c, table.bath, absorptive=table.absorptive)[0]
    elif branch == "B":
        value = ic_superoperators_closed_form(k, [t], table.g_c, table.bath, absorptive=table.absorptive)[0]
    else:
        raise ValueError("branch must be 'A' or 'B'")
    applied = None
    if generator is not None and rho0 is not None:
        rho_k = np.linalg.matrix_power(generator.matrix, k) @ vec(rho0)
        applied = unvec(value @ rho_k)
    return InitialCorrelationTerm(k, float(t), value, applied)


def superoperator_norm(values: np.ndarray) -> np.ndarray:
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=(-2, -1)))


@dataclass(frozen=True)
class CutReport:
    times: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)
    bound: np.ndarray = field(repr=False)
    forcing: np.ndarray = field(repr=False)
    continued: Trajectory = field(repr=False)
    restarted: Trajectory = field(repr=False)

    @property
    def bounded(self) -> bool:
        return bool(np.all(self.gap <= self.bound * (1 + 1e-9) + 1e-14))

    def gap_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.gap))


def cut_consistency_check(
    generator: Generator,
    rho0: np.ndarray,
    g_c: float,
    spec: BathSpec = BathSpec(),
    t_max: float = 30.0,
    dt: float = 0.01,
    max_order: int = MAX_IC_ORDER,
    absorptive: bool = True,
) -> CutReport:
    """Continued run versus a restart at t = 0 that keeps only the B terms.

    The continued run obeys rho' = G rho. The restart also carries the
    spurious boundary terms, rho' = G rho - sum_k Shat^(k)(t) G^k rho(0),
    integrated with the same fixed-step RK4 (forcing at the stage times).
    The bound is (1/sqrt 2) int_0^t ||exp(G (t - s))||_2 ||F(s)|| ds, from
    ||X||_1 <= sqrt(2) ||X||_F for 2x2 matrices.
    """
    G = generator.matrix
    n = int(round(t_max / dt))
    times = dt * np.arange(n + 1)
    half = dt * np.arange(2 * n + 1) / 2
    v0 = vec(rho0)
    sources = [np.linalg.matrix_power(G, k) @ v0 for k in range(max_order + 1)]
    F = np.zeros((half.size, 4), dtype=complex)
    for k in range(max_order + 1):
        Shat = ic_superoperators_closed_form(k, half, g_c, spec, absorptive=absorptive)
        F += Shat @ sources[k]
    F = -F

    continued = propagate(rho0, [(generator, n * dt)], dt, label="continued")

    states = np.empty((n + 1, 2, 2), dtype=complex)
    states[0] = rho0
    v = v0.copy()
    for i in range(n):
        f0, fh, f1 = F[2 * i], F[2 * i + 1], F[2 * i + 2]
        k1 = G @ v + f0
        k2 = G @ (v + 0.5 * dt * k1) + fh
        k3 = G @ (v + 0.5 * dt * k2) + fh
        k4 = G @ (v + dt * k3) + f1
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        states[i + 1] = unvec(v)
    restarted = Trajectory(times, states, "restarted")
    gap = np.array([trace_distance(a, b) for a, b in zip(continued.states, restarted.states)])

    prop_norm = np.array([np.linalg.norm(expm(G * s), 2) for s in times])
    fnorm = np.linalg.norm(F[::2], axis=1)
    bound = np.zeros(n + 1)
    for i in range(1, n + 1):
        integrand = prop_norm[i::-1][: i + 1] * fnorm[: i + 1]
        bound[i] = trapezoid(integrand, dx=dt)
    bound = bound / math.sqrt(2.0)
    return CutReport(times, gap, bound, F[::2], continued, restarted)


# --- principal-value cancellation ----------------------------------------


@dataclass(frozen=True)
class MirrorGroupResult:
    elements: tuple
    branches: tuple
    value: complex
    size: int

    @property
    def imaginary_ratio(self) -> float:
        return abs(self.value.imag) / max(abs(self.value.real), 1e-300)


def mirror_group_check(
    n_c: int = 2,
    k: int = 0,
    spec: BathSpec = BathSpec(),
    regulator: float = 1e-3,
    quadrature: RayQuadrature | None = None,
) -> list[MirrorGroupResult]:
    """Full complex group sums for every diagram group closed under mirroring.

    Each diagram is integrated on its own, so the conjugate pairing of
    mirror images is not assumed.
    """
    out = []
    for (elements, branches), group in group_diagrams(n_c).items():
        keys = {(d.vertices, d.pairings) for d in group}
        mirrors = {(m.vertices, m.pairings) for m in (d.mirrored() for d in group)}
        if keys != mirrors:
            continue
        total = 0j
        for d in group:
            if n_c == 1:
                (c,) = d.contractions
                value = single_contraction_moment(spec, c.branch, c.phase, k, absorptive=False)
            else:
                phases = tuple(c.phase for c in d.contractions)
                moments = pairing_moments(spec, d.pairings, phases, k, 1.0, regulator, quadrature)
                value = moments[tuple(c.branch for c in d.contractions)]
            total += d.sign * value
        out.append(MirrorGroupResult(elements, branches, total, len(group)))
    return out

