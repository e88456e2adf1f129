"""Propagation through the prepare, pulse and decay protocol."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bath import BathSpec
from .generator import Generator, Scheme, assemble_generator, drive_liouvillian
from .stable import STable, build_stable
from .superop import GROUND, TRACE_ROW, unvec, vec

log = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
TRACE_RENORMALIZE = 1e-12
POSITIVITY_TOL = 1e-8


class InvariantError(RuntimeError):
    pass


def thermal_state(bath: BathSpec, delta_e: float = 1.0) -> np.ndarray:
    """Gibbs state of (dE/2) sigma_z."""
    if bath.zero_temperature:
        return GROUND.copy()
    p_up = 1.0 / (1.0 + math.exp(bath.beta * delta_e))
    return np.diag([p_up, 1.0 - p_up]).astype(complex)


def prepare_equilibrium(generator: Generator | np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Trace-one null state of an undriven generator."""
    G = generator.matrix if isinstance(generator, Generator) else np.asarray(generator, dtype=complex)
    _, s, vh = np.linalg.svd(G)
    scale = max(float(s[0]), 1e-300)
    dim = int(np.sum(s <= rtol * scale)) if s[0] > 0 else 4
    if dim != 1:
        raise ValueError(f"generator null space has dimension {dim}, expected 1")
    v = vh[-1].conj()
    tr = TRACE_ROW @ v
    if abs(tr) < 1e-12:
        raise ValueError("null vector is traceless")
    rho = unvec(v / tr)
    return 0.5 * (rho + rho.conj().T)


@dataclass(frozen=True)
class PulseProtocol:
    g_d: float = 0.2

    def __post_init__(self):
        if not self.g_d > 0:
            raise ValueError("drive amplitude must be positive")

    @property
    def duration(self) -> float:
        # rotation angle 2 g_D T = pi: full inversion
        return math.pi / (2.0 * self.g_d)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    label: str = ""
    renormalizations: int = 0
    max_trace_drift: float = 0.0

    @property
    def p_excited(self) -> np.ndarray:
        return self.states[:, 0, 0].real

    @property
    def coherence(self) -> np.ndarray:
        return self.states[:, 0, 1]

    @property
    def trace_error(self) -> np.ndarray:
        return np.abs(np.trace(self.states, axis1=1, axis2=2) - 1.0)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4_step_matrix(G: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step for a constant linear generator."""
    A = h * np.asarray(G, dtype=complex)
    A2 = A @ A
    A3 = A2 @ A
    return np.eye(4) + A + A2 / 2 + A3 / 6 + A3 @ A / 24


def _steps(duration: float, dt: float) -> int:
    n = duration / dt
    count = int(round(n))
    if count < 1 or abs(n - count) > 1e-9 * max(1.0, n):
        raise ValueError(f"segment duration {duration} is not a multiple of dt={dt}")
    return count


def aligned_step(duration: float, dt: float) -> float:
    """Largest step <= dt that divides ``duration``."""
    return duration / math.ceil(duration / dt - 1e-9)


def _check_state(rho: np.ndarray, t: float, warned: list) -> None:
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITICITY_TOL:
        raise InvariantError(f"Hermiticity violated at t={t:.6g}: {herm:.3e}")
    if not warned[0]:
        low = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
        if low < -POSITIVITY_TOL:
            log.warning("state lost positivity at t=%.6g (eigenvalue %.3e)", t, low)
            warned[0] = True


def propagate(
    initial: np.ndarray,
    segments: list[tuple[Generator | np.ndarray, float]],
    dt: float = 0.005,
    label: str = "",
    t0: float = 0.0,
) -> Trajectory:
    """Fixed-step RK4 through piecewise-constant generators.

    Each duration must be an integer multiple of ``dt``. The first state is
    ``initial`` at time ``t0``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    rho0 = np.asarray(initial, dtype=complex)
    if abs(np.trace(rho0) - 1) > 1e-12:
        raise ValueError("initial state must have unit trace")
    counts = [_steps(d, dt) for _, d in segments]
    total = sum(counts)
    times = t0 + dt * np.arange(total + 1)
    states = np.empty((total + 1, 2, 2), dtype=complex)
    states[0] = rho0
    v = vec(rho0)
    i = 0
    renorm = 0
    drift_max = 0.0
    warned = [False]
    for (gen, _), n in zip(segments, counts):
        G = gen.matrix if isinstance(gen, Generator) else np.asarray(gen, dtype=complex)
        P = rk4_step_matrix(G, dt)
        for _ in range(n):
            v = P @ v
            i += 1
            tr = TRACE_ROW @ v
            drift = abs(tr - 1.0)
            drift_max = max(drift_max, drift)
            if drift > TRACE_TOL:
                raise InvariantError(f"trace drift {drift:.3e} at t={times[i]:.6g}")
            if drift > TRACE_RENORMALIZE:
                log.debug("renormalizing trace drift %.3e at t=%.6g", drift, times[i])
                v = v / tr
                renorm += 1
            states[i] = unvec(v)
            _check_state(states[i], times[i], warned)
    return Trajectory(times, states, label, renorm, drift_max)


@dataclass(frozen=True)
class ExperimentConfig:
    g_c: float = 0.2
    g_d: float = 0.2
    bath: BathSpec = BathSpec()
    t_max: float = 50.0
    dt: float = 0.005
    cutoff: int = 5
    markov_order: int = 2

    def __post_init__(self):
        if self.g_c < 0 or self.g_d <= 0 or self.t_max <= 0 or self.dt <= 0:
            raise ValueError("g_c >= 0 and positive g_d, t_max, dt are required")


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    equilibrium: np.ndarray = field(repr=False)
    pulse: Trajectory = field(repr=False)
    nbm: Trajectory = field(repr=False)
    bm: Trajectory = field(repr=False)
    born: Trajectory = field(repr=False)

    @property
    def trajectories(self) -> dict[str, Trajectory]:
        return {"NBM": self.nbm, "BM": self.bm, "Born": self.born}


def scheme_generators(table: STable, config: ExperimentConfig) -> dict[str, Generator]:
    return {
        "NBM": assemble_generator(table, Scheme.full(config.cutoff)),
        "BM": assemble_generator(table, Scheme.born_markov()),
        "Born": assemble_generator(table, Scheme.born_only(config.markov_order)),
    }


def run_experiment(config: ExperimentConfig, table: STable | None = None) -> ExperimentResult:
    """Equilibrium, drive pulse under the full scheme, then three decay runs.

    Time zero of the decay trajectories is the end of the pulse, where the
    full-scheme state is shared as the initial state of every scheme.
    """
    if table is None:
        table = build_stable(config.g_c, config.bath, config.cutoff)
    elif table.g_c != config.g_c or table.bath != config.bath:
        raise ValueError("table does not match the experiment configuration")
    gens = scheme_generators(table, config)
    full = Scheme.full(config.cutoff)

    if config.g_c == 0:
        rho_eq = thermal_state(config.bath)
    else:
        rho_eq = prepare_equilibrium(gens["NBM"])

    protocol = PulseProtocol(config.g_d)
    driven = assemble_generator(
        table, full, drive=drive_liouvillian(config.g_d), drive_amplitude=config.g_d
    )
    t_pulse = protocol.duration
    h_pulse = aligned_step(t_pulse, config.dt)
    pulse = propagate(rho_eq, [(driven, t_pulse)], h_pulse, label="pulse", t0=-t_pulse)
    rho0 = pulse.final

    t_max = config.dt * round(config.t_max / config.dt)
    runs = {name: propagate(rho0, [(g, t_max)], config.dt, label=name) for name, g in gens.items()}
    return ExperimentResult(config, rho_eq, pulse, runs["NBM"], runs["BM"], runs["Born"])
