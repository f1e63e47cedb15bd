"""Time evolution: deterministic RK4, Langevin thermostat, dephasing noise.

A trajectory is a pure function of (initial state, parameters, time
step, random stream), so ensembles are reproducible regardless of how
trajectories are scheduled.  Stochastic steps consume pre-drawn Gaussian
chunks from a :class:`RngStream`, one increment per site per step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ExcitonState, LatticeState, ModelParams, SystemState

__all__ = [
    "IntegratorConfig",
    "RngStream",
    "IntegrationError",
    "OpenAccumulators",
    "rk4_step",
    "langevin_step",
    "dephasing_step",
    "sample_initial_lattice",
    "sample_exciton_initial",
    "thermalize",
    "advance_coupled",
    "advance_open",
    "advance_langevin",
    "advance_langevin_coupled",
    "advance_dephasing",
]

SCHEMES = ("coupled-rk4", "open-rk4", "langevin", "dephasing")

# Steps per stochastic noise block; fixed so that noise consumption (and
# therefore every trajectory) is independent of how callers chunk time.
NOISE_BLOCK = 1024


class IntegrationError(RuntimeError):
    """Non-finite state encountered during integration."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t = {t:g}")
        self.t = t


@dataclass
class IntegratorConfig:
    """Numerical integration settings."""

    dt: float = 1e-3
    scheme: str = "coupled-rk4"
    record_stride: int = 100

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")


@dataclass(frozen=True)
class RngStream:
    """Counter-addressed random stream: (seed, stream_id) -> noise sequence.

    Distinct ``stream_id`` values give statistically independent streams
    for the same master seed, so an ensemble can grow without
    reshuffling the noise of earlier trajectories.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)


@dataclass
class OpenAccumulators:
    """Running quadratures of an open (norm-losing) trajectory.

    ``sink_time_integral`` is the time integral of the sink occupation
    |b_sink(t)|^2 and ``norm_time_integral`` that of the total norm,
    both from the start of the open evolution.
    """

    sink_time_integral: float = 0.0
    norm_time_integral: float = 0.0


def _check_finite(state: SystemState) -> None:
    if not (np.all(np.isfinite(state.lattice.u))
            and np.all(np.isfinite(state.lattice.p))
            and np.all(np.isfinite(state.exciton.b))):
        raise IntegrationError("non-finite state", state.t)


def _sink(params: ModelParams) -> int:
    return -1 if params.sink_index is None else params.sink_index


class _SplitAmplitudes:
    """Scoped view of complex amplitudes as separate real/imag arrays."""

    def __init__(self, exciton: ExcitonState):
        self.exciton = exciton
        self.re = np.ascontiguousarray(exciton.b.real)
        self.im = np.ascontiguousarray(exciton.b.imag)

    def __enter__(self):
        return self.re, self.im

    def __exit__(self, *exc):
        self.exciton.b = self.re + 1j * self.im
        return False


# ----------------------------------------------------------------------
# Single-step operations
# ----------------------------------------------------------------------

def rk4_step(state: SystemState, params: ModelParams, dt: float) -> SystemState:
    """One RK4 step of the coupled vector field.

    Uses the closed-system generator when all loss rates vanish and the
    open (norm-losing) one otherwise.
    """
    out = state.copy()
    if params.is_open:
        advance_open(out, params, dt, 1, OpenAccumulators())
    else:
        advance_coupled(out, params, dt, 1)
    return out


def langevin_step(lattice: LatticeState, params: ModelParams, dt: float,
                  rng: np.random.Generator) -> LatticeState:
    """One thermostatted step of the lattice-only stochastic dynamics.

    With ``alpha = 0`` the thermostat is off and the step falls back to
    the deterministic lattice-only RK4 step.
    """
    out = lattice.copy()
    if params.alpha == 0.0:
        zr = np.zeros(params.L)
        zi = np.zeros(params.L)
        _kernels.rk4_closed(out.u, out.p, zr, zi, params.E0, params.J0,
                            params.bond_mask, params.kappa, params.beta,
                            0.0, 0.0, params.M, params.hbar, dt, 1)
    else:
        noise = rng.standard_normal((1, params.L))
        sigma = np.sqrt(2.0 * params.alpha * params.T * params.M * dt)
        _kernels.heun_langevin(out.u, out.p, noise, params.kappa, params.beta,
                               params.M, params.alpha, sigma, dt)
    if not (np.all(np.isfinite(out.u)) and np.all(np.isfinite(out.p))):
        raise IntegrationError("non-finite lattice state", 0.0)
    return out


def dephasing_step(exciton: ExcitonState, params: ModelParams, dt: float,
                   rng: np.random.Generator) -> ExcitonState:
    """One step of the stochastic site-energy (pure dephasing) dynamics.

    The white noise enters as an exact per-site unitary phase rotation
    with Gaussian angle of variance ``2 T dt / hbar**2``, followed by an
    RK4 step of the static generator; the closed-mode norm is therefore
    conserved to integrator accuracy.
    """
    out = exciton.copy()
    advance_dephasing(out, params, dt, 1, rng)
    return out


# ----------------------------------------------------------------------
# Initial conditions
# ----------------------------------------------------------------------

def sample_initial_lattice(params: ModelParams,
                           rng: np.random.Generator) -> LatticeState:
    """Zero displacements, Maxwell momenta of variance ``M T``."""
    u = np.zeros(params.L)
    if params.T > 0:
        p = rng.normal(0.0, np.sqrt(params.M * params.T), params.L)
    else:
        p = np.zeros(params.L)
    return LatticeState(u, p)


def sample_exciton_initial(kind: str, L: int,
                           rng: np.random.Generator | None = None,
                           site: int | None = None,
                           amplitudes: np.ndarray | None = None) -> ExcitonState:
    """Build a unit-norm initial excitation.

    Kinds: ``delta`` (fully localized at ``site``, default the chain
    center), ``random-phase`` (uniform moduli ``1/sqrt(L)`` with i.i.d.
    uniform phases, requires ``rng``), ``custom`` (normalizes the given
    ``amplitudes``).
    """
    if kind == "delta":
        b = np.zeros(L, dtype=complex)
        b[(L // 2 if site is None else site) % L] = 1.0
    elif kind == "random-phase":
        if rng is None:
            raise ValueError("random-phase initial state needs an rng")
        theta = rng.uniform(0.0, 2.0 * np.pi, L)
        b = np.exp(1j * theta) / np.sqrt(L)
    elif kind == "custom":
        if amplitudes is None:
            raise ValueError("custom initial state needs amplitudes")
        b = np.asarray(amplitudes, dtype=complex).copy()
        if b.shape != (L,):
            raise ValueError("amplitudes must have length L")
    else:
        raise ValueError(f"unknown initial-state kind {kind!r}")
    nrm = np.sqrt(np.sum(np.abs(b) ** 2))
    if nrm == 0:
        raise ValueError("initial state has zero norm")
    return ExcitonState(b / nrm)


# ----------------------------------------------------------------------
# Chunked trajectory drivers
# ----------------------------------------------------------------------

def advance_coupled(state: SystemState, params: ModelParams, dt: float,
                    n_steps: int) -> SystemState:
    """Advance the closed coupled system by ``n_steps`` steps in place."""
    with _SplitAmplitudes(state.exciton) as (br, bi):
        _kernels.rk4_closed(state.lattice.u, state.lattice.p, br, bi,
                            params.E0, params.J0, params.bond_mask,
                            params.kappa, params.beta, params.chi_E,
                            params.chi_J, params.M, params.hbar, dt, n_steps)
    state.t += n_steps * dt
    _check_finite(state)
    return state


def advance_open(state: SystemState, params: ModelParams, dt: float,
                 n_steps: int, acc: OpenAccumulators) -> SystemState:
    """Advance the open (norm-losing) system in place, updating ``acc``."""
    raw = np.array([acc.sink_time_integral, acc.norm_time_integral])
    with _SplitAmplitudes(state.exciton) as (br, bi):
        _kernels.rk4_open(state.lattice.u, state.lattice.p, br, bi,
                          params.E0, params.J0, params.bond_mask,
                          params.kappa, params.beta, params.chi_E,
                          params.chi_J, params.M, params.hbar,
                          params.gamma_r, params.Gamma, _sink(params),
                          dt, n_steps, raw)
    state.t += n_steps * dt
    acc.sink_time_integral = float(raw[0])
    acc.norm_time_integral = float(raw[1])
    _check_finite(state)
    return state


def advance_langevin(lattice: LatticeState, params: ModelParams, dt: float,
                     n_steps: int, rng: np.random.Generator) -> LatticeState:
    """Advance the thermostatted lattice in place by ``n_steps`` steps."""
    sigma = np.sqrt(2.0 * params.alpha * params.T * params.M * dt)
    done = 0
    while done < n_steps:
        block = min(NOISE_BLOCK, n_steps - done)
        noise = rng.standard_normal((block, params.L))
        _kernels.heun_langevin(lattice.u, lattice.p, noise, params.kappa,
                               params.beta, params.M, params.alpha, sigma, dt)
        done += block
    if not (np.all(np.isfinite(lattice.u)) and np.all(np.isfinite(lattice.p))):
        raise IntegrationError("non-finite lattice state", done * dt)
    return lattice


def advance_langevin_coupled(state: SystemState, params: ModelParams, dt: float,
                             n_steps: int, rng: np.random.Generator) -> SystemState:
    """Advance the thermostatted *coupled* system in place.

    Prepares joint equilibrium states of lattice plus excitation; the
    quantum norm is renormalized at the end of the phase.
    """
    sigma = np.sqrt(2.0 * params.alpha * params.T * params.M * dt)
    with _SplitAmplitudes(state.exciton) as (br, bi):
        done = 0
        while done < n_steps:
            block = min(NOISE_BLOCK, n_steps - done)
            noise = rng.standard_normal((block, params.L))
            _kernels.heun_langevin_coupled(
                state.lattice.u, state.lattice.p, br, bi, noise,
                params.E0, params.J0, params.bond_mask, params.kappa,
                params.beta, params.chi_E, params.chi_J, params.M,
                params.hbar, params.alpha, sigma, dt)
            done += block
    state.t += n_steps * dt
    _check_finite(state)
    state.exciton.b /= np.sqrt(state.exciton.norm)
    return state


def advance_dephasing(exciton: ExcitonState, params: ModelParams, dt: float,
                      n_steps: int, rng: np.random.Generator,
                      acc: OpenAccumulators | None = None) -> ExcitonState:
    """Advance the stochastic site-energy dynamics in place."""
    if params.chi_E != 0.0 or params.chi_J != 0.0:
        raise ValueError("dephasing mode requires chi_E = chi_J = 0")
    raw = np.zeros(2)
    if acc is not None:
        raw[:] = (acc.sink_time_integral, acc.norm_time_integral)
    scale = np.sqrt(2.0 * params.T * dt) / params.hbar
    J0m = params.bond_mask * params.J0
    with _SplitAmplitudes(exciton) as (br, bi):
        done = 0
        while done < n_steps:
            block = min(NOISE_BLOCK, n_steps - done)
            noise = rng.standard_normal((block, params.L))
            _kernels.dephasing_advance(br, bi, noise, scale, params.E0, J0m,
                                       params.hbar, params.gamma_r, params.Gamma,
                                       _sink(params), dt, raw)
            done += block
    if acc is not None:
        acc.sink_time_integral = float(raw[0])
        acc.norm_time_integral = float(raw[1])
    if not np.all(np.isfinite(exciton.b)):
        raise IntegrationError("non-finite amplitudes", done * dt)
    return exciton


def thermalize(lattice: LatticeState, params: ModelParams,
               rng: np.random.Generator, dt: float = 1e-3,
               t0: float | None = None) -> LatticeState:
    """Equilibrate the lattice with the heat bath for a time ``t0``.

    ``t0`` defaults to ``L`` time units, after which the caller is
    expected to run the bath-free (microcanonical) dynamics.
    """
    duration = float(params.L) if t0 is None else float(t0)
    n_steps = int(round(duration / dt))
    return advance_langevin(lattice, params, dt, n_steps, rng)
