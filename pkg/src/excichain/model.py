"""Physical model of a quantum excitation on a classical nonlinear ring.

A single quantum quasiparticle hops between the ``L`` sites of a
one-dimensional periodic lattice of classical beads.  The bead
displacements ``u_n`` modulate both the on-site energies and the
nearest-neighbour hopping amplitudes of the quasiparticle,

    eps_n = E0_n + chi_E * (u_{n+1} - u_{n-1})
    J_n   = J0_n + chi_J * (u_{n+1} - u_n)

while the beads themselves interact through harmonic plus quartic
nearest-neighbour springs.  The lattice feels the quasiparticle through
the exact negative gradient of the quantum energy expectation value, so
total energy and total lattice momentum are conserved in the closed
system.  An optional trap site and a uniform recombination rate turn the
quantum sector into an open (norm-losing) system.

All index arithmetic is periodic (site ``L-1`` neighbours site ``0``).
Units: ``kappa = M = hbar = 1`` by default; time is measured in units of
``sqrt(M/kappa)`` and temperatures in units where ``k_B = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "ModelParams",
    "LatticeState",
    "ExcitonState",
    "SystemState",
    "DegenerateInputError",
    "site_energies",
    "hopping_rates",
    "lattice_force",
    "exciton_force",
    "exciton_energy",
    "lattice_energy",
    "total_energy",
    "exciton_derivative",
    "open_exciton_derivative",
    "haken_strobl_D",
]


class DegenerateInputError(ValueError):
    """Raised when an analytic formula is evaluated at a singular point."""


def _as_site_array(value, L: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(L, float(arr))
    if arr.shape != (L,):
        raise ValueError(f"{name} must have exactly {L} entries, got shape {arr.shape}")
    return arr.copy()


@dataclass
class ModelParams:
    """All physical constants of the coupled model.

    Parameters
    ----------
    L : int
        Number of lattice sites (>= 2).
    M : float
        Bead mass.
    kappa : float
        Harmonic spring stiffness.
    beta : float
        Quartic (anharmonic) spring coefficient, >= 0.
    chi_E : float
        Strength of the displacement modulation of site energies
        (diagonal, local coupling).
    chi_J : float
        Strength of the displacement modulation of hopping amplitudes
        (off-diagonal, non-local coupling).
    E0, J0 : array_like or float
        Unperturbed site energies (length ``L``) and per-bond hopping
        amplitudes (``J0[n]`` couples sites ``n`` and ``n+1``).
    hbar : float
        Reduced Planck constant; the natural choice is 1.
    T : float
        Heat-bath temperature used for thermal preparation (k_B = 1).
    alpha : float
        Friction of the preparation heat bath.
    gamma_r : float
        Uniform recombination (norm-loss) rate, >= 0.
    Gamma : float
        Trapping rate of the sink site, >= 0.
    sink_index : int, optional
        Site index of the sink; required iff ``Gamma > 0``.
    bond_mask : array_like, optional
        Per-bond multiplier in {0, 1} applied to the full hopping
        amplitude (bare plus modulation).  Defaults to all ones
        (a closed ring); zeroing one entry cuts that bond so the
        quasiparticle lives on an open chain.

    Notes
    -----
    ``L = 2`` is permitted but degenerate: on a two-site ring the single
    pair of beads is connected by two bonds, so bond sums double-count.
    The flag :attr:`is_degenerate_ring` records this.
    """

    L: int
    M: float = 1.0
    kappa: float = 1.0
    beta: float = 1.0
    chi_E: float = 0.0
    chi_J: float = 0.0
    E0: np.ndarray = 1.0  # type: ignore[assignment]
    J0: np.ndarray = 1.0  # type: ignore[assignment]
    hbar: float = 1.0
    T: float = 0.0
    alpha: float = 1.0
    gamma_r: float = 0.0
    Gamma: float = 0.0
    sink_index: Optional[int] = None
    bond_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.L = int(self.L)
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.M <= 0 or self.kappa <= 0:
            raise ValueError("M and kappa must be positive")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.gamma_r < 0 or self.Gamma < 0:
            raise ValueError("gamma_r and Gamma must be >= 0")
        if self.T < 0 or self.alpha < 0:
            raise ValueError("T and alpha must be >= 0")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if (self.Gamma > 0) != (self.sink_index is not None):
            raise ValueError("sink_index must be set if and only if Gamma > 0")
        if self.sink_index is not None:
            self.sink_index = int(self.sink_index) % self.L
        self.E0 = _as_site_array(self.E0, self.L, "E0")
        self.J0 = _as_site_array(self.J0, self.L, "J0")
        if self.bond_mask is None:
            self.bond_mask = np.ones(self.L)
        else:
            self.bond_mask = _as_site_array(self.bond_mask, self.L, "bond_mask")
            if np.any((self.bond_mask != 0.0) & (self.bond_mask != 1.0)):
                raise ValueError("bond_mask entries must be 0 or 1")

    @property
    def is_degenerate_ring(self) -> bool:
        """True for the two-site ring, whose bonds are double-counted."""
        return self.L == 2

    @property
    def is_open(self) -> bool:
        """True when any norm-losing term is active."""
        return self.gamma_r > 0 or self.Gamma > 0

    def replace(self, **changes) -> "ModelParams":
        if "L" in changes and int(changes["L"]) != self.L:
            # uniform per-site fields follow the new size automatically
            for name in ("E0", "J0", "bond_mask"):
                if name in changes:
                    continue
                arr = getattr(self, name)
                uniform = np.all(arr == arr[0])
                if name == "bond_mask":
                    if not (uniform and arr[0] == 1.0):
                        raise ValueError(
                            "cannot resize a cut ring; pass bond_mask explicitly")
                    changes[name] = None
                elif uniform:
                    changes[name] = float(arr[0])
                else:
                    raise ValueError(
                        f"cannot resize non-uniform {name}; pass it explicitly")
        return replace(self, **changes)


@dataclass
class LatticeState:
    """Displacements and momenta of the classical beads."""

    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.u.shape != self.p.shape or self.u.ndim != 1:
            raise ValueError("u and p must be 1-d arrays of equal length")

    @classmethod
    def zeros(cls, L: int) -> "LatticeState":
        return cls(np.zeros(L), np.zeros(L))

    def copy(self) -> "LatticeState":
        return LatticeState(self.u.copy(), self.p.copy())


@dataclass
class ExcitonState:
    """Complex site amplitudes of the quantum excitation."""

    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        if self.b.ndim != 1:
            raise ValueError("b must be a 1-d complex array")

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.b) ** 2))

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.b) ** 2

    def copy(self) -> "ExcitonState":
        return ExcitonState(self.b.copy())


@dataclass
class SystemState:
    """Joint lattice plus excitation state at one time instant."""

    lattice: LatticeState
    exciton: ExcitonState
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(self.lattice.copy(), self.exciton.copy(), self.t)


# ----------------------------------------------------------------------
# Renormalized couplings
# ----------------------------------------------------------------------

def site_energies(lattice: LatticeState, params: ModelParams) -> np.ndarray:
    """Instantaneous site energies eps_n = E0_n + chi_E (u_{n+1} - u_{n-1})."""
    u = lattice.u
    return params.E0 + params.chi_E * (np.roll(u, -1) - np.roll(u, 1))


def hopping_rates(lattice: LatticeState, params: ModelParams) -> np.ndarray:
    """Instantaneous hopping amplitudes J_n = J0_n + chi_J (u_{n+1} - u_n).

    ``J_n`` is the amplitude of the bond between sites ``n`` and ``n+1``;
    cut bonds (``bond_mask == 0``) have zero amplitude.
    """
    u = lattice.u
    return params.bond_mask * (params.J0 + params.chi_J * (np.roll(u, -1) - u))


# ----------------------------------------------------------------------
# Forces and energies
# ----------------------------------------------------------------------

def lattice_force(lattice: LatticeState, params: ModelParams) -> np.ndarray:
    """Spring force on each bead (harmonic plus quartic bonds)."""
    u = lattice.u
    dp = np.roll(u, -1) - u  # stretch of the right-hand bond
    dm = np.roll(u, 1) - u   # stretch of the left-hand bond
    return params.kappa * (dp + dm) + params.beta * (dp**3 + dm**3)


def exciton_force(exciton: ExcitonState, params: ModelParams) -> np.ndarray:
    """Back-action force of the excitation on each bead.

    Exact negative gradient of the quantum energy expectation with
    respect to ``u_n``; its site sum vanishes identically, which keeps
    the total lattice momentum conserved.
    """
    b = exciton.b
    bp = np.roll(b, -1)
    bm = np.roll(b, 1)
    m = params.bond_mask
    f = params.chi_J * 2.0 * (m * np.real(np.conj(bp) * b)
                              - np.roll(m, 1) * np.real(np.conj(b) * bm))
    f += params.chi_E * (np.abs(bp) ** 2 - np.abs(bm) ** 2)
    return f


def exciton_energy(state: SystemState, params: ModelParams) -> float:
    """Quantum energy expectation <psi|H_e|psi> in the current lattice."""
    b = state.exciton.b
    eps = site_energies(state.lattice, params)
    J = hopping_rates(state.lattice, params)
    onsite = float(np.sum(eps * np.abs(b) ** 2))
    hop = float(np.sum(J * 2.0 * np.real(np.conj(np.roll(b, -1)) * b)))
    return onsite + hop


def lattice_energy(lattice: LatticeState, params: ModelParams) -> float:
    """Classical lattice Hamiltonian (kinetic plus bond potential)."""
    stretch = np.roll(lattice.u, -1) - lattice.u
    kin = float(np.sum(lattice.p**2)) / (2.0 * params.M)
    pot = float(np.sum(0.5 * params.kappa * stretch**2
                       + 0.25 * params.beta * stretch**4))
    return kin + pot


def total_energy(state: SystemState, params: ModelParams) -> float:
    """Total energy <H> of the coupled system."""
    return exciton_energy(state, params) + lattice_energy(state.lattice, params)


# ----------------------------------------------------------------------
# Equations of motion (right-hand sides)
# ----------------------------------------------------------------------

def exciton_derivative(state: SystemState, params: ModelParams) -> np.ndarray:
    """Closed-system rate db_n/dt of the quantum amplitudes.

    Hermitian bond-consistent form: the amplitude of bond ``n`` couples
    ``b_n`` to ``b_{n+1}`` in both directions,

        i*hbar db_n/dt = eps_n b_n + J_n b_{n+1} + J_{n-1} b_{n-1},

    which conserves the norm exactly.
    """
    b = state.exciton.b
    eps = site_energies(state.lattice, params)
    J = hopping_rates(state.lattice, params)
    rate = eps * b + J * np.roll(b, -1) + np.roll(J, 1) * np.roll(b, 1)
    return (-1j / params.hbar) * rate


def open_exciton_derivative(state: SystemState, params: ModelParams) -> np.ndarray:
    """Open-system rate: closed rate plus recombination and sink losses.

    Adds ``-(gamma_r + delta_{n,k} Gamma) b_n``, so the norm is
    non-increasing along any trajectory.
    """
    rate = exciton_derivative(state, params)
    b = state.exciton.b
    if params.gamma_r > 0:
        rate = rate - params.gamma_r * b
    if params.Gamma > 0:
        rate = rate.copy()
        rate[params.sink_index] -= params.Gamma * b[params.sink_index]
    return rate


# ----------------------------------------------------------------------
# Analytic reference
# ----------------------------------------------------------------------

def haken_strobl_D(gamma0: float, gamma1: float, J: float,
                   a: float = 1.0, hbar: float = 1.0) -> float:
    """White-noise master-equation diffusion constant.

    ``gamma0`` and ``gamma1`` are the local (pure-dephasing) and
    non-local noise strengths, ``J`` the hopping amplitude and ``a`` the
    lattice spacing:

        D = 2 gamma1 a^2 + a^2 J^2 / (hbar^2 (gamma0 + 3 gamma1))

    Raises
    ------
    DegenerateInputError
        If ``gamma0 + 3 gamma1 <= 0`` (the coherent term diverges).
    """
    if gamma0 < 0 or gamma1 < 0:
        raise ValueError("noise strengths must be >= 0")
    denom = gamma0 + 3.0 * gamma1
    if denom <= 0:
        raise DegenerateInputError("gamma0 + 3*gamma1 must be positive")
    return 2.0 * gamma1 * a**2 + (a * J) ** 2 / (hbar**2 * denom)
