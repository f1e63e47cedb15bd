"""excichain: a quantum excitation coupled to a thermal nonlinear chain.

Semiclassical simulator of a tight-binding quasiparticle whose site
energies and hopping amplitudes are modulated by the displacements of a
classical anharmonic ring at finite temperature, with diagnostics for
spreading regimes, diffusion constants, equilibrium spectra and
sink-capture transport efficiency.
"""

__version__ = "0.1.0"

from .model import (ExcitonState, LatticeState, ModelParams, SystemState,
                    haken_strobl_D)
from .dynamics import IntegratorConfig, RngStream

__all__ = [
    "__version__",
    "ModelParams",
    "LatticeState",
    "ExcitonState",
    "SystemState",
    "IntegratorConfig",
    "RngStream",
    "haken_strobl_D",
]
