"""Random trigonometric Hamiltonians on the torus: chaos and invariant tori."""

__version__ = "0.1.0"

from .chaos import CHAOTIC, REGULAR, UNDETERMINED, Thresholds, classify, tangent_indicators
from .dynamics import PhaseState, Trajectory, integrate, poincare_section, step
from .ensemble import RescaledPotential, TorusPotential, sample_field, sample_torus_potential
from .model import ModelParams, ModelPotential
from .potential import Potential, hamiltonian
from .rng import RngSeed, generator

__all__ = [
    "__version__",
    "CHAOTIC",
    "REGULAR",
    "UNDETERMINED",
    "Thresholds",
    "classify",
    "tangent_indicators",
    "PhaseState",
    "Trajectory",
    "integrate",
    "poincare_section",
    "step",
    "RescaledPotential",
    "TorusPotential",
    "sample_field",
    "sample_torus_potential",
    "ModelParams",
    "ModelPotential",
    "Potential",
    "hamiltonian",
    "RngSeed",
    "generator",
]
