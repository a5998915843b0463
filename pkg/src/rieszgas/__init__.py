"""Riesz/Coulomb gas minimizers, renormalized window energies, and
equidistribution diagnostics at desk scale."""

from .backend import backend_name
from .kernels import KernelSpec
from .model import (Configuration, DensityField, GasModel, QuadraticPotential,
                    CustomPotential, Support, blow_up, equilibrium_measure,
                    meanfield_energy, zeta)

__version__ = "0.1.0"

__all__ = [
    "KernelSpec", "GasModel", "Configuration", "DensityField", "Support",
    "QuadraticPotential", "CustomPotential", "blow_up", "equilibrium_measure",
    "meanfield_energy", "zeta", "backend_name", "__version__",
]
