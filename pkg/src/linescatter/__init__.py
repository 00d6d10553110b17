"""Scattering on the line with a point transfer condition at the origin.

Forward solver, transfer-matrix and ``A``/``B`` reconstruction from
reflection data, Weyl-function tools for compactly supported potentials,
potential recovery and large-parameter asymptotic checks.
"""

from .estimators import ForwardScattering, PotentialRecovery, TransferMatrixInversion
from .exceptions import (ContractViolation, DomainError, InconclusiveFit, IntegrationError, NumericalDegeneracy,
                         ScatteringError, StagnationError, ValidationFailure)
from .forward import bound_states, reflection, scattering_AB, scattering_data
from .inverse import MReconstruction, classify_case, dispersion_A, dispersion_A_boundary, invert
from .compact import m_function, recover_potential, reconstruct_W_at_S
from .asymval import appendix_suite
from .types import ComplexFunctionTrace, PotentialGrid, ScatteringData, StateVector, TransferMatrix

__version__ = "0.1.0"

__all__ = [
    "ComplexFunctionTrace", "ContractViolation", "DomainError", "ForwardScattering", "InconclusiveFit",
    "IntegrationError", "MReconstruction", "NumericalDegeneracy", "PotentialGrid", "PotentialRecovery",
    "ScatteringData", "ScatteringError", "StagnationError", "StateVector", "TransferMatrix",
    "TransferMatrixInversion", "ValidationFailure", "appendix_suite", "bound_states", "classify_case",
    "dispersion_A", "dispersion_A_boundary", "invert", "m_function", "recover_potential",
    "reconstruct_W_at_S", "reflection", "scattering_AB", "scattering_data",
]
