from __future__ import annotations

import numpy as np

from .exceptions import ContractViolation
from .types import PotentialGrid, ScatteringData, TransferMatrix


def as_transfer_matrix(M) -> TransferMatrix:
    """Accept a :class:`TransferMatrix`, a 2x2 array or a mapping with keys ``m11..m22``."""
    if isinstance(M, TransferMatrix):
        return M
    if isinstance(M, dict):
        try:
            return TransferMatrix(*(float(M[k]) for k in ("m11", "m12", "m21", "m22")))
        except KeyError as exc:
            raise ContractViolation(f"transfer matrix mapping lacks {exc}") from None
    return TransferMatrix.from_array(M)


def as_frequencies(xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float)).ravel()
    if np.any(xi == 0) or not np.all(np.isfinite(xi)):
        raise ContractViolation("frequencies must be finite and nonzero")
    return xi


def check_potential(q) -> PotentialGrid:
    if not isinstance(q, PotentialGrid):
        raise ContractViolation(f"expected a PotentialGrid, got {type(q).__name__}")
    return q


def check_scattering_data(sd) -> ScatteringData:
    if not isinstance(sd, ScatteringData):
        raise ContractViolation(f"expected ScatteringData, got {type(sd).__name__}")
    return sd
