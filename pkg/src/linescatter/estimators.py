"""Estimator-style wrappers around the functional core.

The three steps of the pipeline map onto ``fit``/``predict``:

* :class:`ForwardScattering` fits a potential and predicts ``R`` on frequencies;
* :class:`TransferMatrixInversion` fits scattering data and predicts ``A``;
* :class:`PotentialRecovery` fits scattering data and predicts ``q(x)``.

All follow the scikit-learn conventions: hyperparameters are stored
unchanged in ``__init__``, learned state carries a trailing underscore.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import compact, forward, inverse
from ._validation import as_frequencies, as_transfer_matrix, check_potential, check_scattering_data
from .types import ScatteringData


class ForwardScattering(BaseEstimator):
    """Forward map ``q -> (R, eta)`` for a fixed transfer matrix."""

    def __init__(self, M=None, eta_max: Optional[float] = None, method: str = "auto", n_jobs: int = 1):
        self.M = M
        self.eta_max = eta_max
        self.method = method
        self.n_jobs = n_jobs

    def fit(self, q, y=None):
        self.potential_ = check_potential(q)
        self.matrix_ = as_transfer_matrix(np.eye(2) if self.M is None else self.M)
        self.etas_ = forward.bound_states(self.potential_, self.matrix_, self.eta_max)
        return self

    def predict(self, xi) -> np.ndarray:
        """Reflection coefficient on the frequencies ``xi``."""
        return self.scattering_data(xi).R

    def scattering_data(self, xi, with_AB: bool = False) -> ScatteringData:
        check_is_fitted(self, "potential_")
        return forward.reflection(self.potential_, self.matrix_, as_frequencies(xi), self.etas_,
                                  with_AB=with_AB, method=self.method, n_jobs=self.n_jobs)

    def transform(self, xi):
        """``(A, B)`` on the frequencies ``xi``."""
        check_is_fitted(self, "potential_")
        return forward.scattering_AB(self.potential_, self.matrix_, as_frequencies(xi),
                                     method=self.method, n_jobs=self.n_jobs)


class TransferMatrixInversion(BaseEstimator):
    """Transfer matrix, ``A`` and ``B`` from scattering data."""

    def __init__(self, sign: int = 1, case: Optional[str] = None):
        self.sign = sign
        self.case = case

    def fit(self, sd, y=None):
        sd = check_scattering_data(sd)
        res = inverse.invert(sd, sign=self.sign, case=self.case)
        self.data_ = sd
        self.reconstruction_ = res.mrec
        self.case_ = res.mrec.case
        self.A_ = res.A
        self.B_ = res.B
        return self

    def predict(self, zeta) -> np.ndarray:
        """``A`` at points of the closed upper half-plane (real points use boundary values)."""
        check_is_fitted(self, "reconstruction_")
        zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
        out = np.empty(zeta.shape, dtype=complex)
        real = zeta.imag == 0
        if real.any():
            out[real] = inverse.dispersion_A_boundary(self.data_, self.reconstruction_, zeta[real].real).values
        if (~real).any():
            out[~real] = inverse.dispersion_A(self.data_, self.reconstruction_, zeta[~real])
        return out

    def data_with_AB(self) -> ScatteringData:
        """The fitted data with the reconstructed ``A``/``B`` attached."""
        check_is_fitted(self, "reconstruction_")
        d = self.data_
        return ScatteringData(d.xi, d.R, d.etas, self.A_.values, self.B_.values)


class PotentialRecovery(BaseEstimator):
    """Piecewise-constant potential fitted to the m-function of scattering data."""

    def __init__(self, M=None, S: float = 1.0, n_cells: int = 16, reg: float = 1e-4,
                 n_restarts: int = 0, seed: int = 0, n_jobs: int = 1):
        self.M = M
        self.S = S
        self.n_cells = n_cells
        self.reg = reg
        self.n_restarts = n_restarts
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, sd, y=None):
        sd = check_scattering_data(sd)
        M = as_transfer_matrix(np.eye(2) if self.M is None else self.M)
        res = compact.recover_potential(sd, M, self.S, self.n_cells, self.reg, n_restarts=self.n_restarts,
                                        seed=self.seed, n_jobs=self.n_jobs)
        self.potential_ = res.potential
        self.history_ = res.history_array()
        self.misfit_ = res.misfit
        return self

    def predict(self, x) -> np.ndarray:
        """Fitted potential at ``x`` (zero outside ``[-S, S]``)."""
        check_is_fitted(self, "potential_")
        return self.potential_(np.asarray(x, dtype=float))
