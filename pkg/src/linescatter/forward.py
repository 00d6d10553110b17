"""Forward scattering: Jost solutions, the coefficients A and B, R and bound states.

Conventions
-----------
The left Jost solution is propagated from ``x = -S`` (where it equals
``exp(-i zeta x)``) through the transfer condition to ``x = S`` and matched
there against ``exp(-i zeta x)`` and ``exp(i zeta x)``::

    f_-(x) = A exp(-i zeta x) + b exp(i zeta x),     x >= S.

``A`` is the coefficient of ``exp(-i zeta x)``.  The reported ``B`` is
``-b``: with that sign its large-frequency limit is ``(m22 - m11) / 2``,
which is the normalisation under which the transfer-matrix reconstruction
formulas hold.  Functions that need the raw matching coefficient (the
reconstruction of ``W(S)``) flip the sign back.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.optimize import brentq

from ._parallel import chunked_map
from .exceptions import ContractViolation, DomainError, NumericalDegeneracy
from .propagate import DEFAULT_ATOL, DEFAULT_RTOL, Method, evolve
from .types import ComplexFunctionTrace, PotentialGrid, ScatteringData, TransferMatrix


@dataclass
class JostSide:
    """Samples ``(y, y')`` of one Jost solution.  ``samples.values`` has shape ``(n, 2)``."""

    side: Literal["plus", "minus"]
    samples: ComplexFunctionTrace

    @property
    def y(self) -> np.ndarray:
        return self.samples.values[:, 0]

    @property
    def yp(self) -> np.ndarray:
        return self.samples.values[:, 1]


def _free(zeta, x, sign):
    e = np.exp(sign * 1j * zeta * x)
    return np.array([e, sign * 1j * zeta * e])


def jost_plus_M(q: PotentialGrid, M: TransferMatrix, zeta: complex, xs, method: Method = "auto",
                rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> JostSide:
    """Right Jost solution ``f_{+,M}(x, zeta) ~ exp(i zeta x)`` as ``x -> +inf``.

    At ``x = 0`` the ``0+`` limit is returned.
    """
    zeta = complex(zeta)
    if zeta.imag < 0:
        raise DomainError("the Jost solutions need Im zeta >= 0")
    S = q.S
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty((xs.size, 2), dtype=complex)
    start = _free(zeta, S, +1)
    for i, x in enumerate(xs):
        if x >= S:
            out[i] = _free(zeta, x, +1)
        else:
            out[i] = evolve(q, M, zeta**2, S, start, x, side="+", method=method, rtol=rtol, atol=atol)[0, :, 0]
    return JostSide("plus", ComplexFunctionTrace(xs, out, "f_plus_M"))


def jost_minus_M(q: PotentialGrid, M: TransferMatrix, zeta: complex, xs, method: Method = "auto",
                 rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> JostSide:
    """Left Jost solution ``f_{-,M}(x, zeta) ~ exp(-i zeta x)`` as ``x -> -inf``.

    At ``x = 0`` the ``0-`` limit is returned.
    """
    zeta = complex(zeta)
    if zeta.imag < 0:
        raise DomainError("the Jost solutions need Im zeta >= 0")
    S = q.S
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty((xs.size, 2), dtype=complex)
    start = _free(zeta, -S, -1)
    for i, x in enumerate(xs):
        if x <= -S:
            out[i] = _free(zeta, x, -1)
        else:
            out[i] = evolve(q, M, zeta**2, -S, start, x, side="-", method=method, rtol=rtol, atol=atol)[0, :, 0]
    return JostSide("minus", ComplexFunctionTrace(xs, out, "f_minus_M"))


def _left_jost_at_S(q, M, zeta, method, rtol, atol):
    """``(y, y')`` of ``f_{-,M}`` at ``x = S`` for an array of ``zeta``."""
    S = q.S
    zeta = np.asarray(zeta, dtype=complex)
    e = np.exp(1j * zeta * S)
    Y0 = np.stack([e, -1j * zeta * e], -1)[..., None]
    Y = evolve(q, M, zeta**2, -S, Y0, S, method=method, rtol=rtol, atol=atol)
    return Y[:, 0, 0], Y[:, 1, 0]


def matching_coefficients(q: PotentialGrid, M: TransferMatrix, zeta, method: Method = "auto",
                          rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, n_jobs: int = 1):
    """Raw coefficients ``(A, b)`` of ``f_{-,M} = A e^{-i zeta x} + b e^{i zeta x}`` for ``x >= S``.

    Valid for any complex ``zeta != 0``; compact support makes the matching
    exact.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if np.any(zeta == 0):
        raise DomainError("zeta = 0 makes the matching system degenerate")
    S = q.S

    def run(z):
        y, yp = _left_jost_at_S(q, M, z, method, rtol, atol)
        A = (1j * z * y - yp) / (2j * z) * np.exp(1j * z * S)
        b = (1j * z * y + yp) / (2j * z) * np.exp(-1j * z * S)
        return A, b

    return chunked_map(run, zeta, n_jobs)


def jost_A(q: PotentialGrid, M: TransferMatrix, zeta, **kw):
    """``A(zeta)`` for complex ``zeta`` (entire in ``zeta`` apart from ``zeta = 0``)."""
    return matching_coefficients(q, M, zeta, **kw)[0]


def scattering_AB(q: PotentialGrid, M: TransferMatrix, xi, method: Method = "auto",
                  rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, n_jobs: int = 1):
    """Scattering coefficients ``(A(xi), B(xi))`` for real nonzero ``xi``.

    Scalars in, scalars out; arrays in, arrays out.
    """
    scalar = np.ndim(xi) == 0
    xi_arr = np.atleast_1d(np.asarray(xi))
    if np.iscomplexobj(xi_arr) and np.any(xi_arr.imag != 0):
        raise ContractViolation("scattering_AB needs real frequencies")
    xi_arr = xi_arr.real.astype(float)
    if np.any(xi_arr == 0):
        raise DomainError("xi = 0 is excluded: the matching system is degenerate there")
    A, b = matching_coefficients(q, M, xi_arr, method, rtol, atol, n_jobs)
    B = -b
    if scalar:
        return complex(A[0]), complex(B[0])
    return A, B


def reflection(q: PotentialGrid, M: TransferMatrix, xi_grid, etas=None, with_AB: bool = False,
               method: Method = "auto", n_jobs: int = 1) -> ScatteringData:
    """Reflection coefficient ``R = B / A`` on a real grid."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    A, B = scattering_AB(q, M, xi_grid, method=method, n_jobs=n_jobs)
    if np.any(np.abs(A) < 1e-12):
        bad = xi_grid[np.abs(A) < 1e-12]
        raise NumericalDegeneracy(f"|A| below 1e-12 at xi = {bad}")
    R = B / A
    if np.any(np.abs(R) >= 1):
        raise NumericalDegeneracy("computed |R| >= 1; refine the ODE tolerance or the frequency grid")
    etas = np.zeros(0) if etas is None else etas
    if with_AB:
        return ScatteringData(xi_grid, R, etas, A, B)
    return ScatteringData(xi_grid, R, etas)


def default_eta_max(q: PotentialGrid, M: TransferMatrix) -> float:
    """Generous upper bound for bound-state parameters ``eta``."""
    bound = np.sqrt(max(0.0, -float(np.min(q.values)))) + abs(M.m21)
    if not M.is_diagonal_case:
        bound += abs(M.trace / M.m12)
    return 2.0 * bound + 1.0


def bound_state_wronskian(q: PotentialGrid, M: TransferMatrix, etas, method: Method = "auto") -> np.ndarray:
    """``Wron(f_{-,M}, f_{+,M})`` at ``zeta = i eta``, evaluated at ``x = S``.

    Real valued; equals ``-2 eta A(i eta)``.
    """
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    S = q.S
    y, yp = _left_jost_at_S(q, M, 1j * etas, method, DEFAULT_RTOL, DEFAULT_ATOL)
    return (-np.exp(-etas * S) * (etas * y + yp)).real


def bound_states(q: PotentialGrid, M: TransferMatrix, eta_max: Optional[float] = None,
                 step: Optional[float] = None, xtol: float = 1e-13, method: Method = "auto") -> np.ndarray:
    """All bound-state parameters ``eta`` in ``(0, eta_max]`` (eigenvalues ``-eta**2``).

    Sign scan of the real Wronskian on a uniform grid followed by Brent
    refinement.  Pairs of roots hidden inside one scan cell are searched for
    around local minima of ``|W|``; a warning is issued when one cannot be
    resolved.
    """
    if eta_max is None:
        eta_max = default_eta_max(q, M)
    if eta_max <= 0:
        raise ContractViolation("eta_max must be positive")
    step = step or 1e-3 * eta_max
    grid = np.arange(1, int(np.floor(eta_max / step)) + 1) * step
    if grid.size == 0 or grid[-1] < eta_max:
        grid = np.append(grid, eta_max)
    W = bound_state_wronskian(q, M, grid, method)
    f = lambda e: float(bound_state_wronskian(q, M, [e], method)[0])

    roots = [g for g, w in zip(grid, W) if w == 0.0]
    sgn = np.sign(W)
    for j in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        roots.append(brentq(f, grid[j], grid[j + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))

    aW = np.abs(W)
    for j in range(1, grid.size - 1):
        if aW[j] < aW[j - 1] and aW[j] < aW[j + 1] and sgn[j - 1] == sgn[j] == sgn[j + 1] != 0:
            fine = np.linspace(grid[j - 1], grid[j + 1], 65)
            Wf = bound_state_wronskian(q, M, fine, method)
            flips = np.nonzero(np.sign(Wf[:-1]) * np.sign(Wf[1:]) < 0)[0]
            for i in flips:
                roots.append(brentq(f, fine[i], fine[i + 1], xtol=xtol))
            if flips.size == 0 and np.min(np.abs(Wf)) < 1e-8 * max(1.0, np.max(aW)):
                warnings.warn(f"possible unresolved double bound state near eta = {grid[j]:.6g}",
                              RuntimeWarning, stacklevel=2)
    roots = np.unique(np.round(np.array(roots, dtype=float), 14))
    return roots


def scattering_data(q: PotentialGrid, M: TransferMatrix, xi_grid, eta_max: Optional[float] = None,
                    with_AB: bool = False, method: Method = "auto", n_jobs: int = 1) -> ScatteringData:
    """Full scattering data ``{R(xi_k), eta_1..eta_N}`` generated by the forward solver."""
    etas = bound_states(q, M, eta_max, method=method)
    return reflection(q, M, xi_grid, etas=etas, with_AB=with_AB, method=method, n_jobs=n_jobs)


# -- large-frequency asymptotics ------------------------------------------------


def _exp_integral(lefts, rights, omega):
    """``int_a^b exp(i omega t) dt`` summed with weights later; shape ``(n_omega, n_pieces)``."""
    omega = np.asarray(omega, dtype=complex)[:, None]
    small = np.abs(omega) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (np.exp(1j * omega * rights) - np.exp(1j * omega * lefts)) / (1j * omega)
    return np.where(small, rights - lefts, val)


def _potential_pieces(q: PotentialGrid, n_linear: int = 4000):
    if q.interpolation == "constant":
        return q.pieces()
    e = np.unique(np.concatenate((np.linspace(-q.S, q.S, n_linear + 1), [0.0])))
    a, b = e[:-1], e[1:]
    return a, b, q(0.5 * (a + b))


def asymptotic_A(q: PotentialGrid, M: TransferMatrix, zeta):
    """Leading large-``|zeta|`` form of ``A`` including the potential integral term."""
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    a, b, v = _potential_pieces(q)
    right = a >= 0
    # cos(zeta t) exp(i zeta |t|) = (1 + exp(2 i zeta |t|)) / 2
    I = 0.5 * ((b - a) * v).sum() + 0.5 * (
        (_exp_integral(a[right], b[right], 2 * zeta) * v[right]).sum(axis=1)
        + (_exp_integral(a[~right], b[~right], -2 * zeta) * v[~right]).sum(axis=1)
    )
    return M.m12 * zeta / 2j + M.trace / 2 + M.m12 / 2 * I


def asymptotic_B(q: PotentialGrid, M: TransferMatrix, xi, variant: str = "uniform"):
    """Leading large-``|xi|`` form of ``B`` including the potential integral term.

    ``variant="uniform"`` integrates ``cos(xi t) q(t) exp(-i xi t)`` over the
    whole line with a minus sign.  Direct computation shows that this sign is
    only right for the part of ``q`` on ``t < 0``; ``variant="signed"`` flips
    the contribution of ``t > 0`` and is the form whose residual decays.
    """
    if variant not in ("uniform", "signed"):
        raise ContractViolation(f"unknown variant {variant!r}")
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    a, b, v = _potential_pieces(q)
    if variant == "signed":
        v = np.where(a >= 0, -v, v)
    # cos(xi t) exp(-i xi t) = (1 + exp(-2 i xi t)) / 2
    I = 0.5 * ((b - a) * v).sum() + 0.5 * (_exp_integral(a, b, -2 * xi) * v).sum(axis=1)
    return -M.m12 * xi / 2j + (M.m22 - M.m11) / 2 - M.m12 / 2 * I


@dataclass
class AsymptoticResidual:
    residual_A: ComplexFunctionTrace
    residual_B: ComplexFunctionTrace

    def slopes(self, n_bins: int = 12):
        from ._fitting import envelope_slope

        xi = np.abs(self.residual_A.abscissae.real)
        return (envelope_slope(xi, np.abs(self.residual_A.values), n_bins),
                envelope_slope(xi, np.abs(self.residual_B.values), n_bins))


def asymptotic_AB_check(q: PotentialGrid, M: TransferMatrix, xi_grid_large, variant: str = "uniform",
                        n_jobs: int = 1) -> AsymptoticResidual:
    """Residuals ``|A - A_asym|`` and ``|B - B_asym|`` on a large-frequency grid.

    ``variant`` selects the form of the ``B`` asymptotics (see :func:`asymptotic_B`).
    """
    xi = np.asarray(xi_grid_large, dtype=float)
    if np.max(np.abs(xi)) < 50:
        raise ContractViolation("the asymptotic check needs a grid reaching |xi| >= 50")
    A, B = scattering_AB(q, M, xi, n_jobs=n_jobs)
    rA = np.abs(A - asymptotic_A(q, M, xi))
    rB = np.abs(B - asymptotic_B(q, M, xi, variant))
    return AsymptoticResidual(ComplexFunctionTrace(xi, rA, "|A - A_asym|"),
                              ComplexFunctionTrace(xi, rB, "|B - B_asym|"))
