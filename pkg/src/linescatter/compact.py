"""Compactly supported potentials: ``W(S)``, the m-function, ``Delta`` and potential recovery.

The fundamental pair ``w1, w2`` starts at ``x = -S`` from
``H = [[-1, 0], [0, 1]]`` (columns ``(w, w')``), crosses the transfer
condition at 0 and is read off at ``x = S``.  ``Delta(lambda) = w2(S)``
vanishes exactly at the Dirichlet eigenvalues on ``[-S, S]`` and
``m = -w1(S) / w2(S)``.  At ``x = 0`` the ``0+`` limit is returned unless
``side="-"`` is requested.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from scipy.optimize import brentq, least_squares

from ._parallel import chunked_map
from .exceptions import ContractViolation, DomainError, NumericalDegeneracy, StagnationError
from .propagate import Method, evolve, projective_product, transfer_product
from .types import ComplexFunctionTrace, PotentialGrid, ScatteringData, TransferMatrix

H = np.array([[-1.0, 0.0], [0.0, 1.0]])


@dataclass
class FundamentalPair:
    """Values of ``w1, w2`` and their derivatives; arrays of shape ``lam.shape + x.shape``."""

    lam: np.ndarray
    x: np.ndarray
    w1: np.ndarray
    w1p: np.ndarray
    w2: np.ndarray
    w2p: np.ndarray

    @property
    def wronskian(self) -> np.ndarray:
        """``w1 w2' - w2 w1'``, identically ``-1``."""
        return self.w1 * self.w2p - self.w2 * self.w1p

    def matrix(self) -> np.ndarray:
        """``[[w1, w2], [w1', w2']]`` stacked on the last two axes."""
        return np.stack([np.stack([self.w1, self.w2], -1), np.stack([self.w1p, self.w2p], -1)], -2)


@dataclass
class MFunctionTrace:
    """Samples of the m-function for the support bound ``S``."""

    lambdas: np.ndarray
    m_values: np.ndarray
    S: float

    def __post_init__(self):
        self.lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=complex))
        self.m_values = np.atleast_1d(np.asarray(self.m_values, dtype=complex))
        if self.lambdas.shape != self.m_values.shape:
            raise ContractViolation("lambdas and m_values must have equal shapes")


def _check_wronskian(pair: FundamentalPair, tol: float):
    # relative to the size of the products, which grow like exp(2 S |Im sqrt(lambda)|)
    scale = 1 + np.abs(pair.w1 * pair.w2p) + np.abs(pair.w2 * pair.w1p)
    dev = np.max(np.abs(pair.wronskian + 1) / scale) if pair.w1.size else 0.0
    if dev > tol:
        raise NumericalDegeneracy(f"Wronskian of the fundamental pair drifts from -1 by {dev:.3g}")


def fundamental_pair_direct(q: PotentialGrid, M: TransferMatrix, lam, xs, side: Literal["-", "+"] = "+",
                            method: Method = "auto", n_jobs: int = 1, wronskian_tol: float = 1e-8
                            ) -> FundamentalPair:
    """``w1, w2`` at the points ``xs`` by direct propagation from ``-S``."""
    S = q.S
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(np.abs(xs) > S * (1 + 1e-12)):
        raise ContractViolation("evaluation points must lie in [-S, S]")

    def run(lam_chunk):
        out = np.empty(lam_chunk.shape + xs.shape + (2, 2), dtype=complex)
        for j, x in enumerate(xs):
            if x == -S:
                out[:, j] = H
            else:
                out[:, j] = evolve(q, M, lam_chunk, -S, H, x, side=side, method=method)
        return out

    W = chunked_map(run, lam, n_jobs)
    pair = FundamentalPair(lam, xs, W[..., 0, 0], W[..., 1, 0], W[..., 0, 1], W[..., 1, 1])
    _check_wronskian(pair, wronskian_tol)
    return pair


def _W_at_S_exact(q: PotentialGrid, M: TransferMatrix, lam) -> np.ndarray:
    """``W(S, lam)`` for piecewise-constant ``q``; shape ``lam.shape + (2, 2)``."""
    S = q.S
    T = transfer_product(q, lam, 0.0, S) @ M.array @ transfer_product(q, lam, -S, 0.0)
    return T @ H


def _AB_at(sd: ScatteringData, xi, on_missing: Literal["error", "interpolate"]):
    if not sd.has_AB:
        raise ContractViolation("scattering data carry no A/B traces; reconstruct them first")
    idx = np.searchsorted(sd.xi, xi)
    idx = np.clip(idx, 0, sd.xi.size - 1)
    exact = np.isclose(sd.xi[idx], xi, rtol=1e-13, atol=0.0)
    if np.all(exact):
        return sd.A[idx], sd.B[idx]
    if on_missing == "error":
        raise ContractViolation(f"A/B missing at xi = {np.asarray(xi)[~exact][:3]}")
    warnings.warn("A/B interpolated between grid frequencies", RuntimeWarning, stacklevel=3)
    interp = lambda f: np.interp(xi, sd.xi, f.real) + 1j * np.interp(xi, sd.xi, f.imag)
    return interp(sd.A), interp(sd.B)


def W_from_AB(A, B, S: float, xi) -> FundamentalPair:
    """``W(S)`` from the scattering coefficients at real ``xi``.

    ``f_-`` and its conjugate carry the coefficients
    ``[[A, conj(b)], [b, conj(A)]]`` from ``x <= -S`` to ``x >= S`` (``b = -B``
    is the raw matching coefficient); the initial coefficients of ``w1, w2``
    at ``-S`` follow from ``H``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi == 0):
        raise DomainError("xi = 0 is excluded")
    A = np.asarray(A, dtype=complex) * np.ones_like(xi)
    b = -np.asarray(B, dtype=complex) * np.ones_like(xi)
    em, ep = np.exp(-1j * xi * S), np.exp(1j * xi * S)
    # coefficients of (e^{-i xi x}, e^{i xi x}) for x <= -S
    a1, c1 = -em / 2, -ep / 2
    a2, c2 = -em / (2j * xi), ep / (2j * xi)
    # transport to x >= S
    ah1, bh1 = A * a1 + np.conj(b) * c1, b * a1 + np.conj(A) * c1
    ah2, bh2 = A * a2 + np.conj(b) * c2, b * a2 + np.conj(A) * c2
    w1 = em * ah1 + ep * bh1
    w2 = em * ah2 + ep * bh2
    w1p = -1j * xi * em * ah1 + 1j * xi * ep * bh1
    w2p = -1j * xi * em * ah2 + 1j * xi * ep * bh2
    return FundamentalPair((xi**2).astype(complex), np.array([S]), w1, w1p, w2, w2p)


def reconstruct_W_at_S(sd: ScatteringData, S: float, xi,
                       on_missing: Literal["error", "interpolate"] = "error") -> FundamentalPair:
    """``W(S, xi)`` from the ``A``/``B`` traces carried by ``sd``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    A, B = _AB_at(sd, xi, on_missing)
    return W_from_AB(A, B, S, xi)


def m_function(pair: FundamentalPair, pole_tol: float = 1e-12):
    """``m = -w1(S) / w2(S)``; raises near a zero of ``Delta``."""
    w2 = np.asarray(pair.w2)
    small = np.abs(w2) < pole_tol
    if np.any(small):
        lam = np.broadcast_to(pair.lam.reshape(pair.lam.shape + (1,) * (w2.ndim - pair.lam.ndim)), w2.shape)
        raise NumericalDegeneracy(f"m has a pole: Delta vanishes near lambda = {lam[small][:3]}")
    return -pair.w1 / w2


def _W_at_S_projective(q: PotentialGrid, M: TransferMatrix, lam) -> np.ndarray:
    """``W(S, lam)`` up to a positive factor per ``lam``; finite for any ``lam``."""
    Y = np.broadcast_to(H, lam.shape + (2, 2))
    Y = projective_product(q, lam, -q.S, 0.0, Y)
    Y = M.array @ Y
    return projective_product(q, lam, 0.0, q.S, Y)


def m_trace(q: PotentialGrid, M: TransferMatrix, lambdas, n_jobs: int = 1, pole_tol: float = 1e-12
            ) -> MFunctionTrace:
    """m-function samples by direct propagation.

    Piecewise-constant potentials use a renormalised transfer product, so
    ``m`` stays available far out on the negative axis where ``w1`` and
    ``w2`` themselves overflow.
    """
    lam = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    if q.interpolation != "constant":
        pair = fundamental_pair_direct(q, M, lam, [q.S], n_jobs=n_jobs)
        return MFunctionTrace(pair.lam, m_function(pair, pole_tol)[:, 0], q.S)
    W = chunked_map(lambda l: _W_at_S_projective(q, M, l), lam, n_jobs)
    # W carries an unknown scale; compare w2 with the matrix size
    rel = np.abs(W[:, 0, 1]) / np.abs(W).max(axis=(-2, -1))
    if np.any(rel < pole_tol):
        raise NumericalDegeneracy(f"m has a pole: Delta vanishes near lambda = {lam[rel < pole_tol][:3]}")
    return MFunctionTrace(lam, -W[:, 0, 0] / W[:, 0, 1], q.S)


def delta_trace(q: PotentialGrid, M: TransferMatrix, lambda_grid, n_jobs: int = 1) -> ComplexFunctionTrace:
    """``Delta(lambda) = w2(S, lambda)`` on a grid (``lambda = 0`` is regular)."""
    lam = np.atleast_1d(np.asarray(lambda_grid, dtype=complex))
    pair = fundamental_pair_direct(q, M, lam, [q.S], n_jobs=n_jobs)
    return ComplexFunctionTrace(lambda_grid, pair.w2[:, 0], "Delta")


def _delta_real(q, M, lam) -> float:
    return float(delta_trace(q, M, [lam]).values[0].real)


def dirichlet_eigenvalues(q: PotentialGrid, M: TransferMatrix, lam_min: float, lam_max: float,
                          n_scan: Optional[int] = None, xtol: float = 1e-14) -> np.ndarray:
    """Real zeros of ``Delta`` in ``[lam_min, lam_max]`` by sign scan and Brent refinement.

    The scan runs in ``sqrt(lambda)`` on the positive axis, where zeros are
    roughly evenly spaced.
    """
    if lam_max <= lam_min:
        raise ContractViolation("empty eigenvalue window")
    S = q.S
    if n_scan is None:
        span = np.sqrt(max(lam_max, 0)) + np.sqrt(max(-lam_min, 0))
        n_scan = int(200 + 40 * span * S)
    neg = np.linspace(lam_min, min(lam_max, 0.0), n_scan) if lam_min < 0 else np.zeros(0)
    pos = (np.linspace(np.sqrt(max(lam_min, 0.0)), np.sqrt(lam_max), n_scan) ** 2) if lam_max > 0 else np.zeros(0)
    grid = np.unique(np.concatenate((neg, pos)))
    vals = delta_trace(q, M, grid).values.real
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(lambda l: _delta_real(q, M, l), a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0:
        roots.append(grid[-1])
    return np.unique(np.asarray(roots, dtype=float))


def zero_count(q: PotentialGrid, M: TransferMatrix, lam_min: float, lam_max: float, height: float,
               n_side: int = 2000) -> int:
    """Number of zeros of ``Delta`` in the rectangle ``[lam_min, lam_max] x [-height, height]``.

    Argument principle: the winding number of ``Delta`` along the boundary.
    Comparing it with the real zeros exposes roots off the real axis.
    """
    t = np.linspace(0, 1, n_side, endpoint=False)
    a, b, h = lam_min, lam_max, height
    path = np.concatenate((
        a + (b - a) * t - 1j * h,
        b + 1j * (-h + 2 * h * t),
        b - (b - a) * t + 1j * h,
        a + 1j * (h - 2 * h * t),
    ))
    path = np.append(path, path[0])
    d = delta_trace(q, M, path).values
    if np.any(d == 0):
        raise NumericalDegeneracy("Delta vanishes on the counting contour; move the rectangle")
    dphase = np.angle(d[1:] / d[:-1])
    if np.max(np.abs(dphase)) > 2.5:
        raise NumericalDegeneracy("contour too coarse for the argument principle; raise n_side")
    return int(round(np.sum(dphase) / (2 * np.pi)))


def v_solution(q: PotentialGrid, M: TransferMatrix, lam, xs, side: Literal["-", "+"] = "+",
               method: Method = "auto") -> ComplexFunctionTrace:
    """Solution with ``v(S) = 0``, ``v'(S) = 1``; values ``(v, v')`` at ``xs`` (shape ``(k, 2)``)."""
    S = q.S
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty(xs.shape + (2,), dtype=complex)
    for j, x in enumerate(xs):
        if x == S:
            out[j] = (0.0, 1.0)
        else:
            out[j] = evolve(q, M, complex(lam), S, np.array([0.0, 1.0]), x, side=side, method=method)[0, :, 0]
    return ComplexFunctionTrace(xs, out, "v")


# -- potential recovery ----------------------------------------------------------


@dataclass
class Recovery:
    """Fitted potential with the optimiser's trace ``(iter, misfit, gradnorm)``."""

    potential: PotentialGrid
    history: list = field(default_factory=list)
    misfit: float = np.nan
    xi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    restarts: int = 0

    def history_array(self) -> np.ndarray:
        return np.asarray(self.history, dtype=float).reshape(-1, 3)


def cell_averages(q: PotentialGrid, n_cells: int) -> np.ndarray:
    """Averages of ``q`` over ``n_cells`` uniform cells of ``[-S, S]``.

    Each cell is split at the breakpoints of ``q`` and integrated by
    Gauss-Legendre, which is exact for piecewise-constant and
    piecewise-linear grids.
    """
    S = q.S
    edges = np.linspace(-S, S, n_cells + 1)
    gx, gw = np.polynomial.legendre.leggauss(4)
    bp = q.breakpoints()
    out = np.empty(n_cells)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        pts = np.unique(np.concatenate(([a, b], bp[(bp > a) & (bp < b)])))
        lo, hi = pts[:-1, None], pts[1:, None]
        x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
        out[i] = np.sum(0.5 * (hi - lo) * gw * q(x)) / (b - a)
    return out


def relative_l2_error(q_hat: PotentialGrid, q_true: PotentialGrid) -> float:
    """Relative L2 distance between ``q_hat`` and the cell averages of ``q_true`` on its cells."""
    ref = cell_averages(q_true, q_hat.values.size)
    num = np.linalg.norm(q_hat.values - ref)
    den = np.linalg.norm(ref)
    return float(num / den) if den > 0 else float(num)


def _projective_residual(w1m, w2m, w1d, w2d, s):
    """Signed chordal distance between ``m_model`` and ``m_data``, in units of ``s``.

    Equals ``s^2 (m_model - m_data) / sqrt((m_model^2 + s^2)(m_data^2 + s^2))``,
    which is about ``(m_model - m_data) / 2`` where ``|m| ~ s`` and stays
    bounded by ``s`` near poles.  Written in ``(w1, w2)`` so that poles need
    no special handling.
    """
    nm = np.sqrt(w1m**2 + (s * w2m) ** 2)
    nd = np.sqrt(w1d**2 + (s * w2d) ** 2)
    return s**2 * (w1d * w2m - w1m * w2d) / (nm * nd)


def _data_W(sd: ScatteringData, M: TransferMatrix, S: float, xi) -> FundamentalPair:
    if sd.has_AB:
        return reconstruct_W_at_S(sd, S, xi)
    from .inverse import MReconstruction, dispersion_A_boundary

    A = dispersion_A_boundary(sd, MReconstruction.from_matrix(M), xi).values
    R = np.interp(xi, sd.xi, sd.R.real) + 1j * np.interp(xi, sd.xi, sd.R.imag)
    return W_from_AB(A, R * A, S, xi)


def recovery_frequencies(sd: ScatteringData, S: float, n_cells: int, n_samples: Optional[int] = None) -> np.ndarray:
    """Data frequencies used for the fit: roughly uniform up to a few cell wavenumbers."""
    pos = sd.xi[sd.xi > 0]
    if pos.size == 0:
        pos = np.sort(-sd.xi)
    cap = min(pos.max(), 3 * np.pi * n_cells / (2 * S) + 10.0)
    lo = max(pos.min(), 0.5 / S)
    n_samples = n_samples or max(48, 4 * n_cells)
    targets = np.linspace(lo, cap, n_samples)
    idx = np.unique(np.clip(np.searchsorted(pos, targets), 0, pos.size - 1))
    return pos[idx]


def recover_potential(sd: ScatteringData, M: TransferMatrix, S: float, n_cells: int, reg: float = 1e-4,
                      xi: Optional[np.ndarray] = None, n_restarts: int = 0, seed: int = 0,
                      init: Optional[np.ndarray] = None, max_iter: int = 200, stall: int = 10,
                      n_jobs: int = 1) -> Recovery:
    """Fit a piecewise-constant ``q`` with ``n_cells`` uniform cells to the m-function of the data.

    The data m-function comes from ``W(S)`` rebuilt from ``A``/``B`` (taken
    from ``sd`` when present, otherwise reconstructed from ``R``) at real
    frequencies, i.e. at ``lambda = xi^2``.  The misfit is the scaled chordal
    distance between model and data m-values plus ``reg`` times the squared
    second differences of the cell values.  Minimisation is a trust-region
    Gauss-Newton iteration with finite-difference Jacobians; ``n_restarts``
    additional runs start from seeded random potentials and the best fit wins.
    """
    if not reg > 0:
        raise ContractViolation("reg must be positive")
    if n_cells < 1:
        raise ContractViolation("n_cells must be positive")
    xi = recovery_frequencies(sd, S, n_cells) if xi is None else np.asarray(xi, dtype=float)
    data = _data_W(sd, M, S, xi)
    w1d, w2d = data.w1.real, data.w2.real
    lam = xi**2
    s = np.sqrt(lam)
    sqrt_reg = np.sqrt(reg)
    D = np.diff(np.eye(n_cells), n=2, axis=0) if n_cells > 2 else np.zeros((0, n_cells))

    def model(vals):
        qg = PotentialGrid.cells(vals, S)
        W = chunked_map(lambda l: _W_at_S_exact(qg, M, l.astype(complex)), lam, n_jobs)
        return W[:, 0, 0].real, W[:, 0, 1].real

    def residual(vals):
        w1m, w2m = model(vals)
        return np.concatenate((_projective_residual(w1m, w2m, w1d, w2d, s), sqrt_reg * (D @ vals)))

    def run(x0):
        history = []
        best = [np.inf]

        def jac(vals):
            r = residual(vals)
            J = np.empty((r.size, vals.size))
            for i in range(vals.size):
                h = 1e-6 * max(1.0, abs(vals[i]))
                e = np.zeros_like(vals)
                e[i] = h
                J[:, i] = (residual(vals + e) - residual(vals - e)) / (2 * h)
            f = 0.5 * float(r @ r)
            g = float(np.linalg.norm(J.T @ r))
            history.append((len(history), f, g))
            if f < best[0] * (1 - 1e-12):
                best[0] = f
                jac.stale = 0
            else:
                jac.stale += 1
            if jac.stale >= stall and g > 1e-8:
                raise StagnationError(f"misfit has not decreased for {stall} iterations (gradnorm {g:.3g})")
            return J

        jac.stale = 0
        sol = least_squares(residual, x0, jac=jac, method="trf", max_nfev=max_iter,
                            xtol=1e-12, ftol=1e-14, gtol=1e-12)
        return sol, history

    rng = np.random.default_rng(seed)
    starts = [np.zeros(n_cells) if init is None else np.asarray(init, dtype=float)]
    starts += [rng.uniform(-2, 2, n_cells) for _ in range(n_restarts)]
    best = None
    errors = []
    for x0 in starts:
        try:
            sol, hist = run(x0)
        except StagnationError as exc:
            errors.append(exc)
            continue
        if best is None or sol.cost < best[0].cost:
            best = (sol, hist)
    if best is None:
        raise errors[-1]
    sol, hist = best
    return Recovery(PotentialGrid.cells(sol.x, S), hist, float(sol.cost), xi, n_restarts)
