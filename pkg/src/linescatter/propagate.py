"""ODE propagation kernel for ``-y'' + q y = lambda y`` with a transfer condition at 0.

Two propagators are provided:

* an adaptive embedded Runge-Kutta pair (``scipy.integrate.solve_ivp`` with
  DOP853) over the first-order system ``(y, y')``, valid for any
  interpolation of ``q``;
* an exact product of per-cell 2x2 propagators for piecewise-constant ``q``,
  vectorised over the spectral parameter.

``method="auto"`` picks the exact product whenever the potential is
piecewise constant.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import ContractViolation, IntegrationError
from .types import PotentialGrid, StateVector, TransferMatrix

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10

Method = Literal["auto", "exact", "rk"]


def principal_sqrt(lam):
    """Square root with the branch cut on the negative real axis."""
    return np.sqrt(np.asarray(lam, dtype=complex))


def _resolve_method(q: PotentialGrid, method: Method) -> str:
    if method == "auto":
        return "exact" if q.interpolation == "constant" else "rk"
    if method == "exact" and q.interpolation != "constant":
        raise ContractViolation("the exact transfer product needs a piecewise-constant potential")
    if method not in ("exact", "rk"):
        raise ContractViolation(f"unknown method {method!r}")
    return method


def _check_side(x0: float, x1: float):
    if min(x0, x1) < 0.0 < max(x0, x1):
        raise ContractViolation(
            f"interval [{min(x0, x1)}, {max(x0, x1)}] straddles 0; apply the transfer condition explicitly"
        )


def cell_propagator(lam, qval: float, h: float):
    """Entries ``(c, s, d)`` of the constant-potential propagator over a step ``h``.

    ``(y, y')(x + h) = [[c, s], [d, c]] (y, y')(x)`` with ``k^2 = lam - qval``,
    ``c = cos(k h)``, ``s = sin(k h) / k`` and ``d = -k^2 s``.  Both ``c`` and
    ``s`` are entire in ``k^2``; small arguments use the Taylor series.
    """
    k2 = np.asarray(lam, dtype=complex) - qval
    t = k2 * h * h
    small = np.abs(t) < 1e-6
    k = np.sqrt(np.where(small, 1.0, k2))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(small, 1 - t / 2 + t * t / 24, np.cos(k * h))
        s = np.where(small, h * (1 - t / 6 + t * t / 120), np.sin(k * h) / k)
    return c, s, -k2 * s


def scaled_cell_propagator(lam, qval: float, h: float):
    """:func:`cell_propagator` divided by ``exp(|Im k| h)``, which keeps every entry bounded.

    Returns ``(c, s, d, g)`` with ``g = |Im k| h`` the removed log-scale.
    """
    k2 = np.asarray(lam, dtype=complex) - qval
    t = k2 * h * h
    small = np.abs(t) < 1e-6
    k = np.sqrt(np.where(small, 1.0, k2))
    g = np.where(small, 0.0, np.abs(k.imag) * h)
    ep = np.exp(1j * k * h - g)
    em = np.exp(-1j * k * h - g)
    c = np.where(small, 1 - t / 2 + t * t / 24, (ep + em) / 2)
    s = np.where(small, h * (1 - t / 6 + t * t / 120), (ep - em) / (2j * k))
    return c, s, -k2 * s, g


def _segments(q: PotentialGrid, x0: float, x1: float):
    lo, hi = min(x0, x1), max(x0, x1)
    if q.interpolation == "constant":
        pts = q.edges
    else:
        pts = q.nodes
    pts = pts[(pts > lo) & (pts < hi)]
    grid = np.unique(np.concatenate(([lo, hi], pts, [x for x in (-q.S, q.S) if lo < x < hi])))
    return grid


def transfer_product(q: PotentialGrid, lam, x0: float, x1: float) -> np.ndarray:
    """Exact fundamental matrix mapping ``(y, y')(x0)`` to ``(y, y')(x1)``.

    ``q`` must be piecewise constant and ``[x0, x1]`` must not straddle 0.
    Returns an array of shape ``lam.shape + (2, 2)``.
    """
    if q.interpolation != "constant":
        raise ContractViolation("transfer_product needs a piecewise-constant potential")
    _check_side(x0, x1)
    lam = np.asarray(lam, dtype=complex)
    t11 = np.ones(lam.shape, dtype=complex)
    t12 = np.zeros(lam.shape, dtype=complex)
    t21 = np.zeros(lam.shape, dtype=complex)
    t22 = np.ones(lam.shape, dtype=complex)
    if x0 != x1:
        grid = _segments(q, x0, x1)
        if x1 < x0:
            grid = grid[::-1]
        for a, b in zip(grid[:-1], grid[1:]):
            qv = float(q(0.5 * (a + b)))
            c, s, d = cell_propagator(lam, qv, b - a)
            t11, t12, t21, t22 = (
                c * t11 + s * t21,
                c * t12 + s * t22,
                d * t11 + c * t21,
                d * t12 + c * t22,
            )
    return np.stack([np.stack([t11, t12], -1), np.stack([t21, t22], -1)], -2)


def projective_product(q: PotentialGrid, lam, x0: float, x1: float, Y) -> np.ndarray:
    """``transfer_product(q, lam, x0, x1) @ Y`` up to a positive factor per ``lam``.

    Each cell step is scaled and the running product renormalised, so the
    result stays finite where the exact product would overflow (large
    negative ``lam``).  Ratios of entries are exact.  ``Y`` has shape
    ``lam.shape + (2, k)``.
    """
    if q.interpolation != "constant":
        raise ContractViolation("projective_product needs a piecewise-constant potential")
    _check_side(x0, x1)
    lam = np.asarray(lam, dtype=complex)
    Y = np.array(Y, dtype=complex)
    if x0 == x1:
        return Y
    grid = _segments(q, x0, x1)
    if x1 < x0:
        grid = grid[::-1]
    for a, b in zip(grid[:-1], grid[1:]):
        c, s, d, _ = scaled_cell_propagator(lam, float(q(0.5 * (a + b))), b - a)
        y, yp = Y[..., 0, :], Y[..., 1, :]
        Y = np.stack([c[..., None] * y + s[..., None] * yp, d[..., None] * y + c[..., None] * yp], -2)
        Y /= np.max(np.abs(Y), axis=(-2, -1), keepdims=True)
    return Y


def _rk_segment(q: PotentialGrid, lam: complex, a: float, b: float, y, rtol, atol):
    if q.interpolation == "constant":
        qv = float(q(0.5 * (a + b)))

        def rhs(x, Y):
            return np.array([Y[1], (qv - lam) * Y[0]])

    else:

        def rhs(x, Y):
            return np.array([Y[1], (float(q(x)) - lam) * Y[0]])

    sol = solve_ivp(rhs, (a, b), np.asarray(y, dtype=complex), method="DOP853", rtol=rtol, atol=atol)
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        raise IntegrationError(f"integration from x={a} to x={b} at lambda={lam} failed: {sol.message}")
    return sol.y[:, -1]


def rk_propagate(q: PotentialGrid, lam: complex, x0: float, x1: float, y, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """Adaptive Runge-Kutta propagation of one state vector ``(y, y')``.

    Integration restarts at every breakpoint of ``q`` so that jumps of a
    piecewise-constant potential never sit inside a step.
    """
    _check_side(x0, x1)
    y = np.asarray(y, dtype=complex)
    if x0 == x1:
        return y.copy()
    grid = _segments(q, x0, x1)
    if x1 < x0:
        grid = grid[::-1]
    for a, b in zip(grid[:-1], grid[1:]):
        y = _rk_segment(q, complex(lam), a, b, y, rtol, atol)
    return y


def propagate(
    q: PotentialGrid,
    zeta: complex,
    from_x: float,
    to_x: float,
    init: StateVector,
    method: Method = "rk",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> StateVector:
    """Propagate ``init`` from ``from_x`` to ``to_x`` at ``lambda = zeta**2``.

    The interval must lie on one side of the origin.  The default is the
    adaptive Runge-Kutta integrator; ``method="exact"`` uses the transfer
    product (piecewise-constant ``q`` only).
    """
    if init.x != from_x:
        raise ContractViolation(f"initial state sits at x={init.x}, expected {from_x}")
    _check_side(from_x, to_x)
    zeta = complex(zeta)
    lam = zeta * zeta
    how = _resolve_method(q, method)
    if how == "exact":
        T = transfer_product(q, lam, from_x, to_x)
        out = T @ init.vector
    else:
        out = rk_propagate(q, lam, from_x, to_x, init.vector, rtol, atol)
    side = init.side
    if to_x != 0.0:
        side = None
    elif from_x != 0.0:
        side = "-" if from_x < 0 else "+"
    return StateVector(out[0], out[1], to_x, zeta, side)


def apply_transfer(M: TransferMatrix, s: StateVector) -> StateVector:
    """Map the state at ``0-`` to the state at ``0+``."""
    if s.x != 0.0 or s.side == "+":
        raise ContractViolation("apply_transfer expects a state at 0-")
    y, yp = M.array @ s.vector
    return StateVector(y, yp, 0.0, s.zeta, "+")


def apply_transfer_inv(M: TransferMatrix, s: StateVector) -> StateVector:
    """Map the state at ``0+`` back to ``0-`` with ``M^{-1}``."""
    if s.x != 0.0 or s.side == "-":
        raise ContractViolation("apply_transfer_inv expects a state at 0+")
    y, yp = M.inverse().array @ s.vector
    return StateVector(y, yp, 0.0, s.zeta, "-")


def wronskian(u: StateVector, v: StateVector) -> complex:
    """``u v' - v u'`` for two states at the same point and spectral parameter."""
    if u.x != v.x or (u.side and v.side and u.side != v.side):
        raise ContractViolation("Wronskian needs both states at the same evaluation point")
    if not np.isclose(u.zeta, v.zeta, rtol=1e-14, atol=0.0) and u.zeta != v.zeta:
        raise ContractViolation("Wronskian needs both states at the same spectral parameter")
    return u.y * v.yp - v.y * u.yp


def evolve(
    q: PotentialGrid,
    M: TransferMatrix,
    lam,
    x0: float,
    Y0,
    x1: float,
    side: Optional[str] = None,
    method: Method = "auto",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Propagate solution data from ``x0`` to ``x1``, applying the transfer condition at 0.

    ``lam`` has shape ``(n,)`` (or is a scalar) and ``Y0`` has shape
    ``(2,)``, ``(2, k)`` or ``(n, 2, k)``.  When ``x1 == 0`` the ``side``
    argument selects ``0-`` or ``0+``; by default the side reached first.
    Returns an array of shape ``(n, 2, k)`` (``k = 1`` for vector input).
    """
    if x0 == 0.0:
        raise ContractViolation("evolve needs a nonzero starting point")
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    Y = np.asarray(Y0, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    Y = np.broadcast_to(Y, lam.shape + Y.shape[-2:]).copy()
    how = _resolve_method(q, method)
    start_side = "-" if x0 < 0 else "+"
    if x1 == 0.0:
        end_side = side or start_side
    else:
        end_side = "-" if x1 < 0 else "+"

    def leg(Y, a, b):
        if how == "exact":
            return transfer_product(q, lam, a, b) @ Y
        out = np.empty_like(Y)
        for i, l in enumerate(lam):
            for j in range(Y.shape[-1]):
                out[i, :, j] = rk_propagate(q, l, a, b, Y[i, :, j], rtol, atol)
        return out

    if start_side == end_side:
        return leg(Y, x0, x1)
    Y = leg(Y, x0, 0.0)
    T = M.array if start_side == "-" else M.inverse().array
    Y = T @ Y
    return leg(Y, 0.0, x1)
