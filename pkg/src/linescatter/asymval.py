"""Large-lambda behaviour of ``w2``, ``v`` and ``Delta``, checked numerically.

Leading terms are written through ``cos(k s)`` and ``sin(k s) / k`` with
``k = sqrt(lambda)``, so they are even in ``k`` and carry no branch
artefacts.  Error orders are checked by log-log regression on the envelope
of the error; bounds on ``1 / |Delta|`` are checked along the rectangular
contours of the ``S sqrt(lambda)`` plane with a constant calibrated at
``k = 5``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from ._fitting import envelope_slope
from .compact import fundamental_pair_direct
from .exceptions import ContractViolation, NumericalDegeneracy
from .propagate import evolve
from .types import PotentialGrid, TransferMatrix

Quantity = Literal["w2", "w2p", "v", "vp"]
Kind = Literal["Gamma", "Upsilon"]

M12_ZERO = 1e-14


def _sqrt(lam):
    return np.sqrt(np.asarray(lam, dtype=complex))


def _cs(k, s):
    """``cos(k s)`` and ``sin(k s) / k`` (the latter with its limit ``s`` at ``k = 0``)."""
    c = np.cos(k * s)
    with np.errstate(invalid="ignore", divide="ignore"):
        sn = np.where(k == 0, s, np.sin(k * s) / np.where(k == 0, 1, k))
    return c, sn


def _offdiag(M: TransferMatrix) -> bool:
    return abs(M.m12) >= M12_ZERO


def w2_asymptotic(M: TransferMatrix, S: float, x: float, lam, derivative: bool = False):
    """Leading term of ``w2(x)`` (or ``w2'(x)``) for large ``|lambda|``.

    ``x < 0``: free solution from ``-S``.  ``x = 0``: the ``0+`` value after
    the transfer condition, by case on which entries vanish.  ``x > 0``: the
    continuation of that value.
    """
    k = _sqrt(lam)
    if x < 0:
        c, s = _cs(k, x + S)
        return c if derivative else s
    cS, sS = _cs(k, S)
    if x == 0:
        if _offdiag(M):
            if derivative:
                return M.m22 * cS if M.m22 != 0 else M.m21 * sS
            return M.m12 * cS
        return M.m22 * cS if derivative else M.m11 * sS
    cx, sx = _cs(k, x)
    if _offdiag(M):
        if derivative:
            return -M.m12 * cS * k**2 * sx
        return M.m12 * cS * cx
    if derivative:
        return -M.m11 * sS * k**2 * sx + M.m22 * cS * cx
    return M.m11 * sS * cx + M.m22 * sx * cS


def v_asymptotic(M: TransferMatrix, S: float, x: float, lam, derivative: bool = False):
    """Leading term of ``v(x)`` (or ``v'(x)``); mirror image of :func:`w2_asymptotic`.

    ``x > 0``: free solution from ``S``.  ``x = 0``: the ``0-`` value.
    ``x < 0``: its continuation.
    """
    k = _sqrt(lam)
    if x > 0:
        c, s = _cs(k, S - x)
        return c if derivative else -s
    cS, sS = _cs(k, S)
    if x == 0:
        if _offdiag(M):
            if derivative:
                return M.m11 * cS if M.m11 != 0 else M.m21 * sS
            return -M.m12 * cS
        return M.m11 * cS if derivative else -M.m22 * sS
    cx, sx = _cs(k, x)
    if _offdiag(M):
        if derivative:
            return M.m12 * cS * k**2 * sx
        return -M.m12 * cS * cx
    if derivative:
        return M.m22 * k**2 * sS * sx + M.m11 * cS * cx
    return -M.m22 * sS * cx + M.m11 * sx * cS


def error_order(M: TransferMatrix, x: float, quantity: Quantity) -> float:
    """Power of ``lambda`` in the error term on the real axis (``-1``, ``-0.5`` or ``0``)."""
    base = quantity in ("w2", "w2p") and x < 0 or quantity in ("v", "vp") and x > 0
    deriv = quantity.endswith("p")
    if base or not _offdiag(M):
        return -0.5 if deriv else -1.0
    if x == 0:
        return -0.5
    return 0.0 if deriv else -0.5


def _v_exact(q: PotentialGrid, M: TransferMatrix, lam, xs, side="-"):
    """``(v, v')`` at ``xs``; shape ``(n_lam, n_x, 2)``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    out = np.empty(lam.shape + (len(xs), 2), dtype=complex)
    for j, x in enumerate(xs):
        if x == q.S:
            out[:, j] = (0.0, 1.0)
        else:
            out[:, j] = evolve(q, M, lam, q.S, np.array([0.0, 1.0]), x, side=side)[:, :, 0]
    return out


def _exact(q: PotentialGrid, M: TransferMatrix, x: float, lam, quantity: Quantity):
    if quantity.startswith("w2"):
        pair = fundamental_pair_direct(q, M, lam, [x], side="+")
        return (pair.w2p if quantity == "w2p" else pair.w2)[:, 0]
    V = _v_exact(q, M, lam, [x], side="-")
    return V[:, 0, 1 if quantity == "vp" else 0]


def _asym(M, S, x, lam, quantity: Quantity):
    f = w2_asymptotic if quantity.startswith("w2") else v_asymptotic
    return f(M, S, x, lam, derivative=quantity.endswith("p"))


@dataclass
class SlopeFit:
    """Envelope slope of an asymptotic error against ``lambda``."""

    quantity: str
    x: float
    slope: float
    order: float
    band: float
    exact: bool
    passed: bool


def asymptotic_error_slope(q: PotentialGrid, M: TransferMatrix, S: float, x: float,
                           lambda_sweep=None, quantity: Quantity = "w2", tolerance: float = 0.25,
                           n_bins: int = 12) -> SlopeFit:
    """Fit the decay of ``|exact - leading term|`` over a real ``lambda`` sweep.

    Passes when the slope is at most ``order + tolerance``.  An error at
    rounding level everywhere is reported as ``exact`` with an undefined
    (nan) slope.
    """
    if q.S != S:
        raise ContractViolation("the potential's support bound must equal S")
    lam = np.logspace(3, 6, 400) if lambda_sweep is None else np.asarray(lambda_sweep, dtype=float)
    exact = _exact(q, M, x, lam, quantity)
    err = np.abs(exact - _asym(M, S, x, lam, quantity))
    order = error_order(M, x, quantity)
    scale = np.max(np.abs(exact)) + 1e-300
    if np.max(err) <= 1e-11 * scale:
        return SlopeFit(quantity, x, float("nan"), order, order + tolerance, True, True)
    slope = envelope_slope(lam, err, n_bins)
    return SlopeFit(quantity, x, slope, order, order + tolerance, False, bool(slope <= order + tolerance))


# -- contour bounds ---------------------------------------------------------------


def _cheb(n):
    return 0.5 * (1 - np.cos(np.pi * np.arange(n) / (n - 1)))


@dataclass
class ContourSpec:
    """Rectangle in the ``z = S sqrt(lambda)`` plane: right leg plus top and bottom legs."""

    kind: Kind
    k: int
    samples: np.ndarray

    @classmethod
    def build(cls, kind: Kind, k: int, n_per_leg: int = 200) -> "ContourSpec":
        if k < 1:
            raise ContractViolation("k must be a positive integer")
        right = np.pi / 4 + 2 * k * np.pi if kind == "Gamma" else 2 * k * np.pi
        t = _cheb(n_per_leg)
        leg1 = right + 1j * k * (2 * t - 1)
        leg2 = right * (1 - t) + 1j * k
        leg3 = right * t - 1j * k
        return cls(kind, int(k), np.concatenate((leg1, leg2, leg3)))

    @property
    def right(self) -> float:
        return float(self.samples[0].real)

    def lambdas(self, S: float) -> np.ndarray:
        return self.samples**2 / S**2


def contour_kind(M: TransferMatrix) -> Kind:
    return "Upsilon" if _offdiag(M) else "Gamma"


def _delta_bound(kind: Kind, z, S):
    decay = np.exp(-2 * np.abs(z.imag))
    return np.abs(z) / S * decay if kind == "Gamma" else decay


def _delta_on(q, M, lam):
    pair = fundamental_pair_direct(q, M, lam, [q.S], wronskian_tol=1e-6)
    return pair.w2[:, 0]


@dataclass
class DeltaBoundReport:
    kind: str
    calibration: float
    ks: list
    ratios: list
    max_ratio: float
    limit: float
    passed: bool


def delta_bound_check(q: PotentialGrid, M: TransferMatrix, S: float, contour: Optional[ContourSpec] = None,
                      ks: Sequence[int] = range(5, 21), limit: float = 3.0, n_per_leg: int = 200
                      ) -> DeltaBoundReport:
    """``max (1/|Delta|) / bound`` on each contour, relative to the ``k = ks[0]`` value.

    ``bound`` is ``|sqrt(lambda)| exp(-2 S |Im sqrt(lambda)|)`` on ``Gamma``
    contours (``m12 = 0``) and ``exp(-2 S |Im sqrt(lambda)|)`` on ``Upsilon``
    contours.  Passing a single ``contour`` evaluates only its kind.
    """
    if q.S != S:
        raise ContractViolation("the potential's support bound must equal S")
    kind = contour.kind if contour is not None else contour_kind(M)
    if kind != contour_kind(M):
        raise ContractViolation(f"{kind} contours belong to the other m12 case")
    raw = []
    for k in ks:
        c = ContourSpec.build(kind, k, n_per_leg)
        d = _delta_on(q, M, c.lambdas(S))
        if np.any(np.abs(d) == 0):
            raise NumericalDegeneracy(f"Delta vanishes on the contour k={k}; resample")
        raw.append(float(np.max(1 / np.abs(d) / _delta_bound(kind, c.samples, S))))
    cal = raw[0]
    ratios = [r / cal for r in raw]
    mx = max(ratios)
    return DeltaBoundReport(kind, cal, list(ks), ratios, mx, limit, bool(mx <= limit))


@dataclass
class PDecay:
    """Decay slopes (in ``|lambda|``) of the two solution combinations along the contours."""

    P12_slope: float
    P11_slope: float
    P12_band: float
    P11_band: float
    P12_max: list
    P11_max: list
    exact: bool
    passed: bool


def p_entry_decay(q: PotentialGrid, q_tilde: PotentialGrid, M: TransferMatrix, S: float,
                  contour_kind_: Optional[Kind] = None, ks: Sequence[int] = range(5, 21),
                  xs: Optional[Sequence[float]] = None, n_per_leg: int = 200, tolerance: float = 0.3
                  ) -> PDecay:
    """Decay of ``(v w2~ - v~ w2) / |Delta|`` and ``(w2 (v~' - v') - v (w2~' - w2')) / |Delta|``.

    The maxima over each contour and over ``xs`` (points on both sides of 0)
    are regressed against ``|lambda|`` at the right leg.  The first
    combination must decay like ``1/lambda``, the second like
    ``1/sqrt(lambda)``; both vanish identically when ``q = q_tilde``.
    """
    if q.S != S or q_tilde.S != S:
        raise ContractViolation("both potentials must have support bound S")
    kind = contour_kind_ or contour_kind(M)
    xs = [-0.6 * S, -0.2 * S, 0.3 * S, 0.7 * S] if xs is None else list(xs)
    if any(x == 0 for x in xs):
        raise ContractViolation("x = 0 is ambiguous here; pick points off the origin")
    p12, p11, scale = [], [], []
    for k in ks:
        c = ContourSpec.build(kind, k, n_per_leg)
        lam = c.lambdas(S)
        d = np.abs(_delta_on(q, M, lam))
        a12 = np.zeros(lam.size)
        a11 = np.zeros(lam.size)
        for x in xs:
            side = "-" if x < 0 else "+"
            w = fundamental_pair_direct(q, M, lam, [x], side=side, wronskian_tol=1e-6)
            wt = fundamental_pair_direct(q_tilde, M, lam, [x], side=side, wronskian_tol=1e-6)
            V = _v_exact(q, M, lam, [x], side=side)[:, 0]
            Vt = _v_exact(q_tilde, M, lam, [x], side=side)[:, 0]
            w2, w2p, w2t, w2pt = w.w2[:, 0], w.w2p[:, 0], wt.w2[:, 0], wt.w2p[:, 0]
            v, vp, vt, vpt = V[:, 0], V[:, 1], Vt[:, 0], Vt[:, 1]
            a12 = np.maximum(a12, np.abs(v * w2t - vt * w2) / d)
            a11 = np.maximum(a11, np.abs(w2 * (vpt - vp) - v * (w2pt - w2p)) / d)
        p12.append(float(a12.max()))
        p11.append(float(a11.max()))
        scale.append((c.right / S) ** 2)
    b12, b11 = -1 + tolerance, -0.5 + tolerance
    if max(p12 + p11) == 0 or max(p12 + p11) < 1e-13:
        return PDecay(float("nan"), float("nan"), b12, b11, p12, p11, True, True)
    ls = np.log(scale)
    s12 = float(np.polyfit(ls, np.log(p12), 1)[0])
    s11 = float(np.polyfit(ls, np.log(p11), 1)[0])
    return PDecay(s12, s11, b12, b11, p12, p11, False, bool(s12 <= b12 and s11 <= b11))


# -- suite ---------------------------------------------------------------------------


def _default_tilde(q: PotentialGrid) -> PotentialGrid:
    S = q.S

    def f(x):
        u = np.clip(np.asarray(x) / (0.5 * S), -0.999999, 0.999999)
        return q(x) + 0.8 * np.where(np.abs(x) < 0.5 * S, np.exp(1 - 1 / (1 - u**2)), 0.0)

    return PotentialGrid.from_function(f, S, n=max(200, q.values.size))


def appendix_suite(q: PotentialGrid, M: TransferMatrix, q_tilde: Optional[PotentialGrid] = None,
                   lambda_sweep=None, ks: Sequence[int] = range(5, 21)) -> dict:
    """Run every check for one ``(q, M)``; returns a JSON-ready report."""
    t0 = time.perf_counter()
    S = q.S
    q_tilde = _default_tilde(q) if q_tilde is None else q_tilde
    entries = []
    xs_w = [-0.5 * S, 0.0, 0.5 * S]
    for quantity in ("w2", "w2p", "v", "vp"):
        for x in xs_w:
            fit = asymptotic_error_slope(q, M, S, x, lambda_sweep, quantity)
            side = "x<0" if x < 0 else ("x=0" if x == 0 else "x>0")
            entries.append({
                "tag": f"{quantity.replace('p', chr(39))}[{side}]",
                "check": "error slope",
                "value": None if np.isnan(fit.slope) else fit.slope,
                "band": f"<= {fit.band:g}",
                "exact": fit.exact,
                "pass": fit.passed,
            })
    db = delta_bound_check(q, M, S, ks=ks)
    entries.append({
        "tag": f"1/|Delta| on {db.kind}_k",
        "check": "bound ratio vs k=%d" % ks[0],
        "value": db.max_ratio,
        "band": f"<= {db.limit:g}",
        "exact": False,
        "pass": db.passed,
    })
    pd = p_entry_decay(q, q_tilde, M, S, ks=ks)
    for name, slope, band in (("P12", pd.P12_slope, pd.P12_band), ("P11-1", pd.P11_slope, pd.P11_band)):
        entries.append({
            "tag": f"{name} on {contour_kind(M)}_k",
            "check": "decay slope in |lambda|",
            "value": None if np.isnan(slope) else slope,
            "band": f"<= {band:g}",
            "exact": pd.exact,
            "pass": bool(slope <= band) if not pd.exact else True,
        })
    return {
        "suite": "appendix",
        "matrix": {"m11": M.m11, "m12": M.m12, "m21": M.m21, "m22": M.m22},
        "support": S,
        "entries": entries,
        "passed": all(e["pass"] for e in entries),
        "runtime_s": time.perf_counter() - t0,
    }
