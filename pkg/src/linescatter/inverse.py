"""Transfer matrix and scattering coefficients from the scattering data.

The transfer matrix is read off the large-frequency behaviour of ``R``:
``R -> C2`` with ``|C2| < 1`` when ``m12 = 0`` and ``R -> -1`` when
``m12 != 0``.  ``A`` is rebuilt in the upper half-plane as a prefactor times
a Blaschke product times the exponential of a Cauchy integral of
``log(1 - |R|^2)``; then ``B = R A`` on the real axis.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from ._fitting import inverse_power_fit
from .exceptions import ContractViolation, DomainError, InconclusiveFit, NumericalDegeneracy
from .types import ComplexFunctionTrace, ScatteringData, TransferMatrix

Case = Literal["diag", "offdiag"]


class ReconstructionWarning(UserWarning):
    """Reconstructed ``A``/``B`` are inconsistent with unitarity."""


@dataclass
class KFit:
    """Slope ``K1`` and intercept ``K2`` of ``4 / (1 - |R|^2)`` against ``xi^2``."""

    K1: float
    K2: float
    residual: float


@dataclass
class MReconstruction:
    """What the scattering data determine about the transfer matrix.

    Entries that the data leave free are ``None``: ``m21`` in the diagonal
    case, and everything except ``m22 = C1 m12`` in the off-diagonal case
    when no ``K`` fit is supplied.  ``branches`` lists every admissible
    completion; the top-level entries repeat the selected one.
    """

    case: Case
    C1: Optional[float] = None
    C2: Optional[float] = None
    m11: Optional[float] = None
    m12: Optional[float] = None
    m21: Optional[float] = None
    m22: Optional[float] = None
    branches: list = field(default_factory=list)
    constraint: str = ""
    K: Optional[KFit] = None

    @property
    def trace(self) -> Optional[float]:
        if self.m11 is None or self.m22 is None:
            return None
        return self.m11 + self.m22

    @property
    def sign(self) -> int:
        """Sign of the selected trace branch (the sign of ``A`` at infinity)."""
        tr = self.trace
        if tr is None or tr == 0:
            return 1 if (self.m12 or 0) >= 0 else -1
        return 1 if tr > 0 else -1

    def matrix(self, m21: Optional[float] = None) -> TransferMatrix:
        """The selected branch as a :class:`TransferMatrix`; ``m21`` fills a free entry."""
        m21 = self.m21 if self.m21 is not None else m21
        if None in (self.m11, self.m12, self.m22) or m21 is None:
            raise ContractViolation("the reconstruction leaves entries undetermined; pass m21 or K")
        return TransferMatrix(self.m11, self.m12, m21, self.m22)

    def select(self, index: int) -> "MReconstruction":
        """Copy with branch ``index`` promoted to the top-level entries."""
        b = self.branches[index]
        return MReconstruction(self.case, self.C1, self.C2, b["m11"], b["m12"], b["m21"], b["m22"],
                               list(self.branches), self.constraint, self.K)

    @classmethod
    def from_matrix(cls, M: TransferMatrix) -> "MReconstruction":
        """Reconstruction record of a known matrix (no ambiguity left)."""
        entries = dict(m11=M.m11, m12=M.m12, m21=M.m21, m22=M.m22)
        if M.is_diagonal_case:
            C2 = (M.m22 - M.m11) / (M.m11 + M.m22)
            return cls("diag", C2=C2, branches=[entries], constraint="m11*m22 = 1", **entries)
        return cls("offdiag", C1=M.m22 / M.m12, branches=[entries],
                   constraint="m12*(C1*m11 - m21) = 1", **entries)

    def to_dict(self) -> dict:
        def num(v, free="undetermined"):
            return free if v is None else float(v)

        return {
            "case": self.case,
            "C1": None if self.C1 is None else float(self.C1),
            "C2": None if self.C2 is None else float(self.C2),
            "m11": num(self.m11, None),
            "m12": num(self.m12, None),
            "m21": num(self.m21, "undetermined" if self.case == "diag" else "constrained"),
            "m22": num(self.m22, None),
            "branches": [{k: num(v) for k, v in b.items()} for b in self.branches],
            "constraint": self.constraint,
            "K": None if self.K is None else {"K1": self.K.K1, "K2": self.K.K2, "residual": self.K.residual},
        }


# -- tail fits ---------------------------------------------------------------------


def _tail(sd: ScatteringData, fraction: float = 1 / 3):
    pos = sd.positive()
    n = max(3, int(np.ceil(fraction * pos.xi.size)))
    return pos.xi[-n:], pos.R[-n:]


def _require_reach(sd: ScatteringData, reach: float = 50.0):
    if np.max(np.abs(sd.xi)) < reach:
        raise ContractViolation(f"the frequency grid must reach |xi| >= {reach}")


def classify_case(sd: ScatteringData, offdiag_tol: float = 0.01, diag_tol: float = 0.1) -> Case:
    """Decide between ``m12 = 0`` and ``m12 != 0`` from the tail of ``R``.

    The constant term ``c0`` of a fit ``R ~ c0 + c1/xi + c2/xi^2`` is ``-1``
    exactly when ``m12 != 0`` and satisfies ``|c0| < 1`` otherwise.
    """
    _require_reach(sd)
    xi, R = _tail(sd)
    coef, _ = inverse_power_fit(xi, R, order=2)
    d = abs(coef[0] + 1)
    if d < offdiag_tol and abs(np.mean(R) + 1) < 0.1:
        C1_coef, res = inverse_power_fit(xi, xi * (R + 1) / 2j, order=1)
        if np.all(np.isfinite(C1_coef)):
            return "offdiag"
    if d > diag_tol:
        return "diag"
    raise InconclusiveFit(
        f"tail of R ends at distance {d:.3g} from -1; extend the frequency grid to decide the case"
    )


def estimate_C2(sd: ScatteringData, order: int = 1) -> float:
    """``C2 = lim R(xi)`` from a fit ``C2 + c/xi`` on the largest third of the grid."""
    _require_reach(sd)
    xi, R = _tail(sd)
    coef, _ = inverse_power_fit(xi, R, order=order)
    C2 = coef[0]
    if abs(C2.imag) > 1e-6:
        warnings.warn(f"imaginary part of the R limit is {C2.imag:.3g}", RuntimeWarning, stacklevel=2)
    if abs(C2.real) >= 1:
        raise DomainError(f"|C2| = {abs(C2.real):.6g} >= 1 is inconsistent with |R| < 1")
    return float(C2.real)


def reconstruct_M_diag(C2: float, sign: int = 1) -> MReconstruction:
    """Transfer matrix for ``m12 = 0``: ``m22 = +-sqrt((1+C2)/(1-C2))``, ``m11 = 1/m22``.

    Both sign branches are listed; ``sign`` picks the one with that trace sign.
    """
    if not abs(C2) < 1:
        raise DomainError("C2 must satisfy |C2| < 1")
    m22 = np.sqrt((1 + C2) / (1 - C2))
    m11 = np.sqrt((1 - C2) / (1 + C2))
    branches = [dict(m11=s * m11, m12=0.0, m21=None, m22=s * m22) for s in (1, -1)]
    rec = MReconstruction("diag", C2=float(C2), branches=branches, constraint="m11*m22 = 1; m21 undetermined")
    return rec.select(0 if sign > 0 else 1)


def estimate_C1(sd: ScatteringData, order: int = 4) -> float:
    """``C1 = lim xi (R + 1) / (2i)`` by a polynomial fit in ``1/xi`` on the grid tail.

    Oscillating potential contributions average out in the least-squares fit.
    """
    _require_reach(sd)
    xi, R = _tail(sd)
    y = xi * (R + 1) / 2j
    coef, res = inverse_power_fit(xi, y, order=order)
    if not np.isfinite(coef[0]):
        raise InconclusiveFit(f"C1 fit did not converge (rms residual {res:.3g})")
    return float(coef[0].real)


def estimate_K(sd: ScatteringData) -> KFit:
    """Fit ``4 / (1 - |R|^2) = K1 xi^2 + K2 + K3 / xi^2`` and report ``K1, K2``.

    For ``q = 0`` the left side is ``4 |A|^2`` and the fit is exact with
    ``K1 = m12^2``, ``K2 = m11^2 + m22^2 + 2`` and ``K3 = m21^2``; for other
    potentials it is an approximation whose rms residual is reported.
    """
    pos = sd.positive()
    y = 4.0 / (1.0 - np.abs(pos.R) ** 2)
    x0 = pos.xi.min()
    V = np.stack([(pos.xi / x0) ** 2, np.ones_like(pos.xi), (x0 / pos.xi) ** 2], axis=1)
    c, *_ = np.linalg.lstsq(V, y, rcond=None)
    K1, K2 = c[0] / x0**2, c[1]
    if K1 <= 0:
        raise DomainError("negative slope: data inconsistent with m12 != 0")
    res = float(np.sqrt(np.mean((y - V @ c) ** 2)))
    return KFit(float(K1), float(K2), res)


def reconstruct_M_offdiag(C1: float, aux: Optional[KFit | Sequence[float]] = None, select: int = 0,
                          model: Literal["trace", "free"] = "trace") -> MReconstruction:
    """Transfer matrix for ``m12 != 0``.

    Without ``aux`` only ``m22 = C1 m12`` and ``m12 (C1 m11 - m21) = 1`` are
    known.  With ``aux = (K1, K2)`` and ``K1 = m12^2`` there are up to four
    candidate matrices.  ``model="trace"`` reads ``K2 = (m11 + m22)^2``, which
    holds when ``m21 = 0``; ``model="free"`` reads ``K2 = m11^2 + m22^2 + 2``,
    the exact intercept for ``q = 0`` and any ``M`` (the two agree when
    ``m21 = 0``).
    """
    if model not in ("trace", "free"):
        raise ContractViolation(f"unknown model {model!r}")
    constraint = "m22 = C1*m12; m12*(C1*m11 - m21) = 1"
    if aux is None:
        return MReconstruction("offdiag", C1=float(C1), constraint=constraint)
    if isinstance(aux, KFit):
        kfit = aux
    else:
        K1, K2 = aux
        kfit = KFit(float(K1), float(K2), 0.0)
    if kfit.K1 <= 0:
        raise DomainError("K1 must be positive")
    branches = []
    for s12, str_ in itertools.product((1, -1), (1, -1)):
        m12 = s12 * np.sqrt(kfit.K1)
        m22 = C1 * m12
        if model == "trace":
            m11 = str_ * np.sqrt(max(kfit.K2, 0.0)) - m22
        else:
            m11 = str_ * np.sqrt(max(kfit.K2 - 2.0 - m22**2, 0.0))
        m21 = (m11 * m22 - 1) / m12
        cand = dict(m11=float(m11), m12=float(m12), m21=float(m21), m22=float(m22))
        if cand not in branches:
            branches.append(cand)
    # positive trace first, then positive m12
    branches.sort(key=lambda b: (-(np.sign(round(b["m11"] + b["m22"], 12))), -np.sign(b["m12"])))
    rec = MReconstruction("offdiag", C1=float(C1), branches=branches, constraint=constraint, K=kfit)
    return rec.select(select)


# -- dispersion reconstruction of A -----------------------------------------------


def blaschke(etas, zeta):
    """Finite product ``prod (zeta - i eta_j) / (zeta + i eta_j)``."""
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    zeta = np.asarray(zeta, dtype=complex)
    if np.any(zeta.imag < 0):
        raise DomainError("the Blaschke factor is used for Im zeta >= 0")
    out = np.ones(zeta.shape, dtype=complex)
    for eta in etas:
        den = zeta + 1j * eta
        if np.any(den == 0):
            raise DomainError(f"zeta = -i*{eta} is a pole of the Blaschke product")
        out = out * (zeta - 1j * eta) / den
    return out if out.ndim else complex(out)


def _full_line(sd: ScatteringData):
    """Grid covering both signs of ``xi`` (mirrored by symmetry when one side is missing)."""
    xi, R = sd.xi, sd.R
    if np.all(xi > 0):
        xi = np.concatenate((-xi[::-1], xi))
        R = np.concatenate((np.conj(R[::-1]), R))
    elif np.all(xi < 0):
        xi = np.concatenate((xi, -xi[::-1]))
        R = np.concatenate((R, np.conj(R[::-1])))
    return xi, R


def _kernel(xi, R, mrec: MReconstruction):
    log1mR = np.log1p(-np.abs(R) ** 2)
    if mrec.case == "diag":
        return np.log1p(-mrec.C2**2) - log1mR
    if mrec.m12 is None or mrec.trace is None:
        raise ContractViolation("off-diagonal dispersion needs m12 and m11 + m22 (supply a K fit)")
    return 2 * np.log(2.0) - np.log(xi**2 * mrec.m12**2 + mrec.trace**2) - log1mR


def _tail_integral(X, zeta):
    """``int_X^inf du / (u^2 (u - zeta))``."""
    zeta = np.asarray(zeta, dtype=complex)
    r = zeta / X
    small = np.abs(r) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = -np.log1p(-r) / zeta**2 - 1.0 / (zeta * X)
    series = (1 / 2 + r / 3 + r**2 / 4 + r**3 / 5) / X**2
    return np.where(small, series, exact)


def cauchy_integral(xi, g, zeta, boundary: bool = False, chunk: int = 2**22):
    """``(1 / 2 pi i) int g(t) / (t - zeta) dt`` over the real line.

    Trapezoid rule on the sample grid after subtracting ``g(Re zeta)``
    (whose integral is done in closed form) plus ``c/t^2`` tails fitted at
    the grid ends.  With ``boundary=True`` the limit ``Im zeta -> 0+`` is
    returned for real ``zeta`` inside the grid (principal value plus half
    residue).  Returns the value and a quadrature error estimate obtained by
    repeating the rule on every second node.
    """
    xi = np.asarray(xi, dtype=float)
    g = np.asarray(g, dtype=float)
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    lo, hi = xi[0], xi[-1]
    if boundary:
        if np.any(zeta.imag != 0) or np.any((zeta.real < lo) | (zeta.real > hi)):
            raise ContractViolation("boundary values need real points inside the grid")
    elif np.any(zeta.imag <= 0):
        raise ContractViolation("the Cauchy integral needs Im zeta > 0")
    # pad both ends with samples of the c/t^2 tail model so grid endpoints become interior points
    right = hi + (hi - xi[-2]) * np.arange(1, 9)
    left = lo - (xi[1] - lo) * np.arange(8, 0, -1)
    g = np.concatenate((g[0] * lo**2 / left**2, g, g[-1] * hi**2 / right**2))
    xi = np.concatenate((left, xi, right))

    def rule(x, gg, z):
        ga = np.interp(z.real, x, gg)[:, None]
        den = x[None, :] - z[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (gg[None, :] - ga) / den
        hit = den == 0
        if np.any(hit):
            f = np.where(hit, np.broadcast_to(np.gradient(gg, x), f.shape), f)
        main = np.trapezoid(f, x, axis=1)
        if boundary:
            logs = np.log(np.abs(x[-1] - z.real)) - np.log(np.abs(x[0] - z.real)) + 1j * np.pi
        else:
            logs = np.log(x[-1] - z) - np.log(x[0] - z)
        tails = gg[-1] * x[-1] ** 2 * _tail_integral(x[-1], z) - gg[0] * x[0] ** 2 * _tail_integral(-x[0], -z)
        return (main + ga[:, 0] * logs + tails) / (2j * np.pi)

    keep = np.arange(0, xi.size, 2)
    if keep[-1] != xi.size - 1:
        keep = np.append(keep, xi.size - 1)
    step = max(1, chunk // xi.size)
    val = np.empty(zeta.shape, dtype=complex)
    err = np.empty(zeta.shape)
    for i in range(0, zeta.size, step):
        z = zeta[i:i + step]
        v = rule(xi, g, z)
        val[i:i + step] = v
        err[i:i + step] = np.abs(v - rule(xi[keep], g[keep], z))
    return val, err


def _zero_pole_weight(xi, g, n: int = 6) -> float:
    """Weight ``beta`` of a ``log(t^2)`` singularity of the kernel at ``t = 0``.

    ``A`` generically has a simple pole at 0, so ``1 - |R|^2`` vanishes like
    ``t^2`` and the kernel behaves like ``-log(t^2)``; when ``A(0)`` is finite
    the kernel is bounded, and a prefactor vanishing at 0 (trace zero) adds
    one more order.  The integer weight is read off the slope at the
    smallest grid frequencies.
    """
    order = np.argsort(np.abs(xi))[:n]
    if np.abs(xi[order]).max() > 1.0:
        return 0.0
    slope = np.polyfit(np.log(xi[order] ** 2), g[order], 1)[0]
    return float(np.clip(np.round(slope), -2, 0))


def _kernel_transform(xi, g, zeta, boundary: bool = False):
    """Cauchy transform of the kernel with the log singularity at 0 removed in closed form.

    ``log(t^2 / (t^2 + 1))`` is the real part of the boundary value of
    ``2 log(z / (z + i))``, so its transform is ``log(z / (z + i))``.
    """
    beta = _zero_pole_weight(xi, g)
    if beta:
        g = g - beta * np.log(xi**2 / (xi**2 + 1))
    F, err = cauchy_integral(xi, g, zeta, boundary=boundary)
    if beta:
        z = np.atleast_1d(np.asarray(zeta, dtype=complex))
        F = F + beta * np.log(z / (z + 1j))
    return F, err


def _prefactor(mrec: MReconstruction, zeta):
    if mrec.case == "diag":
        return mrec.sign / np.sqrt(1 - mrec.C2**2) * np.ones_like(zeta)
    # the constant is chosen so that the prefactor has no zero in the upper half-plane
    c = np.sign(mrec.m12) * abs(mrec.trace)
    return (mrec.m12 * zeta + 1j * c) / 2j


def dispersion_A(sd: ScatteringData, mrec: MReconstruction, zeta, quad_tol: float = 0.05):
    """``A(zeta)`` for ``Im zeta > 0`` rebuilt from ``R`` and the bound states.

    Raises :class:`NumericalDegeneracy` when the quadrature error estimate of
    the exponent exceeds ``quad_tol`` (the grid is too sparse there).
    """
    scalar = np.ndim(zeta) == 0
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    if np.any(zeta.imag <= 0):
        raise ContractViolation("dispersion_A needs Im zeta > 0; use dispersion_A_boundary on the axis")
    xi, R = _full_line(sd)
    F, err = _kernel_transform(xi, _kernel(xi, R, mrec), zeta)
    if np.any(err > quad_tol):
        raise NumericalDegeneracy(f"quadrature error estimate {err.max():.3g} exceeds {quad_tol}; refine the grid")
    A = _prefactor(mrec, zeta) * blaschke(sd.etas, zeta) * np.exp(F)
    return complex(A[0]) if scalar else A


def dispersion_A_boundary(sd: ScatteringData, mrec: MReconstruction, xi=None,
                          method: Literal["pv", "richardson"] = "pv",
                          eps: Sequence[float] = (0.1, 0.05, 0.025)) -> ComplexFunctionTrace:
    """Real-axis values ``A(xi + i0)`` on ``xi`` (default: the data grid).

    ``method="pv"`` takes the limit analytically (principal value plus half
    residue); ``"richardson"`` extrapolates ``A(xi + i eps)`` to ``eps = 0``
    from three offsets, which is accurate only where ``|xi|`` is well above
    ``eps`` (``A`` has a pole at 0).
    """
    xs, R = _full_line(sd)
    xi = sd.xi if xi is None else np.atleast_1d(np.asarray(xi, dtype=float))
    g = _kernel(xs, R, mrec)
    if method == "pv":
        F, _ = _kernel_transform(xs, g, xi.astype(complex), boundary=True)
        A = _prefactor(mrec, xi.astype(complex)) * blaschke(sd.etas, xi.astype(complex)) * np.exp(F)
    elif method == "richardson":
        e1, e2, e3 = eps
        if not (np.isclose(e2, e1 / 2) and np.isclose(e3, e2 / 2)):
            raise ContractViolation("Richardson offsets must halve successively")
        vals = [dispersion_A(sd, mrec, xi + 1j * e, quad_tol=np.inf) for e in eps]
        r1 = 2 * vals[1] - vals[0]
        r2 = 2 * vals[2] - vals[1]
        A = (4 * r2 - r1) / 3
    else:
        raise ContractViolation(f"unknown method {method!r}")
    return ComplexFunctionTrace(xi, A, "A")


def reconstruct_B(sd: ScatteringData, A_trace: ComplexFunctionTrace, tol: float = 1e-3) -> ComplexFunctionTrace:
    """``B = R A`` on the data grid; warns when ``|A|^2 - |B|^2`` drifts from 1 by more than ``tol``."""
    if A_trace.abscissae.shape != sd.xi.shape or not np.allclose(A_trace.abscissae, sd.xi):
        raise ContractViolation("A must be sampled on the data grid")
    B = sd.R * A_trace.values
    drift = np.max(np.abs(np.abs(A_trace.values) ** 2 - np.abs(B) ** 2 - 1))
    if drift > tol:
        warnings.warn(f"unitarity residual {drift:.3g} exceeds {tol}: reconstruction inconsistent",
                      ReconstructionWarning, stacklevel=2)
    return ComplexFunctionTrace(sd.xi, B, "B")


@dataclass
class Inversion:
    """Output of :func:`invert`: matrix record plus ``A``/``B`` on the data grid."""

    mrec: MReconstruction
    A: ComplexFunctionTrace
    B: ComplexFunctionTrace


def invert(sd: ScatteringData, sign: int = 1, case: Optional[Case] = None) -> Inversion:
    """Run the whole reconstruction: case, matrix entries, ``A`` and ``B``."""
    case = case or classify_case(sd)
    if case == "diag":
        mrec = reconstruct_M_diag(estimate_C2(sd), sign=sign)
    else:
        mrec = reconstruct_M_offdiag(estimate_C1(sd), estimate_K(sd), model="free")
        if sign < 0:
            neg = [i for i, b in enumerate(mrec.branches) if b["m11"] + b["m22"] < 0]
            if neg:
                mrec = mrec.select(neg[0])
    A = dispersion_A_boundary(sd, mrec)
    with warnings.catch_warnings():
        warnings.simplefilter("always", ReconstructionWarning)
        B = reconstruct_B(sd, A)
    return Inversion(mrec, A, B)
