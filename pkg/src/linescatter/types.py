"""Domain types shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .exceptions import ContractViolation, DomainError

DET_TOL = 1e-12

Interpolation = Literal["constant", "linear"]


@dataclass(frozen=True)
class TransferMatrix:
    """Real 2x2 matrix ``M`` acting as ``(y, y')(0+) = M (y, y')(0-)``.

    Construction rejects matrices whose determinant differs from one by
    more than ``1e-12``.
    """

    m11: float
    m12: float
    m21: float
    m22: float

    def __post_init__(self):
        for name in ("m11", "m12", "m21", "m22"):
            value = getattr(self, name)
            if isinstance(value, complex) or not np.isfinite(value):
                raise DomainError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if abs(self.det - 1.0) > DET_TOL:
            raise DomainError(f"transfer matrix must have det 1, got det = {self.det!r}")

    @classmethod
    def from_array(cls, a) -> "TransferMatrix":
        a = np.asarray(a, dtype=float)
        if a.shape != (2, 2):
            raise ContractViolation(f"expected a 2x2 array, got shape {a.shape}")
        return cls(a[0, 0], a[0, 1], a[1, 0], a[1, 1])

    @classmethod
    def identity(cls) -> "TransferMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def inverse(self) -> "TransferMatrix":
        # det = 1, so the adjugate is the inverse
        return TransferMatrix(self.m22, -self.m12, -self.m21, self.m11)

    @property
    def is_diagonal_case(self) -> bool:
        """True when ``m12`` vanishes (to ``1e-14``)."""
        return abs(self.m12) < 1e-14


@dataclass(frozen=True, eq=False)
class PotentialGrid:
    """Sampled real potential with essential support inside ``[-S, S]``.

    ``interpolation="constant"`` assigns each node the cell bounded by the
    midpoints to its neighbours (the outer cells end at ``-S`` and ``S``);
    ``"linear"`` interpolates between nodes and holds the end values out to
    ``+-S``.  The potential vanishes outside ``[-S, S]``.
    """

    support_bound: float
    nodes: np.ndarray
    values: np.ndarray
    interpolation: Interpolation = "constant"

    def __post_init__(self):
        S = float(self.support_bound)
        if not np.isfinite(S) or S <= 0:
            raise DomainError(f"support bound must be finite and positive, got {S!r}")
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float)).copy()
        values = np.atleast_1d(np.asarray(self.values))
        if np.iscomplexobj(values):
            if np.any(values.imag != 0):
                raise DomainError("potential must be real valued")
            values = values.real
        values = values.astype(float).copy()
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size == 0:
            raise ContractViolation("nodes and values must be non-empty 1-D arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ContractViolation("nodes must be strictly increasing")
        if nodes[0] < -S or nodes[-1] > S:
            raise ContractViolation("all nodes must lie in [-S, S]")
        if not np.all(np.isfinite(values)):
            raise DomainError("potential values must be finite")
        if self.interpolation not in ("constant", "linear"):
            raise ContractViolation(f"unknown interpolation {self.interpolation!r}")
        nodes.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "support_bound", S)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    # constructors -----------------------------------------------------------

    @classmethod
    def cells(cls, values, S: float) -> "PotentialGrid":
        """Piecewise-constant potential on ``len(values)`` equal cells of ``[-S, S]``."""
        values = np.atleast_1d(np.asarray(values, dtype=float))
        edges = np.linspace(-S, S, values.size + 1)
        return cls(S, 0.5 * (edges[:-1] + edges[1:]), values, "constant")

    @classmethod
    def zero(cls, S: float = 1.0) -> "PotentialGrid":
        return cls.cells([0.0], S)

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        S: float,
        n: int = 400,
        interpolation: Interpolation = "constant",
    ) -> "PotentialGrid":
        """Sample ``func`` on ``n`` points of ``[-S, S]``.

        For the piecewise-constant representation the samples are cell
        averages (5-point Gauss-Legendre per cell), so integrals of ``q`` are
        preserved to high order.
        """
        if interpolation == "constant":
            edges = np.linspace(-S, S, n + 1)
            gx, gw = np.polynomial.legendre.leggauss(5)
            mid = 0.5 * (edges[:-1] + edges[1:])
            half = 0.5 * np.diff(edges)
            pts = mid[:, None] + half[:, None] * gx[None, :]
            vals = (np.asarray(func(pts), dtype=float) * gw[None, :]).sum(axis=1) / 2.0
            return cls(S, mid, vals, "constant")
        xs = np.linspace(-S, S, n)
        return cls(S, xs, np.asarray(func(xs), dtype=float), "linear")

    # geometry -----------------------------------------------------------------

    @property
    def S(self) -> float:
        return self.support_bound

    @property
    def edges(self) -> np.ndarray:
        """Cell edges of the piecewise-constant representation."""
        mids = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return np.concatenate(([-self.S], mids, [self.S]))

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def breakpoints(self) -> np.ndarray:
        """Points where the potential (or its derivative) may jump, plus 0 and ``+-S``."""
        pts = self.edges if self.interpolation == "constant" else self.nodes
        return np.unique(np.concatenate((pts, [-self.S, 0.0, self.S])))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= -self.S) & (x <= self.S)
        if self.interpolation == "constant":
            idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, self.nodes.size - 1)
            out = self.values[idx]
        else:
            out = np.interp(x, self.nodes, self.values)
        return np.where(inside, out, 0.0)

    def pieces(self):
        """Constant pieces ``(left, right, value)`` covering ``[-S, S]``, split at 0.

        Only meaningful for the piecewise-constant representation.
        """
        if self.interpolation != "constant":
            raise ContractViolation("pieces() requires a piecewise-constant potential")
        e = self.edges
        lefts, rights, vals = [], [], []
        for a, b, v in zip(e[:-1], e[1:], self.values):
            if a < 0.0 < b:
                lefts += [a, 0.0]
                rights += [0.0, b]
                vals += [v, v]
            else:
                lefts.append(a)
                rights.append(b)
                vals.append(v)
        return np.array(lefts), np.array(rights), np.array(vals)

    def growth_functional(self) -> float:
        """Discrete ``sum (1 + |x_i|) |q_i| dx_i``."""
        if self.interpolation == "constant":
            w = self.cell_widths
        else:
            w = np.gradient(self.nodes) if self.nodes.size > 1 else np.array([2 * self.S])
        return float(np.sum((1.0 + np.abs(self.nodes)) * np.abs(self.values) * w))

    def integral(self) -> float:
        if self.interpolation == "constant":
            return float(np.sum(self.values * self.cell_widths))
        xs = np.concatenate(([-self.S], self.nodes, [self.S]))
        ys = np.concatenate(([self.values[0]], self.values, [self.values[-1]]))
        return float(np.trapezoid(ys, xs))

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))


@dataclass
class StateVector:
    """Value and derivative ``(y, y')`` of a solution at ``x``.

    ``side`` disambiguates the two limits at the origin (``"-"`` or ``"+"``).
    """

    y: complex
    yp: complex
    x: float
    zeta: complex
    side: Optional[str] = None

    def __post_init__(self):
        self.y = complex(self.y)
        self.yp = complex(self.yp)
        self.zeta = complex(self.zeta)
        self.x = float(self.x)
        if not all(np.isfinite(v) for v in (self.y, self.yp, self.zeta)):
            raise DomainError("state components must be finite")
        if self.side not in (None, "-", "+"):
            raise ContractViolation(f"side must be '-', '+' or None, got {self.side!r}")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.y, self.yp])


@dataclass(eq=False)
class ScatteringData:
    """Reflection samples on a real frequency grid plus bound-state parameters.

    ``A`` and ``B`` are optional companion traces on the same grid; when
    present they are used instead of reconstructing ``A`` from ``R``.
    """

    xi: np.ndarray
    R: np.ndarray
    etas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None

    def __post_init__(self):
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        self.R = np.atleast_1d(np.asarray(self.R, dtype=complex))
        self.etas = np.atleast_1d(np.asarray(self.etas, dtype=float))
        if self.xi.shape != self.R.shape or self.xi.ndim != 1:
            raise ContractViolation("xi and R must be 1-D arrays of equal length")
        if np.any(self.xi == 0.0):
            raise ContractViolation("0 must not belong to the frequency grid")
        if np.any(np.diff(self.xi) <= 0):
            raise ContractViolation("xi must be strictly increasing")
        if np.any(np.abs(self.R) >= 1.0):
            raise DomainError("|R| must be strictly below 1 on the grid")
        if self.etas.size and (np.any(self.etas <= 0) or np.any(np.diff(self.etas) <= 0)):
            raise ContractViolation("etas must be positive and strictly increasing")
        for name in ("A", "B"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.atleast_1d(np.asarray(arr, dtype=complex))
                if arr.shape != self.xi.shape:
                    raise ContractViolation(f"{name} must have the same length as xi")
                setattr(self, name, arr)

    @property
    def has_AB(self) -> bool:
        return self.A is not None and self.B is not None

    def positive(self) -> "ScatteringData":
        """Restriction to ``xi > 0``, mirrored from ``xi < 0`` by conjugation if needed."""
        pos = self.xi > 0
        if pos.any():
            sl = lambda a: None if a is None else a[pos]
            return ScatteringData(self.xi[pos], self.R[pos], self.etas, sl(self.A), sl(self.B))
        order = np.argsort(-self.xi)
        cj = lambda a: None if a is None else np.conj(a[order])
        return ScatteringData(-self.xi[order], np.conj(self.R[order]), self.etas, cj(self.A), cj(self.B))


@dataclass
class ComplexFunctionTrace:
    """Samples of a complex function, e.g. ``A``, ``B``, ``Delta`` or ``m``."""

    abscissae: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.abscissae = np.atleast_1d(np.asarray(self.abscissae))
        self.values = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if self.abscissae.shape[0] != self.values.shape[0]:
            raise ContractViolation("abscissae and values must have equal lengths")

    def __len__(self):
        return self.abscissae.shape[0]
