"""File formats: potentials (CSV), transfer matrices and scattering data (JSON).

Every writer takes an optional ``config_hash`` that is embedded in the
file: a ``# config_hash=...`` comment line in CSV files, a ``config_hash``
key in JSON files.  Writers are deterministic (sorted keys, fixed float
formatting), so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .exceptions import ContractViolation, ScatteringError
from .types import PotentialGrid, ScatteringData, TransferMatrix


class FormatError(ScatteringError, ValueError):
    """An input file could not be parsed."""

    exit_code = 1


def config_hash(config: dict, files: Iterable[str | Path] = ()) -> str:
    """Short SHA-256 of the canonical JSON form of ``config`` plus the bytes of ``files``."""
    h = hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode())
    for f in files:
        h.update(Path(f).read_bytes())
    return h.hexdigest()[:16]


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON from {path}: {exc}") from None


def _comments(lines):
    meta = {}
    for line in lines:
        if line.startswith("#") and "=" in line:
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
    return meta


# -- transfer matrix ---------------------------------------------------------------


def read_matrix(path) -> TransferMatrix:
    d = _load_json(path)
    try:
        return TransferMatrix(*(float(d[k]) for k in ("m11", "m12", "m21", "m22")))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScatteringError):
            raise
        raise FormatError(f"{path}: transfer matrix needs numeric m11, m12, m21, m22 ({exc})") from None


def write_matrix(path, M: TransferMatrix, config_hash: Optional[str] = None):
    d = {"m11": M.m11, "m12": M.m12, "m21": M.m21, "m22": M.m22}
    if config_hash:
        d["config_hash"] = config_hash
    _dump_json(path, d)


# -- potential -------------------------------------------------------------------------


def read_potential(path, S: Optional[float] = None, interpolation: str = "constant") -> PotentialGrid:
    """CSV with header ``x,q``.

    The support bound comes from ``S``, else from a ``# support=...``
    comment, else from the nodes (half a spacing beyond the outermost
    node for cell data, the outermost node for linear data).
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    meta = _comments(lines)
    rows = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(rows)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FormatError(f"{path}: empty potential file") from None
    if header != ["x", "q"]:
        raise FormatError(f"{path}: expected header 'x,q', got {','.join(header)!r}")
    try:
        data = np.array([[float(a), float(b)] for a, b in reader])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if data.size == 0:
        raise FormatError(f"{path}: no samples")
    x, qv = data[:, 0], data[:, 1]
    interpolation = meta.get("interpolation", interpolation)
    if S is None and "support" in meta:
        S = float(meta["support"])
    if S is None:
        ext = np.max(np.abs(x))
        if interpolation == "constant" and x.size > 1:
            ext += 0.5 * np.min(np.diff(x))
        S = ext if ext > 0 else 1.0
    return PotentialGrid(S, x, qv, interpolation)


def write_potential(path, q: PotentialGrid, config_hash: Optional[str] = None):
    buf = _io.StringIO()
    if config_hash:
        buf.write(f"# config_hash={config_hash}\n")
    buf.write(f"# support={q.S!r}\n# interpolation={q.interpolation}\n")
    buf.write("x,q\n")
    for x, v in zip(q.nodes, q.values):
        buf.write(f"{float(x)!r},{float(v)!r}\n")
    Path(path).write_text(buf.getvalue())


# -- scattering data ---------------------------------------------------------------


def _floats(a):
    return [float(v) for v in np.asarray(a).ravel()]


def scattering_to_dict(sd: ScatteringData, config_hash: Optional[str] = None) -> dict:
    d = {"xi": _floats(sd.xi), "R_re": _floats(sd.R.real), "R_im": _floats(sd.R.imag), "etas": _floats(sd.etas)}
    if sd.has_AB:
        d.update(A_re=_floats(sd.A.real), A_im=_floats(sd.A.imag), B_re=_floats(sd.B.real), B_im=_floats(sd.B.imag))
    if config_hash:
        d["config_hash"] = config_hash
    return d


def write_scattering(path, sd: ScatteringData, config_hash: Optional[str] = None):
    _dump_json(path, scattering_to_dict(sd, config_hash))


def read_scattering(path) -> ScatteringData:
    d = _load_json(path)
    try:
        xi = np.asarray(d["xi"], dtype=float)
        R = np.asarray(d["R_re"], dtype=float) + 1j * np.asarray(d["R_im"], dtype=float)
        etas = np.asarray(d.get("etas", []), dtype=float)
        A = B = None
        if all(k in d for k in ("A_re", "A_im", "B_re", "B_im")):
            A = np.asarray(d["A_re"], dtype=float) + 1j * np.asarray(d["A_im"], dtype=float)
            B = np.asarray(d["B_re"], dtype=float) + 1j * np.asarray(d["B_im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed scattering data ({exc})") from None
    return ScatteringData(xi, R, etas, A, B)


# -- tables ------------------------------------------------------------------------------


def write_table(path, columns: dict, config_hash: Optional[str] = None):
    """Tidy CSV with one column per entry of ``columns`` (equal lengths)."""
    names = list(columns)
    arrays = [np.asarray(columns[n]).ravel() for n in names]
    if len({a.size for a in arrays}) > 1:
        raise ContractViolation("table columns must have equal lengths")
    buf = _io.StringIO()
    if config_hash:
        buf.write(f"# config_hash={config_hash}\n")
    buf.write(",".join(names) + "\n")
    for row in zip(*arrays):
        buf.write(",".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())
