"""Command-line front end: ``forward``, ``invert``, ``recover`` and ``validate``.

Options may also come from a JSON file given with ``--config`` (keys are the
long option names with dashes or underscores); explicit flags win.  Exit
codes: 0 success, 1 unreadable input or bad arguments, 2 domain or contract
violation, 3 numerical failure, 4 validation-suite failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import asymval, compact, forward, inverse
from .exceptions import ScatteringError, ValidationFailure
from .io import (FormatError, config_hash, read_matrix, read_potential, read_scattering, write_potential,
                 write_scattering, write_table)
from .types import ScatteringData

log = logging.getLogger("linescatter")

DEFAULTS = {
    "forward": dict(potential=None, matrix=None, support=None, xi_min=0.05, xi_max=200.0, n_xi=4000,
                    symmetric=False, eta_max=None, with_ab=False, out="sd.json"),
    "invert": dict(data=None, sign=1, method="pv", out="mrec.json"),
    "recover": dict(data=None, matrix=None, support=1.0, cells=16, reg=1e-4, reg_sweep=None, restarts=0,
                    seed=0, out="qhat.csv", history=None),
    "validate": dict(suite="appendix", matrix=None, potential=None, support=None, kmax=20, report="report.json"),
}
REQUIRED = {"forward": ("potential", "matrix"), "invert": ("data",), "recover": ("data", "matrix"),
            "validate": ("matrix", "potential")}
# knobs that do not change results stay out of the config hash
UNHASHED = {"threads", "emit_plot_data", "config", "out", "history", "report", "verbose"}


class ArgumentError(ScatteringError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="linescatter", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", default=None)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values (flags win)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads for per-sample work")
        sp.add_argument("--emit-plot-data", metavar="DIR", default=None, help="write tidy CSVs for plotting")

    f = sub.add_parser("forward", help="scattering data of a potential")
    f.add_argument("--potential")
    f.add_argument("--matrix")
    f.add_argument("--support", type=float, help="support bound S (default: from the potential file)")
    f.add_argument("--xi-min", type=float)
    f.add_argument("--xi-max", type=float)
    f.add_argument("--n-xi", type=int)
    f.add_argument("--symmetric", action="store_true", default=None, help="mirror the grid to negative xi")
    f.add_argument("--eta-max", type=float)
    f.add_argument("--with-ab", action="store_true", default=None, help="also store A and B")
    f.add_argument("--out")
    common(f)

    i = sub.add_parser("invert", help="transfer matrix, A and B from scattering data")
    i.add_argument("--data")
    i.add_argument("--sign", type=int, choices=(1, -1))
    i.add_argument("--method", choices=("pv", "richardson"))
    i.add_argument("--out")
    common(i)

    r = sub.add_parser("recover", help="fit a piecewise-constant potential")
    r.add_argument("--data")
    r.add_argument("--matrix")
    r.add_argument("--support", type=float)
    r.add_argument("--cells", type=int)
    r.add_argument("--reg", type=float)
    r.add_argument("--reg-sweep", type=float, nargs="+", help="regularisation values for an L-curve table")
    r.add_argument("--restarts", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--history", help="misfit history CSV (default: next to --out)")
    common(r)

    v = sub.add_parser("validate", help="large-lambda validation suite")
    v.add_argument("--suite", choices=("appendix",))
    v.add_argument("--matrix")
    v.add_argument("--potential")
    v.add_argument("--support", type=float)
    v.add_argument("--kmax", type=int)
    v.add_argument("--report")
    common(v)
    return p


def _resolve(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = dict(DEFAULTS[cmd])
    cfg["threads"] = 1
    cfg["emit_plot_data"] = None
    if args.config:
        try:
            extra = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise FormatError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(extra, dict):
            raise FormatError("config file must hold a JSON object")
        for k, val in extra.items():
            key = k.replace("-", "_")
            if key not in cfg and key != "command":
                raise ArgumentError(f"unknown config key {k!r} for {cmd}")
            cfg[key] = val
    for k, val in vars(args).items():
        if val is not None and k not in ("command", "config", "verbose"):
            cfg[k] = val
    missing = [k for k in REQUIRED[cmd] if not cfg.get(k)]
    if missing:
        raise ArgumentError(f"{cmd}: missing {', '.join('--' + m.replace('_', '-') for m in missing)}")
    if cfg["threads"] is None or int(cfg["threads"]) < 1:
        raise ArgumentError("--threads must be a positive integer")
    return cfg


def _hash(cmd: str, cfg: dict, files: Sequence[str]) -> str:
    keep = {k: v for k, v in cfg.items() if k not in UNHASHED and k not in ("potential", "matrix", "data")}
    keep["command"] = cmd
    return config_hash(keep, files)


def _plot_dir(cfg) -> Optional[Path]:
    d = cfg.get("emit_plot_data")
    if not d:
        return None
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_forward(cfg: dict) -> int:
    q = read_potential(cfg["potential"], S=cfg["support"])
    M = read_matrix(cfg["matrix"])
    lo, hi, n = float(cfg["xi_min"]), float(cfg["xi_max"]), int(cfg["n_xi"])
    if not lo < hi or lo <= 0 <= hi or n < 2:
        raise ArgumentError("the xi range must be increasing, exclude 0 and hold at least 2 points")
    xi = np.linspace(lo, hi, n)
    if cfg["symmetric"]:
        xi = np.concatenate((-xi[::-1], xi))
    h = _hash("forward", cfg, [cfg["potential"], cfg["matrix"]])
    pdir = _plot_dir(cfg)
    sd = forward.scattering_data(q, M, xi, eta_max=cfg["eta_max"], with_AB=bool(cfg["with_ab"] or pdir),
                                 n_jobs=int(cfg["threads"]))
    out = sd if cfg["with_ab"] else ScatteringData(sd.xi, sd.R, sd.etas)
    write_scattering(cfg["out"], out, h)
    log.info("wrote %d samples and %d bound states to %s", xi.size, sd.etas.size, cfg["out"])
    if pdir:
        write_table(pdir / "forward.csv", {"xi": xi, "R_re": sd.R.real, "R_im": sd.R.imag, "abs_R": np.abs(sd.R),
                                           "abs_A": np.abs(sd.A), "abs_B": np.abs(sd.B)}, h)
    return 0


def cmd_invert(cfg: dict) -> int:
    sd = read_scattering(cfg["data"])
    h = _hash("invert", cfg, [cfg["data"]])
    res = inverse.invert(sd, sign=int(cfg["sign"]))
    if cfg["method"] != "pv":
        res.A = inverse.dispersion_A_boundary(sd, res.mrec, method=cfg["method"])
        res.B = inverse.reconstruct_B(sd, res.A)
    out = res.mrec.to_dict()
    out.update(
        config_hash=h,
        xi=[float(v) for v in sd.xi],
        A_re=[float(v) for v in res.A.values.real], A_im=[float(v) for v in res.A.values.imag],
        B_re=[float(v) for v in res.B.values.real], B_im=[float(v) for v in res.B.values.imag],
        unitarity_residual=float(np.max(np.abs(np.abs(res.A.values) ** 2 - np.abs(res.B.values) ** 2 - 1))),
    )
    Path(cfg["out"]).write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    log.info("case %s, m11=%s m12=%s m21=%s m22=%s", out["case"], out["m11"], out["m12"], out["m21"], out["m22"])
    pdir = _plot_dir(cfg)
    if pdir:
        write_table(pdir / "invert.csv", {"xi": sd.xi, "A_re": res.A.values.real, "A_im": res.A.values.imag,
                                          "abs_A": np.abs(res.A.values), "B_re": res.B.values.real,
                                          "B_im": res.B.values.imag}, h)
    return 0


def _data_AB(sd: ScatteringData, cfg) -> ScatteringData:
    """Attach A/B from an inversion output when the data file is one (``invert`` JSON)."""
    if sd.has_AB:
        return sd
    try:
        d = json.loads(Path(cfg["data"]).read_text())
    except (OSError, json.JSONDecodeError):
        return sd
    if all(k in d for k in ("A_re", "A_im", "B_re", "B_im")):
        A = np.asarray(d["A_re"]) + 1j * np.asarray(d["A_im"])
        B = np.asarray(d["B_re"]) + 1j * np.asarray(d["B_im"])
        return ScatteringData(sd.xi, sd.R, sd.etas, A, B)
    return sd


def cmd_recover(cfg: dict) -> int:
    sd = _data_AB(read_scattering(cfg["data"]), cfg)
    M = read_matrix(cfg["matrix"])
    h = _hash("recover", cfg, [cfg["data"], cfg["matrix"]])
    S, n = float(cfg["support"]), int(cfg["cells"])
    res = compact.recover_potential(sd, M, S, n, float(cfg["reg"]), n_restarts=int(cfg["restarts"]),
                                    seed=int(cfg["seed"]), n_jobs=int(cfg["threads"]))
    write_potential(cfg["out"], res.potential, h)
    hist = res.history_array()
    hist_path = cfg["history"] or str(Path(cfg["out"]).with_suffix("")) + "_history.csv"
    write_table(hist_path, {"iter": hist[:, 0].astype(int), "misfit": hist[:, 1], "gradnorm": hist[:, 2]}, h)
    log.info("misfit %.3e after %d iterations", res.misfit, len(hist))
    pdir = _plot_dir(cfg)
    if cfg["reg_sweep"]:
        rows = {"reg": [], "misfit": [], "roughness": []}
        for reg in cfg["reg_sweep"]:
            r = compact.recover_potential(sd, M, S, n, float(reg), n_restarts=int(cfg["restarts"]),
                                          seed=int(cfg["seed"]), n_jobs=int(cfg["threads"]))
            rows["reg"].append(float(reg))
            rows["misfit"].append(r.misfit)
            rows["roughness"].append(float(np.sum(np.diff(r.potential.values, 2) ** 2)))
        target = (pdir or Path(cfg["out"]).parent) / "lcurve.csv"
        write_table(target, rows, h)
    if pdir:
        write_table(pdir / "recover.csv", {"x": res.potential.nodes, "q": res.potential.values}, h)
    return 0


def cmd_validate(cfg: dict) -> int:
    q = read_potential(cfg["potential"], S=cfg["support"])
    M = read_matrix(cfg["matrix"])
    h = _hash("validate", cfg, [cfg["potential"], cfg["matrix"]])
    rep = asymval.appendix_suite(q, M, ks=range(5, int(cfg["kmax"]) + 1))
    runtime = rep.pop("runtime_s")
    rep["config_hash"] = h
    Path(cfg["report"]).write_text(json.dumps(rep, indent=1, sort_keys=True) + "\n")
    for e in rep["entries"]:
        log.info("%-28s %-26s %12s %-10s %s", e["tag"], e["check"], e["value"], e["band"],
                 "pass" if e["pass"] else "FAIL")
    log.info("suite finished in %.1f s", runtime)
    pdir = _plot_dir(cfg)
    if pdir:
        idx = np.arange(len(rep["entries"]))
        vals = [np.nan if e["value"] is None else e["value"] for e in rep["entries"]]
        write_table(pdir / "validate.csv", {"entry": idx, "value": vals,
                                            "pass": [int(e["pass"]) for e in rep["entries"]]}, h)
    if not rep["passed"]:
        raise ValidationFailure("validation suite failed: " +
                                ", ".join(e["tag"] for e in rep["entries"] if not e["pass"]))
    return 0


COMMANDS = {"forward": cmd_forward, "invert": cmd_invert, "recover": cmd_recover, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(format="%(message)s", stream=sys.stderr)
    try:
        args = _build_parser().parse_args(argv)
        log.setLevel(logging.INFO if args.verbose else logging.WARNING)
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except ScatteringError as exc:
        print(f"linescatter: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"linescatter: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
