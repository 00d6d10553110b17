from __future__ import annotations

import numpy as np


def envelope_slope(x, err, n_bins: int = 12) -> float:
    """Log-log slope of the upper envelope of ``err(x)``.

    Oscillating errors pass close to zero, which wrecks a plain regression
    of ``log|err|``; the maximum over logarithmic bins tracks the decay of
    the envelope instead.
    """
    x = np.asarray(x, dtype=float)
    err = np.abs(np.asarray(err))
    edges = np.geomspace(x.min(), x.max() * (1 + 1e-12), n_bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    lx, ly = [], []
    for b in range(n_bins):
        sel = idx == b
        if not sel.any():
            continue
        j = np.argmax(np.where(sel, err, -np.inf))
        if err[j] > 0:
            lx.append(np.log(x[j]))
            ly.append(np.log(err[j]))
    if len(lx) < 2:
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])


def inverse_power_fit(x, y, order: int = 1):
    """Least-squares fit ``y ~ sum_{p=0..order} c_p / x**p``; returns ``(coeffs, rms_residual)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    # columns (x0 / x)^p are of order one; raw powers of 1/x make lstsq drop them
    x0 = np.min(np.abs(x))
    V = np.stack([(x0 / x) ** p for p in range(order + 1)], axis=1)
    c, *_ = np.linalg.lstsq(V.astype(y.dtype if np.iscomplexobj(y) else float), y, rcond=None)
    res = y - V @ c
    coef = c * x0 ** np.arange(order + 1)
    return coef, float(np.sqrt(np.mean(np.abs(res) ** 2)))
