"""Weighted least squares in log coordinates and replicate jackknife."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InsufficientStatistics(RuntimeError):
    pass


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    points_used: int
    window: tuple[float, float] = (float("nan"), float("nan"))
    flags: tuple[str, ...] = field(default_factory=tuple)


def wls(x, y, sigma=None):
    """Straight-line fit ``y = a + b x``; returns ``(b, a, se_b, r2)``.

    With ``sigma`` the fit is chi-square weighted and ``se_b`` is the
    formal error ``1/sqrt(S_tt)``; without it the residual scatter sets the
    error.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if sigma is None or not np.all(np.asarray(sigma) > 0):
        w = np.ones_like(x)
        weighted = False
    else:
        w = 1.0 / np.asarray(sigma, float) ** 2
        weighted = True
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx == 0:
        raise InsufficientStatistics("all abscissae coincide")
    b = (w * (x - xm) * (y - ym)).sum() / sxx
    a = ym - b * xm
    resid = y - a - b * x
    ss_res = (w * resid ** 2).sum()
    ss_tot = (w * (y - ym) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    if weighted:
        se = np.sqrt(1.0 / sxx)
    elif x.size > 2:
        se = np.sqrt(ss_res / (x.size - 2) / sxx)
    else:
        se = 0.0
    return float(b), float(a), float(se), float(r2)


def _transform(x, y, yerr, mode):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    yerr = None if yerr is None else np.asarray(yerr, float)
    ok = y > 0
    if mode == "loglog":
        ok &= x > 0
        X = np.log(x[ok])
    elif mode == "loglinear":
        X = x[ok]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    Y = np.log(y[ok])
    S = None if yerr is None else yerr[ok] / y[ok]
    return X, Y, S, ok


def fit_exponent(records, mode: str = "loglog") -> FitResult:
    """Fit ``log y`` against ``log x`` (``loglog``) or ``x`` (``loglinear``).

    ``records`` is a sequence of ``(x, y, y_err)``; points with ``y <= 0``
    are dropped and at least three must remain.
    """
    recs = list(records)
    if not recs:
        raise InsufficientStatistics("no points")
    x, y, e = (np.array(c, float) for c in zip(*recs))
    X, Y, S, ok = _transform(x, y, e, mode)
    if X.size < 3:
        raise InsufficientStatistics(f"{X.size} usable points, need 3")
    flags = () if ok.all() else ("dropped_nonpositive",)
    b, a, se, r2 = wls(X, Y, S)
    xs = x[ok]
    return FitResult(b, a, se, r2, int(X.size), (float(xs.min()), float(xs.max())), flags)


def jackknife(samples: np.ndarray, statistic, n_blocks: int = 100):
    """Delete-a-block jackknife over the leading (replicate) axis.

    ``statistic`` maps a mean over replicates (shape ``samples.shape[1:]``)
    to a float; returns ``(value_on_full_mean, stderr)``.
    """
    samples = np.asarray(samples, float)
    R = samples.shape[0]
    full = statistic(samples.mean(axis=0))
    if R < 2:
        return full, 0.0
    g = min(n_blocks, R)
    edges = np.linspace(0, R, g + 1).astype(int)
    total = samples.sum(axis=0)
    vals = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        loo = (total - samples[lo:hi].sum(axis=0)) / (R - (hi - lo))
        vals.append(statistic(loo))
    vals = np.asarray(vals, float)
    good = np.isfinite(vals)
    if good.sum() < 2:
        return full, float("nan")
    vals = vals[good]
    g = vals.size
    se = np.sqrt((g - 1) / g * ((vals - vals.mean()) ** 2).sum())
    return full, float(se)
