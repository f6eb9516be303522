"""Standard normal CDF, survival function, density and quantile.

The CDF goes through ``erfc`` on whichever tail avoids cancellation. The
quantile starts from Acklam's rational approximation (relative error about
1e-9) and applies two Halley steps against the tail-appropriate residual,
which brings the absolute error below 1e-12 on [-8, 8]. Below 1e-280 the
density underflows, so those points are refined by Newton on log cdf.

All functions accept scalars or arrays and return the same kind.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, log_ndtr

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# Acklam's coefficients.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671007494130e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_P_DEEP = 1e-280


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def cdf(x, loc: float = 0.0, scale: float = 1.0):
    z = (np.asarray(x, dtype=float) - loc) / scale
    out = 0.5 * erfc(-z / SQRT2)
    return _unwrap(x, out)


def sf(x, loc: float = 0.0, scale: float = 1.0):
    z = (np.asarray(x, dtype=float) - loc) / scale
    out = 0.5 * erfc(z / SQRT2)
    return _unwrap(x, out)


def pdf(x, loc: float = 0.0, scale: float = 1.0):
    z = (np.asarray(x, dtype=float) - loc) / scale
    out = np.exp(-0.5 * z * z) / (SQRT2PI * scale)
    return _unwrap(x, out)


def _acklam(p: np.ndarray) -> np.ndarray:
    x = np.empty_like(p)
    low = p < _P_LOW
    high = p > 1.0 - _P_LOW
    mid = ~(low | high)

    q = p[mid] - 0.5
    r = q * q
    num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    x[mid] = q * num / den

    for mask, tail, sign in ((low, p[low], 1.0), (high, 1.0 - p[high], -1.0)):
        q = np.sqrt(-2.0 * np.log(tail))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[mask] = sign * num / den
    return x


def _refine_deep(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Newton on log cdf, where the density itself underflows
    logp = np.log(p)
    for _ in range(4):
        lc = log_ndtr(x)
        x = x - (lc - logp) * np.exp(lc + 0.5 * x * x) * SQRT2PI
    return x


def ppf(p, loc: float = 0.0, scale: float = 1.0):
    """Quantile function. ``ppf(0) = -inf`` and ``ppf(1) = +inf``."""
    pa = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any((pa < 0.0) | (pa > 1.0) | np.isnan(pa)):
        raise ValueError("probabilities must lie in [0, 1]")
    out = np.empty_like(pa)
    out[pa == 0.0] = -np.inf
    out[pa == 1.0] = np.inf
    inner = (pa > 0.0) & (pa < 1.0)
    if np.any(inner):
        pi = pa[inner]
        x = _acklam(pi)
        deep = pi < _P_DEEP
        if np.any(deep):
            x[deep] = _refine_deep(pi[deep], x[deep])
        ok = ~deep
        xs, ps = x[ok], pi[ok]
        upper = ps > 0.5
        for _ in range(2):
            # residual on the tail that carries the precision
            e = np.where(upper, (1.0 - ps) - 0.5 * erfc(xs / SQRT2),
                         0.5 * erfc(-xs / SQRT2) - ps)
            u = e * SQRT2PI * np.exp(0.5 * xs * xs)
            xs = xs - u / (1.0 + 0.5 * xs * u)
        x[ok] = xs
        out[inner] = x
    out = loc + scale * out
    return float(out[0]) if np.ndim(p) == 0 else out.reshape(np.shape(p))
