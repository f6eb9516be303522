"""Binary randomized-smoothing certificates.

Given the clean smoothed value ``beta = E[f(x + eps)]`` of a binary function,
``lower_bound`` returns the smallest value the smoothed function can take
anywhere in the threat ball and ``upper_bound`` the largest. Gaussian/l2 has
a direct closed form. Every scheme also goes through the differential
route: a growth bound ``omega(p)`` on the smoothed probability, its
integral ``F(beta) = int_beta^{1/2} dp / omega(p)``, and inversion of ``F``
after moving ``r`` along it.

``knapsack_lower`` solves the same worst-case problem on a finite set of
constant-likelihood-ratio regions and serves as an independent oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from rcp1 import normal
from rcp1.errors import DomainError, UnsupportedCertificate

BISECT_TOL = 1e-10
BISECT_MAX_ITER = 200


class Scheme(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"
    UNIFORM = "uniform"


class Norm(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"


@dataclass(frozen=True)
class SmoothingSpec:
    """Additive i.i.d. noise. ``scale`` is sigma (Gaussian standard deviation),
    lambda (Laplace scale) or the half-width of the uniform interval."""

    scheme: Scheme
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DomainError(f"smoothing scale must be positive and finite, got {self.scale}")

    @classmethod
    def gaussian(cls, sigma: float) -> "SmoothingSpec":
        return cls(Scheme.GAUSSIAN, sigma)

    @classmethod
    def laplace(cls, scale: float) -> "SmoothingSpec":
        return cls(Scheme.LAPLACE, scale)

    @classmethod
    def uniform(cls, half_width: float) -> "SmoothingSpec":
        return cls(Scheme.UNIFORM, half_width)

    @classmethod
    def uniform_sigma_matched(cls, sigma: float) -> "SmoothingSpec":
        """Uniform noise with standard deviation ``sigma``."""
        return cls(Scheme.UNIFORM, sigma * math.sqrt(3.0))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.scheme is Scheme.GAUSSIAN:
            return rng.normal(0.0, self.scale, size)
        if self.scheme is Scheme.LAPLACE:
            return rng.laplace(0.0, self.scale, size)
        return rng.uniform(-self.scale, self.scale, size)


@dataclass(frozen=True)
class ThreatModel:
    norm: Norm
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise DomainError(f"radius must be finite and nonnegative, got {self.radius}")


# Gaussian/l1 is certified through the l2 bound: the l1 ball sits inside the
# l2 ball of the same radius, so the bound is valid but not tight for d > 1.
SUPPORTED = frozenset({
    (Scheme.GAUSSIAN, Norm.L2),
    (Scheme.GAUSSIAN, Norm.L1),
    (Scheme.LAPLACE, Norm.L1),
    (Scheme.UNIFORM, Norm.L1),
})


def check_supported(smoothing: SmoothingSpec, threat: ThreatModel) -> None:
    if (smoothing.scheme, threat.norm) not in SUPPORTED:
        raise UnsupportedCertificate(
            f"no certificate for {smoothing.scheme.value} smoothing against "
            f"the {threat.norm.value} ball")


def _check_beta(beta: float, name: str = "beta") -> float:
    beta = float(beta)
    if not (0.0 <= beta <= 1.0):
        raise DomainError(f"{name} must be in [0,1], got {beta}")
    return beta


def _check_radius(radius: float) -> float:
    radius = float(radius)
    if not (math.isfinite(radius) and radius >= 0):
        raise DomainError(f"radius must be finite and nonnegative, got {radius}")
    return radius


# ---------------------------------------------------------------------------
# differential (omega / F) route


def omega(p: float, smoothing: SmoothingSpec) -> float:
    """Largest rate at which a smoothed probability at level ``p`` can grow
    per unit shift of the input."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"p must be in (0,1), got {p}")
    s = smoothing.scale
    if smoothing.scheme is Scheme.GAUSSIAN:
        # phi(Phi^-1(1 - p)) = phi(Phi^-1(p)) by symmetry; the latter keeps precision
        return normal.pdf(normal.ppf(p)) / s
    if smoothing.scheme is Scheme.LAPLACE:
        # half-line sets are extremal; the boundary density is min(p, 1-p)/lambda
        return min(p, 1.0 - p) / s
    # shifting Uniform[-a, a] by d moves at most d / 2a of mass
    return 1.0 / (2.0 * s)


def _f_closed(beta: float, smoothing: SmoothingSpec) -> float:
    """F on all of (0, 1). Negative above 1/2."""
    s = smoothing.scale
    if smoothing.scheme is Scheme.GAUSSIAN:
        return -s * normal.ppf(beta)
    if smoothing.scheme is Scheme.LAPLACE:
        if beta <= 0.5:
            return s * math.log(1.0 / (2.0 * beta))
        return -s * math.log(1.0 / (2.0 * (1.0 - beta)))
    return 2.0 * s * (0.5 - beta)


def _f_inverse(y: float, smoothing: SmoothingSpec) -> float:
    """Inverse of ``_f_closed``, clipped to [0, 1]."""
    s = smoothing.scale
    if smoothing.scheme is Scheme.GAUSSIAN:
        return normal.cdf(-y / s)
    if smoothing.scheme is Scheme.LAPLACE:
        if y >= 0:
            return 0.5 * math.exp(-y / s)
        return 1.0 - 0.5 * math.exp(y / s)
    return min(1.0, max(0.0, 0.5 - y / (2.0 * s)))


def _f_quadrature(beta: float, smoothing: SmoothingSpec) -> float:
    val, _ = integrate.quad(lambda p: 1.0 / omega(p, smoothing), beta, 0.5,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def f_integral(beta: float, smoothing: SmoothingSpec, method: str = "closed") -> float:
    """``F(beta) = int_beta^{1/2} dp / omega(p)`` for beta in (0, 1/2].

    ``method="quadrature"`` integrates ``1/omega`` numerically instead of
    using the closed form.
    """
    if not (0.0 < beta <= 0.5):
        raise DomainError(f"beta must be in (0, 0.5], got {beta}")
    if method == "closed":
        return _f_closed(beta, smoothing)
    if method == "quadrature":
        return _f_quadrature(beta, smoothing)
    raise ValueError(f"unknown method {method!r}")


def _bisect_upper(beta: float, radius: float, smoothing: SmoothingSpec) -> float:
    """sup{b : F(b) >= F(beta) - r} by bisection on the quadrature F."""
    target = _f_quadrature(beta, smoothing) - radius
    lo, hi = beta, 1.0
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if _f_quadrature(mid, smoothing) >= target:
            lo = mid
        else:
            hi = mid
    # hi is never below the true supremum
    return hi


def omega_upper(beta: float, smoothing: SmoothingSpec, radius: float,
                method: str = "closed") -> float:
    """Upper certificate from the F integral: ``sup{b : F(b) >= F(beta) - r}``."""
    beta = _check_beta(beta)
    radius = _check_radius(radius)
    if beta in (0.0, 1.0) or radius == 0.0:
        return beta
    if method == "bisect":
        return _bisect_upper(beta, radius, smoothing)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    return _f_inverse(_f_closed(beta, smoothing) - radius, smoothing)


def omega_lower(beta: float, smoothing: SmoothingSpec, radius: float,
                method: str = "closed") -> float:
    """Lower certificate, obtained from the upper one by complementing the
    classifier: ``c_lower[beta] = 1 - c_upper[1 - beta]``."""
    beta = _check_beta(beta)
    if beta in (0.0, 1.0) or _check_radius(radius) == 0.0:
        return beta
    val = 1.0 - omega_upper(1.0 - beta, smoothing, radius, method=method)
    return max(0.0, val)


# ---------------------------------------------------------------------------
# public bounds


def lower_bound(beta: float, smoothing: SmoothingSpec, threat: ThreatModel) -> float:
    beta = _check_beta(beta)
    check_supported(smoothing, threat)
    r = threat.radius
    if beta in (0.0, 1.0) or r == 0.0:
        return beta
    if smoothing.scheme is Scheme.GAUSSIAN:
        return normal.cdf(normal.ppf(beta) - r / smoothing.scale)
    return omega_lower(beta, smoothing, r)


def upper_bound(beta: float, smoothing: SmoothingSpec, threat: ThreatModel) -> float:
    beta = _check_beta(beta)
    check_supported(smoothing, threat)
    r = threat.radius
    if beta in (0.0, 1.0) or r == 0.0:
        return beta
    if smoothing.scheme is Scheme.GAUSSIAN:
        return normal.cdf(normal.ppf(beta) + r / smoothing.scale)
    return 1.0 - lower_bound(1.0 - beta, smoothing, threat)


def lower_bound_array(betas, smoothing: SmoothingSpec, threat: ThreatModel) -> np.ndarray:
    """Vectorized ``lower_bound``."""
    b = np.asarray(betas, dtype=float)
    if np.any((b < 0) | (b > 1) | np.isnan(b)):
        raise DomainError("beta must be in [0,1]")
    check_supported(smoothing, threat)
    r = threat.radius
    if r == 0.0:
        return b.copy()
    if smoothing.scheme is Scheme.GAUSSIAN:
        with np.errstate(over="ignore", invalid="ignore"):
            out = normal.cdf(normal.ppf(b) - r / smoothing.scale)
        out = np.where(b == 0.0, 0.0, np.where(b == 1.0, 1.0, out))
        return out
    return np.vectorize(lambda x: omega_lower(x, smoothing, r), otypes=[float])(b)


@dataclass(frozen=True)
class Certificate:
    lower: float
    upper: float
    vacuous: bool  # lower bound collapsed to 0 for a positive beta


def certify(beta: float, smoothing: SmoothingSpec, threat: ThreatModel) -> Certificate:
    lo = lower_bound(beta, smoothing, threat)
    hi = upper_bound(beta, smoothing, threat)
    return Certificate(lo, hi, vacuous=(beta > 0.0 and lo <= 0.0))


# ---------------------------------------------------------------------------
# region (fractional knapsack) oracle


@dataclass(frozen=True)
class RegionSystem:
    """Regions of constant likelihood ratio between the smoothing
    distribution at the clean point (``p_mass``) and at the perturbed point
    (``q_mass``). ``ratio`` is p/q, strictly decreasing, so filling regions
    in order spends the least perturbed mass per unit of clean mass."""

    p_mass: np.ndarray
    q_mass: np.ndarray
    ratio: np.ndarray

    def __post_init__(self):
        p, q, c = (np.asarray(a, dtype=float) for a in (self.p_mass, self.q_mass, self.ratio))
        if not (p.shape == q.shape == c.shape and p.ndim == 1):
            raise ValueError("p_mass, q_mass and ratio must be equal-length vectors")
        if np.any(p < 0) or np.any(q < 0):
            raise ValueError("region masses must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
            raise ValueError("region masses must each sum to 1")
        if np.any(np.diff(c) >= 0):
            raise ValueError("ratio must be strictly decreasing")
        for name, arr in (("p_mass", p), ("q_mass", q), ("ratio", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_masses(cls, p_mass, q_mass, rtol: float = 1e-12) -> "RegionSystem":
        """Sort regions by p/q and merge regions whose ratios coincide."""
        p = np.asarray(p_mass, dtype=float)
        q = np.asarray(q_mass, dtype=float)
        keep = (p > 0) | (q > 0)
        p, q = p[keep], q[keep]
        with np.errstate(divide="ignore"):
            c = np.where(q > 0, p / np.where(q > 0, q, 1.0), np.inf)
        order = np.argsort(-c, kind="stable")
        p, q, c = p[order], q[order], c[order]
        mp, mq, mc = [], [], []
        for pi, qi, ci in zip(p, q, c):
            if mc and (ci == mc[-1] or (math.isfinite(ci) and math.isclose(ci, mc[-1], rel_tol=rtol))):
                mp[-1] += pi
                mq[-1] += qi
                mc[-1] = mp[-1] / mq[-1] if mq[-1] > 0 else math.inf
            else:
                mp.append(pi)
                mq.append(qi)
                mc.append(ci)
        return cls(np.array(mp), np.array(mq), np.array(mc))

    def breakpoints(self, reverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
        p, q = (self.p_mass[::-1], self.q_mass[::-1]) if reverse else (self.p_mass, self.q_mass)
        # regions with no clean mass never help meet the constraint
        used = p > 0
        P = np.concatenate([[0.0], np.cumsum(p[used])])
        Q = np.concatenate([[0.0], np.cumsum(q[used])])
        P[-1] = 1.0
        return P, Q


def knapsack_lower(beta, regions: RegionSystem):
    """min h.q subject to h.p = beta, 0 <= h <= 1, by greedy filling."""
    b = np.asarray(beta, dtype=float)
    if np.any((b < 0) | (b > 1)):
        raise DomainError("beta must be in [0,1]")
    P, Q = regions.breakpoints()
    out = np.interp(b, P, Q)
    return float(out) if np.ndim(beta) == 0 else out


def knapsack_upper(beta, regions: RegionSystem):
    """max h.q subject to h.p = beta, 0 <= h <= 1."""
    b = np.asarray(beta, dtype=float)
    if np.any((b < 0) | (b > 1)):
        raise DomainError("beta must be in [0,1]")
    P, Q = regions.breakpoints(reverse=True)
    # regions with q but no p may be switched on for free
    free = float(regions.q_mass[regions.p_mass == 0].sum())
    out = np.minimum(1.0, np.interp(b, P, Q) + np.where(b > 0, free, 0.0))
    return float(out) if np.ndim(beta) == 0 else out


def gaussian_regions(sigma: float, radius: float, n_regions: int,
                     conservative: bool = False) -> RegionSystem:
    """Discretize N(0, sigma) vs N(radius, sigma) along the shift direction
    into ``n_regions`` slabs of equal clean mass.

    With ``conservative=False`` each slab carries its exact perturbed mass.
    The knapsack then optimizes over slab-constant classifiers only, so its
    value is attained by a real classifier and can only sit at or above the
    exact certificate (it touches it at every slab boundary).

    With ``conservative=True`` each slab is charged the smallest density
    ratio q/p it contains (its left end), and the missing perturbed mass goes
    to a final region with no clean mass. The knapsack value is then a valid
    lower bound on the certificate, at a first-order discretization cost.
    """
    if n_regions < 1:
        raise ValueError("n_regions must be positive")
    edges = sigma * normal.ppf(np.arange(n_regions + 1) / n_regions)
    p = np.full(n_regions, 1.0 / n_regions)
    if radius == 0.0:
        return RegionSystem.from_masses(p, p.copy())
    if not conservative:
        q = np.diff(normal.cdf(edges, loc=radius, scale=sigma))
        return RegionSystem.from_masses(p, q)
    left = edges[:-1]
    with np.errstate(over="ignore"):
        dens_ratio = np.exp((2.0 * left * radius - radius * radius) / (2.0 * sigma * sigma))
    dens_ratio[0] = 0.0
    q = dens_ratio * p
    residual = max(0.0, 1.0 - q.sum())
    return RegionSystem.from_masses(np.append(p, 0.0), np.append(q, residual))


# ---------------------------------------------------------------------------
# confidence certificate for bounded losses


@dataclass(frozen=True)
class RiskBounds:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")


def confidence_upper(beta: float, bounds: RiskBounds, smoothing: SmoothingSpec,
                     radius: float) -> float:
    """Largest expected loss in the ball given clean expected loss ``beta``
    for a loss bounded in ``[bounds.lo, bounds.hi]`` (Gaussian smoothing)."""
    a, b = bounds.lo, bounds.hi
    if not (a <= beta <= b):
        raise DomainError(f"beta must be in [{a}, {b}], got {beta}")
    if smoothing.scheme is not Scheme.GAUSSIAN:
        raise UnsupportedCertificate("confidence certificate needs Gaussian smoothing")
    radius = _check_radius(radius)
    t = (beta - a) / (b - a)
    if radius == 0.0 or t in (0.0, 1.0):
        return float(beta)
    shifted = normal.cdf(normal.ppf(t) + radius / smoothing.scale)
    return b * shifted + a * (1.0 - shifted)


def confidence_lower(beta: float, bounds: RiskBounds, smoothing: SmoothingSpec,
                     radius: float) -> float:
    """Smallest expected loss in the ball given clean expected loss ``beta``."""
    a, b = bounds.lo, bounds.hi
    if not (a <= beta <= b):
        raise DomainError(f"beta must be in [{a}, {b}], got {beta}")
    return a + b - confidence_upper(a + b - beta, bounds, smoothing, radius)
