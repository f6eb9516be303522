"""Conformal risk control for monotone bounded losses, plain and robust.

Losses are tabulated per calibration example on a sorted lambda grid and
must be non-increasing along it (larger lambda, larger mask, fewer misses).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rcp1.certificates import (RiskBounds, SmoothingSpec, ThreatModel,
                               confidence_upper, BISECT_TOL, BISECT_MAX_ITER)
from rcp1.errors import DomainError, ParseError, ShapeError

MONOTONE_TOL = 1e-12


def default_grid(n: int = 512) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass(frozen=True)
class RiskCalibration:
    lam: float
    index: int               # position of lam on the grid
    target: float            # risk level the lambda search used
    unsatisfiable: bool = False


def _check_losses(losses: np.ndarray, grid: np.ndarray, bounds: RiskBounds) -> None:
    if losses.ndim != 2 or losses.shape[1] != grid.size:
        raise ShapeError(f"losses must be (n, {grid.size}), got {losses.shape}")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    if np.any(losses < bounds.lo - MONOTONE_TOL) or np.any(losses > bounds.hi + MONOTONE_TOL):
        raise ValueError(f"losses must lie in [{bounds.lo}, {bounds.hi}]")
    bad = np.flatnonzero(np.any(np.diff(losses, axis=1) > MONOTONE_TOL, axis=1))
    if bad.size:
        raise ValueError(f"loss of example {bad[0]} increases along the lambda grid")


def crc_lambda(cal_losses, bounds: RiskBounds, alpha: float, grid=None) -> RiskCalibration:
    """Smallest grid lambda with ``(sum_i L_i(lambda) + b) / (n + 1) <= alpha``."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    losses = np.asarray(cal_losses, dtype=float)
    if not (bounds.lo <= alpha <= bounds.hi):
        raise DomainError(f"alpha must be in [{bounds.lo}, {bounds.hi}], got {alpha}")
    _check_losses(losses, grid, bounds)
    return _crc_search(losses, grid, bounds, alpha)


def _crc_search(losses, grid, bounds, alpha) -> RiskCalibration:
    n = losses.shape[0]
    risk = (losses.sum(axis=0) + bounds.hi) / (n + 1)
    ok = np.flatnonzero(risk <= alpha)
    if ok.size == 0:
        return RiskCalibration(float(grid[-1]), grid.size - 1, alpha, unsatisfiable=True)
    return RiskCalibration(float(grid[ok[0]]), int(ok[0]), alpha)


def deflated_level(alpha: float, bounds: RiskBounds, smoothing: SmoothingSpec,
                   radius: float) -> float:
    """Largest clean risk t whose certified worst case does not exceed alpha,
    ``sup{t : c_upper_conf[t] <= alpha}``, by bisection."""
    if not (bounds.lo <= alpha <= bounds.hi):
        raise DomainError(f"alpha must be in [{bounds.lo}, {bounds.hi}], got {alpha}")
    if radius == 0.0:
        return alpha
    lo, hi = bounds.lo, alpha
    if confidence_upper(hi, bounds, smoothing, radius) <= alpha:
        return hi
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL * (bounds.hi - bounds.lo):
            break
        mid = 0.5 * (lo + hi)
        if confidence_upper(mid, bounds, smoothing, radius) <= alpha:
            lo = mid
        else:
            hi = mid
    # lo always satisfies the constraint
    return lo


def robust_crc_lambda(cal_losses_augmented, bounds: RiskBounds, alpha: float,
                      smoothing: SmoothingSpec, threat: ThreatModel, grid=None
                      ) -> RiskCalibration:
    """CRC at the deflated level, on losses of single noisy copies. The worst
    case expected risk over the ball then stays at or below ``alpha``."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    losses = np.asarray(cal_losses_augmented, dtype=float)
    target = deflated_level(alpha, bounds, smoothing, threat.radius)
    _check_losses(losses, grid, bounds)
    return _crc_search(losses, grid, bounds, target)


# ---------------------------------------------------------------------------
# segmentation masks


def threshold_mask(pixel_scores, lam: float) -> np.ndarray:
    return np.asarray(pixel_scores, dtype=float) >= 1.0 - lam


def fnr_loss(mask, truth) -> float:
    """Fraction of true pixels left out of the mask; 0 when there are none."""
    mask = np.asarray(mask, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if mask.shape != truth.shape:
        raise ShapeError(f"mask {mask.shape} and truth {truth.shape} differ")
    n_true = truth.sum()
    if n_true == 0:
        return 0.0
    return float((truth & ~mask).sum() / n_true)


def fnr_curve(pixel_scores, truth, grid) -> np.ndarray:
    """FNR of ``threshold_mask(pixel_scores, lam)`` for every lam in grid."""
    s = np.asarray(pixel_scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    if s.shape != truth.shape:
        raise ShapeError(f"scores {s.shape} and truth {truth.shape} differ")
    pos = np.sort(s[truth])
    if pos.size == 0:
        return np.zeros(len(grid))
    # missed = #{true pixels with score < 1 - lam}
    missed = np.searchsorted(pos, 1.0 - np.asarray(grid, dtype=float), side="left")
    return missed / pos.size


def mask_proportion(pixel_scores, lam: float) -> float:
    return float(threshold_mask(pixel_scores, lam).mean())


def read_grid(path) -> np.ndarray:
    """Read a CSV grid of numbers (rows = pixel rows)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"{path}: non-numeric entry", row=i) from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path}: grid must be a non-empty rectangle")
    return np.array(rows)


def write_mask(mask, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(mask, dtype=bool):
            w.writerow(row.astype(int).tolist())
