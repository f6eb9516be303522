"""Split conformal calibration, RCP1 calibration and set evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rcp1 import certificates
from rcp1.certificates import SmoothingSpec, ThreatModel
from rcp1.errors import DomainError, ShapeError
from rcp1.scores import ScoreKind, ScoreTable

LEVEL_EPS = 1e-12


def quantile_rank(n: int, alpha: float) -> int:
    """1-based rank k of the calibration threshold among n sorted scores.

    The nominal rule is ``ceil(l * n)`` at level ``l = alpha * (1 - 1/(n+1))``.
    It is capped at ``floor(alpha * (n + 1))``, the largest rank for which
    ``P(S_test >= S_(k)) = (n + 1 - k) / (n + 1) >= 1 - alpha`` holds under
    exchangeability. May return 0, meaning no finite threshold is valid.
    """
    level = alpha * (1.0 - 1.0 / (n + 1))
    k = math.ceil(level * n - 1e-12)
    return min(k, math.floor(alpha * (n + 1) + 1e-12))


def corrected_quantile(scores, alpha: float) -> float:
    """Lower empirical quantile used as the conformal threshold.

    Returns the k-th smallest score with k from :func:`quantile_rank`,
    clamped to at least 1.
    """
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise DomainError("need at least one calibration score")
    if not np.all(np.isfinite(s)):
        raise DomainError("calibration scores must be finite")
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    k = max(1, quantile_rank(s.size, alpha))
    return float(np.partition(s, k - 1)[k - 1])


@dataclass(frozen=True)
class CalibrationResult:
    threshold_q: float
    nominal_level: float
    adjusted_level: float
    n_calibration: int
    smoothing: SmoothingSpec | None = None
    threat: ThreatModel | None = None
    vacuous: bool = False
    score_kind: ScoreKind = field(default_factory=ScoreKind)

    @property
    def alpha(self) -> float:
        return 1.0 - self.nominal_level

    @property
    def adjusted_alpha(self) -> float:
        return 1.0 - self.adjusted_level


@dataclass(frozen=True)
class PredictionSet:
    members: frozenset
    example_id: int

    def __len__(self):
        return len(self.members)

    def __contains__(self, y):
        return y in self.members


def _threshold(true_scores: np.ndarray, alpha: float) -> tuple[float, bool]:
    n = true_scores.size
    if alpha <= LEVEL_EPS or quantile_rank(n, alpha) < 1:
        # level unreachable with n points: only the full label set is valid
        return -math.inf, True
    return corrected_quantile(true_scores, alpha), False


def calibrate_vanilla(cal: ScoreTable, alpha: float, score_kind: ScoreKind | None = None
                      ) -> CalibrationResult:
    """Standard split conformal calibration on the true-label scores of
    ``cal`` (already conformity scores)."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    q, vacuous = _threshold(cal.true_scores(), alpha)
    return CalibrationResult(q, 1.0 - alpha, 1.0 - alpha, cal.n_examples,
                             vacuous=vacuous, score_kind=score_kind or ScoreKind())


def adjusted_level(alpha: float, smoothing: SmoothingSpec, threat: ThreatModel) -> float:
    """Clean level 1 - alpha' whose certified worst case is 1 - alpha."""
    return certificates.upper_bound(1.0 - alpha, smoothing, threat)


def calibrate_rcp1(cal_augmented: ScoreTable, alpha: float, smoothing: SmoothingSpec,
                   threat: ThreatModel, score_kind: ScoreKind | None = None
                   ) -> CalibrationResult:
    """Calibrate on scores of single noisy copies at the inflated level
    ``1 - alpha' = c_upper[1 - alpha]``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0,1), got {alpha}")
    level = adjusted_level(alpha, smoothing, threat)
    q, vacuous = _threshold(cal_augmented.true_scores(), 1.0 - level)
    return CalibrationResult(q, 1.0 - alpha, level, cal_augmented.n_examples,
                             smoothing=smoothing, threat=threat, vacuous=vacuous,
                             score_kind=score_kind or ScoreKind())


def predict_set(test_scores_row, calib: CalibrationResult, example_id: int = 0,
                n_labels: int | None = None) -> PredictionSet:
    row = np.asarray(test_scores_row, dtype=float)
    if row.ndim != 1 or (n_labels is not None and row.size != n_labels):
        raise ShapeError(f"score row has shape {row.shape}, expected ({n_labels},)")
    if calib.vacuous:
        return PredictionSet(frozenset(range(row.size)), example_id)
    return PredictionSet(frozenset(np.flatnonzero(row >= calib.threshold_q).tolist()),
                         example_id)


def predict_sets(table: ScoreTable, calib: CalibrationResult) -> list[PredictionSet]:
    return [predict_set(row, calib, i) for i, row in enumerate(table.values)]


def membership_matrix(table: ScoreTable, calib: CalibrationResult) -> np.ndarray:
    """Boolean (n, K) matrix of set membership; the vectorized form of
    :func:`predict_sets`."""
    if calib.vacuous:
        return np.ones(table.values.shape, dtype=bool)
    return table.values >= calib.threshold_q


def evaluate(sets, labels, size_thresholds=(1, 3, 5, 10)) -> dict:
    """Coverage, mean set size, and per-threshold proportion and coverage of
    sets with at most k members."""
    labels = np.asarray(labels)
    sets = list(sets)
    if len(sets) != labels.size:
        raise ShapeError(f"{len(sets)} sets but {labels.size} labels")
    if not sets:
        raise ShapeError("nothing to evaluate")
    covered = np.array([int(y) in s.members for s, y in zip(sets, labels)])
    sizes = np.array([len(s.members) for s in sets])
    return _metrics(covered, sizes, size_thresholds)


def evaluate_matrix(member: np.ndarray, labels, size_thresholds=(1, 3, 5, 10)) -> dict:
    labels = np.asarray(labels)
    if member.shape[0] != labels.size:
        raise ShapeError(f"{member.shape[0]} sets but {labels.size} labels")
    covered = member[np.arange(labels.size), labels]
    return _metrics(covered, member.sum(axis=1), size_thresholds)


def _metrics(covered: np.ndarray, sizes: np.ndarray, size_thresholds) -> dict:
    out = {"coverage": float(covered.mean()), "mean_size": float(sizes.mean())}
    for k in size_thresholds:
        small = sizes <= k
        out[f"prop_le_{k}"] = float(small.mean())
        out[f"cov_le_{k}"] = float(covered[small].mean()) if small.any() else math.nan
    return out
