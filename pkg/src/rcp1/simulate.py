"""Synthetic experiments with exact smoothed probabilities.

Every label's score is a half-space score ``s(z, y) = w.z - offset_y`` that
shares one weight vector. Under Gaussian smoothing the probability that a
score clears a threshold has a closed form, and the worst perturbation in
an l2 ball is a shift along ``-w``. The Gaussian certificate is tight for
exactly this family, which makes it a sharp oracle for the whole pipeline.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from rcp1 import certificates, conformal, normal
from rcp1.certificates import Norm, SmoothingSpec, ThreatModel
from rcp1.scores import ScoreTable, augment_batch

ROLE_DATA, ROLE_CAL_NOISE, ROLE_TEST_NOISE, ROLE_MODEL = 0, 1, 2, 3


def trial_rng(seed: int, trial: int, role: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial, role])


@dataclass(frozen=True)
class HalfspaceModel:
    weight: np.ndarray
    offsets: np.ndarray
    sigma_data: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        o = np.asarray(self.offsets, dtype=float)
        if w.ndim != 1 or not np.any(w != 0):
            raise ValueError("weight must be a nonzero vector")
        if o.ndim != 1 or not np.all(np.isfinite(o)):
            raise ValueError("offsets must be a finite vector")
        if self.sigma_data < 0:
            raise ValueError("sigma_data must be nonnegative")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "offsets", o)

    @property
    def dim(self) -> int:
        return self.weight.size

    @property
    def n_labels(self) -> int:
        return self.offsets.size

    @property
    def w_norm(self) -> float:
        return float(np.linalg.norm(self.weight))

    def scores(self, points: np.ndarray) -> np.ndarray:
        """(n, K) score matrix for an (n, d) array of points."""
        return np.atleast_2d(points) @ self.weight[:, None] - self.offsets[None, :]

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw n i.i.d. labelled points.

        Labels are uniform. A point of label y sits at margin ``m ~ N(0,
        sigma_data)`` above its own offset along the unit weight direction,
        plus isotropic noise orthogonal to it, so ``s(x, y) = |w| m``.
        """
        labels = rng.integers(0, self.n_labels, size=n)
        u = self.weight / self.w_norm
        margin = rng.normal(0.0, self.sigma_data, size=n)
        along = self.offsets[labels] / self.w_norm + margin
        perp = rng.normal(size=(n, self.dim))
        perp -= np.outer(perp @ u, u)
        return np.outer(along, u) + perp, labels

    @classmethod
    def random(cls, d: int, K: int, rng: np.random.Generator, spread: float = 1.0,
               sigma_data: float = 1.0) -> "HalfspaceModel":
        w = rng.normal(size=d)
        w /= np.linalg.norm(w)
        offsets = np.sort(rng.uniform(-spread, spread, size=K))
        return cls(w, offsets, sigma_data)


def halfspace_smooth_prob(model: HalfspaceModel, point, label: int, sigma: float,
                          q_threshold: float) -> float:
    """Exact ``P_eps[s(x + eps, y) >= q]`` for eps ~ N(0, sigma^2 I)."""
    margin = float(np.dot(model.weight, point) - model.offsets[label] - q_threshold)
    if sigma == 0.0:
        return 1.0 if margin >= 0 else 0.0
    return normal.cdf(margin / (sigma * model.w_norm))


def halfspace_worst_case(model: HalfspaceModel, point, label: int, sigma: float,
                         q_threshold: float, radius: float) -> float:
    """Smallest smoothed probability over the l2 ball of ``radius``."""
    shifted = np.asarray(point, dtype=float) - radius * model.weight / model.w_norm
    return halfspace_smooth_prob(model, shifted, label, sigma, q_threshold)


def _smooth_probs(margins: np.ndarray, sigma: float, w_norm: float) -> np.ndarray:
    return normal.cdf(margins / (sigma * w_norm))


# ---------------------------------------------------------------------------
# coverage distribution


@dataclass(frozen=True)
class CoverageDistribution:
    n_calibration: int
    alpha: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if np.any((s < 0) | (s > 1)):
            raise ValueError("coverage samples must lie in [0, 1]")
        object.__setattr__(self, "samples", s)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def se(self) -> float:
        return float(self.samples.std(ddof=1) / math.sqrt(self.samples.size))


def beta_coverage_samples(n_calibration: int, alpha: float, n_samples: int,
                          seed: int) -> CoverageDistribution:
    """Draws of conditional coverage given a calibration set of size n."""
    if n_calibration < 1:
        raise ValueError("n_calibration must be at least 1")
    a = (1.0 - alpha) * (n_calibration + 1)
    b = alpha * (n_calibration + 1)
    samples = np.random.default_rng(seed).beta(a, b, size=n_samples)
    return CoverageDistribution(n_calibration, alpha, samples)


def pushforward_worst_coverage(dist: CoverageDistribution, smoothing: SmoothingSpec,
                               threat: ThreatModel) -> CoverageDistribution:
    """Map each coverage draw to its certified worst case in the ball."""
    worst = certificates.lower_bound_array(dist.samples, smoothing, threat)
    return CoverageDistribution(dist.n_calibration, dist.alpha, worst)


# ---------------------------------------------------------------------------
# end-to-end experiment


def synthetic_segmentation(n_images: int, shape: tuple[int, int], rng: np.random.Generator,
                           noise_sigma: float = 0.25, signal: float = 2.5
                           ) -> tuple[np.ndarray, np.ndarray]:
    """Pixel scores in [0, 1] and boolean target masks for ``n_images``.

    Each image holds one rectangular target region (empty with probability
    0.1). Scores are a logistic function of a signed signal plus pixel
    noise, plus one extra Gaussian draw of scale ``noise_sigma`` standing in
    for the single noisy forward pass.
    """
    h, w = shape
    truth = np.zeros((n_images, h, w), dtype=bool)
    for i in range(n_images):
        if rng.uniform() < 0.1:
            continue
        rh, rw = rng.integers(2, h // 2 + 2), rng.integers(2, w // 2 + 2)
        top, left = rng.integers(0, h - rh + 1), rng.integers(0, w - rw + 1)
        truth[i, top:top + rh, left:left + rw] = True
    logit = signal * (2.0 * truth - 1.0) + rng.normal(0.0, 1.5, truth.shape)
    logit += rng.normal(0.0, noise_sigma, truth.shape) * 4.0
    return 1.0 / (1.0 + np.exp(-logit)), truth


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 16
    K: int = 10
    n_cal: int = 200
    n_test: int = 200
    alpha: float = 0.1
    sigma: float = 0.5
    radius: float = 0.25
    trials: int = 2000
    seed: int = 0
    sigma_data: float = 1.0
    offset_spread: float = 3.0

    def __post_init__(self):
        for name in ("d", "K", "n_cal", "n_test", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0,1)")
        if self.sigma <= 0 or self.radius < 0:
            raise ValueError("need sigma > 0 and radius >= 0")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = (int if types[key] in (int, "int") else float)(value)
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return asdict(self)


def _run_trial(cfg: ExperimentConfig, trial: int) -> dict:
    model = HalfspaceModel.random(cfg.d, cfg.K, trial_rng(cfg.seed, trial, ROLE_MODEL),
                                  spread=cfg.offset_spread, sigma_data=cfg.sigma_data)
    data_rng = trial_rng(cfg.seed, trial, ROLE_DATA)
    x_cal, y_cal = model.sample(cfg.n_cal, data_rng)
    x_test, y_test = model.sample(cfg.n_test, data_rng)

    smoothing = SmoothingSpec.gaussian(cfg.sigma)
    threat = ThreatModel(Norm.L2, cfg.radius)

    cal = augment_batch(lambda eps: model.scores(x_cal + eps), smoothing,
                        trial_rng(cfg.seed, trial, ROLE_CAL_NOISE), cfg.n_cal, cfg.d, y_cal)
    test = augment_batch(lambda eps: model.scores(x_test + eps), smoothing,
                         trial_rng(cfg.seed, trial, ROLE_TEST_NOISE), cfg.n_test, cfg.d,
                         y_test)

    rcp1 = conformal.calibrate_rcp1(cal, cfg.alpha, smoothing, threat)
    vanilla = conformal.calibrate_vanilla(cal, cfg.alpha)

    clean_margin = model.scores(x_test)[np.arange(cfg.n_test), y_test]
    shift = cfg.radius * model.w_norm
    out = {}
    for name, calib in (("rcp1", rcp1), ("vanilla", vanilla)):
        member = conformal.membership_matrix(test, calib)
        out[f"{name}_clean_coverage"] = float(member[np.arange(cfg.n_test), y_test].mean())
        out[f"{name}_mean_size"] = float(member.sum(axis=1).mean())
        if calib.vacuous:
            beta = worst = np.ones(cfg.n_test)
        else:
            m = clean_margin - calib.threshold_q
            beta = _smooth_probs(m, cfg.sigma, model.w_norm)
            worst = _smooth_probs(m - shift, cfg.sigma, model.w_norm)
        out[f"{name}_clean_exact"] = float(beta.mean())
        out[f"{name}_worst_coverage"] = float(worst.mean())
    out["adjusted_level"] = rcp1.adjusted_level
    out["rcp1_vacuous"] = float(rcp1.vacuous)
    return out


def _pairwise_mean(x: np.ndarray) -> float:
    # numpy's sum is pairwise, hence independent of thread scheduling
    return float(np.sum(x) / x.size)


def run_coverage_experiment(config: ExperimentConfig, workers: int = 1) -> dict:
    """Run ``config.trials`` independent trials and aggregate.

    Each trial draws a model, calibration and test data, one noise draw per
    example, calibrates both RCP1 and vanilla CP, and records clean
    coverage (single draw and exact) and the exact worst-case coverage
    under the l2 adversary of ``config.radius``.
    """
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _run_trial(config, t), range(config.trials)))
    else:
        results = [_run_trial(config, t) for t in range(config.trials)]
    metrics = {}
    for key in results[0]:
        vals = np.array([r[key] for r in results])
        metrics[key] = _pairwise_mean(vals)
        if key != "adjusted_level":
            metrics[f"{key}_se"] = (float(vals.std(ddof=1) / math.sqrt(vals.size))
                                    if vals.size > 1 else math.nan)
    smoothing = SmoothingSpec.gaussian(config.sigma)
    threat = ThreatModel(Norm.L2, config.radius)
    metrics["theory_bound_rcp1"] = certificates.lower_bound(
        metrics["adjusted_level"], smoothing, threat)
    metrics["theory_bound_vanilla"] = certificates.lower_bound(
        1.0 - config.alpha, smoothing, threat)
    return metrics
