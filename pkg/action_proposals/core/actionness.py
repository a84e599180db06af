"""
Actionness scoring.

A detection's actionness balances the human detector score with a motion
score. The motion score compares the likelihood of the box's optical-flow
histogram under a positive (action) and a negative (background) Gaussian
mixture with diagonal covariances.
"""

import json
import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from .config import GmmConfig
from .errors import InputError
from .geometry import BoundingBox, Detection, FeatureHistogram, iou

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-300
RATIO_CAP = 1e6
VARIANCE_FLOOR = 1e-6
LOG_2PI = math.log(2.0 * math.pi)

Samples = Union[Sequence[FeatureHistogram], np.ndarray]


@dataclass(frozen=True, eq=False)
class GmmModel:
    """
    Diagonal-covariance Gaussian mixture.

    Attributes:
        weights: (K,) positive mixing weights summing to 1
        means: (K, D) component means
        variances: (K, D) diagonal variances, each >= the variance floor
    """
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if weights.size == 0:
            raise InputError("mixture needs at least one component")
        if means.shape != variances.shape or means.shape[0] != weights.size:
            raise InputError(
                f"inconsistent mixture shapes: weights {weights.shape}, "
                f"means {means.shape}, variances {variances.shape}"
            )
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise InputError("mixture weights must be positive and sum to 1")
        if np.any(variances < VARIANCE_FLOOR * (1 - 1e-12)):
            raise InputError(f"mixture variances must be >= {VARIANCE_FLOOR}")
        for arr in (weights, means, variances):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def n_components(self) -> int:
        return int(self.weights.size)

    def component_log_densities(self, X: np.ndarray) -> np.ndarray:
        """(N, K) matrix of log w_k + log N(x_n; mu_k, diag var_k)."""
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise InputError(f"dimension mismatch: model has {self.dim}, sample has {X.shape[1]}")
        diff = X[:, None, :] - self.means[None, :, :]
        maha = np.sum(diff * diff / self.variances[None, :, :], axis=2)
        log_det = np.sum(np.log(self.variances), axis=1)
        log_norm = -0.5 * (self.dim * LOG_2PI + log_det[None, :] + maha)
        return log_norm + np.log(self.weights)[None, :]

    def log_density(self, X: np.ndarray) -> np.ndarray:
        """Log mixture density of each row of X."""
        return logsumexp(self.component_log_densities(X), axis=1)

    def to_dict(self) -> Dict:
        return {
            "dim": self.dim,
            "components": [
                {
                    "weight": float(w),
                    "mean": [float(v) for v in mean],
                    "variance": [float(v) for v in var],
                }
                for w, mean, var in zip(self.weights, self.means, self.variances)
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "GmmModel":
        try:
            components = data["components"]
            dim = int(data["dim"])
            model = cls(
                weights=np.array([c["weight"] for c in components], dtype=float),
                means=np.array([c["mean"] for c in components], dtype=float).reshape(len(components), -1),
                variances=np.array([c["variance"] for c in components], dtype=float).reshape(len(components), -1),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed mixture document: {e}") from e
        if model.dim != dim:
            raise InputError(f"mixture document declares dim={dim} but components have {model.dim}")
        return model


def _as_matrix(samples: Samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.ndim == 1:
            X = X.reshape(-1, 1)
        return X
    rows = [s.values if isinstance(s, FeatureHistogram) else np.asarray(s, dtype=float) for s in samples]
    if not rows:
        return np.zeros((0, 0))
    dims = {r.size for r in rows}
    if len(dims) != 1:
        raise InputError(f"training samples have mixed dimensions: {sorted(dims)}")
    return np.vstack(rows)


def fit_gmm(samples: Samples, k: int, seed: int = 0,
            config: Optional[GmmConfig] = None) -> GmmModel:
    """
    Fit a diagonal-covariance mixture by expectation-maximization.

    Means start from k-means++ seeding. The variance floor is added to
    every fitted variance, so no component can collapse onto one sample.

    Args:
        samples: Training histograms, or an (N, D) sample matrix
        k: Number of components
        seed: Seed of the k-means++ initialization
        config: Iteration limit, tolerance (on the mean per-sample
            log-likelihood) and variance floor

    Returns:
        Fitted GmmModel

    Raises:
        InputError: "no training data" or "over-parameterized"
    """
    config = config or GmmConfig()
    X = _as_matrix(samples)
    n = X.shape[0]
    if n == 0:
        raise InputError("no training data")
    if k < 1:
        raise InputError(f"number of components must be >= 1, got {k}")
    if k > n:
        raise InputError(f"over-parameterized: {k} components for {n} samples")

    floor = max(config.variance_floor, VARIANCE_FLOOR)
    mixture = GaussianMixture(n_components=k, covariance_type="diag", tol=config.tolerance,
                              reg_covar=floor, max_iter=config.max_iterations,
                              init_params="k-means++", random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        mixture.fit(X)
    if not mixture.converged_:
        logger.warning(f"EM stopped after {mixture.n_iter_} iterations without converging")
    logger.debug(f"EM finished after {mixture.n_iter_} iterations, "
                 f"mean log-likelihood {mixture.score(X):.6f}")
    weights = np.maximum(mixture.weights_, 1e-12)
    return GmmModel(weights / weights.sum(), mixture.means_, np.maximum(mixture.covariances_, floor))


def gmm_density(model: GmmModel, x: Union[FeatureHistogram, np.ndarray]) -> float:
    """Mixture density at one point, evaluated in the log domain."""
    values = x.values if isinstance(x, FeatureHistogram) else np.asarray(x, dtype=float).reshape(-1)
    if values.size != model.dim:
        raise InputError(f"dimension mismatch: model has {model.dim}, sample has {values.size}")
    return float(np.exp(model.log_density(values[None, :])[0]))


def _score_from_logs(log_p: float, log_n: float) -> float:
    log_ratio = log_p - max(log_n, math.log(DENSITY_FLOOR))
    ratio = math.exp(min(log_ratio, math.log(RATIO_CAP)))
    return float(expit(ratio))


def score_density_ratio(positive_density: float, negative_density: float) -> float:
    """
    sigma(G_p / G_n) with G_n floored at 1e-300 and the ratio capped at 1e6.
    """
    if positive_density < 0 or negative_density < 0:
        raise InputError("densities must be non-negative")
    log_p = math.log(positive_density) if positive_density > 0 else -math.inf
    log_n = math.log(negative_density) if negative_density > 0 else -math.inf
    return _score_from_logs(log_p, log_n)


def motion_score(h: Union[FeatureHistogram, np.ndarray], gp: GmmModel, gn: GmmModel) -> float:
    """
    Likelihood that a motion histogram belongs to an action.

    Returns:
        Value in (0, 1); 0.5 when the positive density vanishes
    """
    values = h.values if isinstance(h, FeatureHistogram) else np.asarray(h, dtype=float).reshape(-1)
    if values.size != gp.dim or values.size != gn.dim:
        raise InputError(f"dimension mismatch: histogram {values.size}, models {gp.dim}/{gn.dim}")
    log_p = float(gp.log_density(values[None, :])[0])
    log_n = float(gn.log_density(values[None, :])[0])
    return _score_from_logs(log_p, log_n)


def actionness_score(d: Detection, lambda_p: float, motion: Optional[float] = None) -> float:
    """
    Human score plus lambda_p times the motion score, stored back into the detection.

    Args:
        d: Detection with its human score
        lambda_p: Weight of the motion cue (>= 0)
        motion: Precomputed motion score; may be omitted only when lambda_p is 0
    """
    if lambda_p < 0:
        raise InputError(f"lambda_p must be >= 0, got {lambda_p}")
    if motion is None:
        if lambda_p != 0:
            raise InputError("a motion score is required when lambda_p > 0")
        score = d.human_score
    else:
        score = d.human_score + lambda_p * motion
    d.actionness = score
    return score


class ActionnessScorer:
    """
    Scores every detection of a video.

    With lambda_p == 0 or without a mixture pair only the human cue is used.
    """

    def __init__(self, gp: Optional[GmmModel] = None, gn: Optional[GmmModel] = None,
                 lambda_p: float = 1.0):
        if (gp is None) != (gn is None):
            raise InputError("both the positive and the negative mixture are required")
        self._gp = gp
        self._gn = gn
        self._lambda_p = lambda_p

    @property
    def uses_motion(self) -> bool:
        return self._lambda_p > 0 and self._gp is not None

    def score(self, detection: Detection) -> float:
        if not self.uses_motion:
            return actionness_score(detection, 0.0)
        return actionness_score(detection, self._lambda_p,
                                motion_score(detection.motion_hist, self._gp, self._gn))

    def score_frames(self, frames: Sequence[Sequence[Detection]]) -> int:
        """Score all detections in place; returns how many were scored."""
        count = 0
        for frame in frames:
            for detection in frame:
                self.score(detection)
                count += 1
        return count


def select_motion_samples(frames: Sequence[Sequence[Detection]],
                          ground_truth: Iterable[Dict[int, BoundingBox]],
                          positive_iou: float = 0.5,
                          negative_iou: float = 0.1) -> Tuple[List[FeatureHistogram], List[FeatureHistogram]]:
    """
    Split detection motion histograms into action and background samples.

    A detection is positive when its IoU with a same-frame ground-truth box
    exceeds ``positive_iou``, negative when its best IoU is below
    ``negative_iou``; anything in between is left out.

    Args:
        frames: Per-frame detections of one video
        ground_truth: One {frame: box} mapping per annotated actor
    """
    per_frame: Dict[int, List[BoundingBox]] = {}
    for track in ground_truth:
        for frame, box in track.items():
            if box is not None:
                per_frame.setdefault(frame, []).append(box)

    positives, negatives = [], []
    for frame in frames:
        for detection in frame:
            boxes = per_frame.get(detection.frame, [])
            best = max((iou(detection.box, b) for b in boxes), default=0.0)
            if best > positive_iou:
                positives.append(detection.motion_hist)
            elif best < negative_iou:
                negatives.append(detection.motion_hist)
    return positives, negatives


def fit_motion_models(positives: Samples, negatives: Samples,
                      config: Optional[GmmConfig] = None, seed: int = 0,
                      n_classes: int = 1) -> Tuple[GmmModel, GmmModel]:
    """
    Fit the positive and negative motion mixtures.

    The component count defaults to the number of action classes and is
    clamped to the sample count of each side.
    """
    config = config or GmmConfig()
    k = config.components or max(1, n_classes)
    pos = _as_matrix(positives)
    neg = _as_matrix(negatives)
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise InputError("no training data")
    gp = fit_gmm(pos, min(k, pos.shape[0]), seed=seed, config=config)
    gn = fit_gmm(neg, min(k, neg.shape[0]), seed=seed + 1, config=config)
    logger.info(
        f"Fitted motion mixtures: {gp.n_components} positive components on {pos.shape[0]} samples, "
        f"{gn.n_components} negative components on {neg.shape[0]} samples"
    )
    return gp, gn


def save_gmm_pair(gp: GmmModel, gn: GmmModel, path: str) -> None:
    """Write the positive/negative pair as one JSON document."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"positive": gp.to_dict(), "negative": gn.to_dict()}, f, indent=2)
        f.write("\n")


def load_gmm_pair(path: str) -> Tuple[GmmModel, GmmModel]:
    """Read a positive/negative pair written by save_gmm_pair."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise InputError(f"mixture file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: not a JSON document: {e}") from e
    if not isinstance(data, dict) or "positive" not in data or "negative" not in data:
        raise InputError(f"{path}: expected 'positive' and 'negative' mixtures")
    gp = GmmModel.from_dict(data["positive"])
    gn = GmmModel.from_dict(data["negative"])
    if gp.dim != gn.dim:
        raise InputError(f"{path}: mixture dimensions differ ({gp.dim} vs {gn.dim})")
    return gp, gn
