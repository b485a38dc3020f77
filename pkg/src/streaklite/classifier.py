"""Linear support-vector classifier for template centers, trained from scratch.

Training minimizes L2-regularized hinge loss with a Pegasos-style
stochastic subgradient schedule (eta_t = 1/(lambda*t), mini-batches,
seed-controlled shuffling), which keeps the whole procedure deterministic.
A Gaussian kernel buys almost nothing here at many times the cost, so only
the linear form is supported.

Raw margins have no natural scale, so after training the decision values
are affinely rescaled to put the class-conditional medians of a held-out
calibration slice at 0 (background) and 1 (target). The operating
threshold on this scale defaults to 0.65, selected by experiment like the
component-size threshold: it is the point where pure-noise frames stop
producing components above the size filter at megapixel scale while
streaks near PSNR 1.4 still form detectable components. ROC sweeps expose
the full threshold axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .features import FEATURE_ORDER_TAG, N_FEATURES

__all__ = [
    "LinearModel",
    "TrainConfig",
    "train",
    "decision_value",
    "decision_values",
    "predict",
    "kfold_validate",
    "roc_curve",
    "roc_auc",
    "fpr_at_threshold",
    "save_model",
    "load_model",
    "weight_heatmap",
    "save_weight_heatmap_csv",
]

MODEL_MAGIC = "STREAKLITE-LSVC v1"

# Operating threshold on the calibrated score scale (bg median 0, target
# median 1). Chosen experimentally; see the module docstring.
DEFAULT_THRESHOLD = 0.65


@dataclass
class LinearModel:
    """Weights, bias and operating threshold of the trained classifier."""

    weights: np.ndarray  # (26,)
    bias: float
    threshold: float = DEFAULT_THRESHOLD
    feature_order_tag: str = FEATURE_ORDER_TAG

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} weights, got shape {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)) or not np.isfinite(self.bias):
            raise ValueError("model weights and bias must be finite")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer knobs. The defaults train the standard corpus in seconds."""

    c: float = 3e-4  # inverse regularization strength; lambda = 1/(c*n)
    epochs: int = 20
    batch_size: int = 256
    calibration_fraction: float = 0.1
    project: bool = True  # Pegasos projection onto the 1/sqrt(lambda) ball
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.calibration_fraction < 0.5:
            raise ValueError("calibration_fraction must be in (0, 0.5)")


def _check_rows(x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[1] != N_FEATURES:
        raise ValueError(f"rows must have shape (n, {N_FEATURES}), got {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError("labels must be one per row")
    if not np.all(np.isfinite(x)):
        raise ValueError("rows contain NaN or infinite features")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise ValueError(f"need both classes 0 and 1, got labels {classes}")
    return x, y.astype(np.int8)


def train(x: np.ndarray, y: np.ndarray, config: TrainConfig = TrainConfig()) -> LinearModel:
    """Fit the linear SVC on labeled feature rows (labels 0/1).

    Deterministic for fixed rows, config and seed.
    """
    x, y = _check_rows(x, y)
    n = x.shape[0]
    if n < 1000:
        raise ValueError(f"need at least 1000 rows to train, got {n}")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_cal = max(int(round(n * config.calibration_fraction)), 2)
    cal_idx, fit_idx = perm[:n_cal], perm[n_cal:]
    if len(np.unique(y[cal_idx])) < 2 or len(np.unique(y[fit_idx])) < 2:
        raise ValueError("calibration split lost a class; provide more rows")

    xf = x[fit_idx]
    yf = np.where(y[fit_idx] == 1, 1.0, -1.0)
    n_fit = xf.shape[0]
    lam = 1.0 / (config.c * n_fit)
    radius = 1.0 / np.sqrt(lam)

    w = np.zeros(N_FEATURES)
    b = 0.0
    t = 0
    for _ in range(config.epochs):
        order = rng.permutation(n_fit)
        for start in range(0, n_fit, config.batch_size):
            batch = order[start : start + config.batch_size]
            t += 1
            eta = 1.0 / (lam * t)
            margins = yf[batch] * (xf[batch] @ w + b)
            active = margins < 1.0
            w *= 1.0 - eta * lam
            if active.any():
                ya = yf[batch][active]
                w += (eta / batch.size) * (ya @ xf[batch][active])
                b += (eta / batch.size) * ya.sum()
            if config.project:
                norm = np.linalg.norm(w)
                if norm > radius:
                    w *= radius / norm

    # calibrate: background median -> 0, target median -> 1
    cal_scores = x[cal_idx] @ w + b
    med0 = float(np.median(cal_scores[y[cal_idx] == 0]))
    med1 = float(np.median(cal_scores[y[cal_idx] == 1]))
    scale = med1 - med0
    if not np.isfinite(scale) or scale <= 0:
        raise ValueError("margin calibration failed: class medians are not separated")
    w /= scale
    b = (b - med0) / scale

    model = LinearModel(weights=w, bias=b)
    _warn_on_odd_weights(model)
    return model


def _warn_on_odd_weights(model: LinearModel):
    """The central-tile mean and max features should dominate; warn if not."""
    w = model.weights
    top2 = set(np.argsort(w)[-2:])
    if top2 != {12, 25}:
        warnings.warn(
            "trained weights do not peak on the central-tile features; "
            "check the training recipe",
            stacklevel=3,
        )


def decision_value(model: LinearModel, fv: np.ndarray) -> float:
    """Raw score w . x + b of one feature vector."""
    return float(np.asarray(fv, dtype=np.float64) @ model.weights + model.bias)


def decision_values(model: LinearModel, x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) @ model.weights + model.bias


def predict(model: LinearModel, fv: np.ndarray) -> int:
    """1 iff the decision value reaches the model threshold."""
    return int(decision_value(model, fv) >= model.threshold)


def accuracy(model: LinearModel, x: np.ndarray, y: np.ndarray) -> float:
    pred = decision_values(model, x) >= model.threshold
    return float(np.mean(pred == (np.asarray(y) == 1)))


def kfold_validate(
    x: np.ndarray, y: np.ndarray, k: int = 5, config: TrainConfig = TrainConfig()
) -> tuple[list[float], float]:
    """Stratified k-fold cross validation; returns per-fold accuracies and mean."""
    x, y = _check_rows(x, y)
    if k < 2:
        raise ValueError("k must be >= 2")
    if x.shape[0] < k:
        raise ValueError(f"need at least {k} rows for {k}-fold validation")

    rng = np.random.default_rng(config.seed)
    fold_of = np.empty(x.shape[0], dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = np.arange(idx.size) % k

    accuracies = []
    for fold in range(k):
        test = fold_of == fold
        model = train(x[~test], y[~test], config)
        accuracies.append(accuracy(model, x[test], y[test]))
    return accuracies, float(np.mean(accuracies))


def roc_curve(model: LinearModel, x: np.ndarray, y: np.ndarray):
    """ROC sweep over decision values: list of (threshold, fpr, tpr).

    Thresholds descend from +inf, so tpr and fpr are non-decreasing along
    the returned list.
    """
    x, y = _check_rows(x, y)
    scores = decision_values(model, x)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    positive = (y[order] == 1).astype(np.int64)
    n_pos = int(positive.sum())
    n_neg = len(y) - n_pos

    tp = np.cumsum(positive)
    fp = np.cumsum(1 - positive)
    # one point per distinct score, evaluated at threshold == that score
    last = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    points = [(np.inf, 0.0, 0.0)]
    for i in np.flatnonzero(last):
        points.append((float(sorted_scores[i]), fp[i] / n_neg, tp[i] / n_pos))
    return points


def roc_auc(points) -> float:
    fpr = np.array([p[1] for p in points])
    tpr = np.array([p[2] for p in points])
    return float(trapezoid(tpr, fpr))


def fpr_at_threshold(model: LinearModel, x: np.ndarray, y: np.ndarray, threshold: float | None = None) -> float:
    """Fraction of background rows scored at or above the threshold."""
    if threshold is None:
        threshold = model.threshold
    x, y = _check_rows(x, y)
    scores = decision_values(model, x)
    neg = y == 0
    return float(np.mean(scores[neg] >= threshold))


# ---------------------------------------------------------------------------
# Model persistence: a small plain-text format
# ---------------------------------------------------------------------------


def save_model(model: LinearModel, path) -> None:
    """Write the model as plain text (magic, tag, threshold, 26 weights, bias)."""
    lines = [MODEL_MAGIC, model.feature_order_tag, f"{model.threshold:.17g}"]
    lines += [f"{w:.17g}" for w in model.weights]
    lines.append(f"{model.bias:.17g}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> LinearModel:
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError(f"not a {MODEL_MAGIC} model file: {path}")
    if len(lines) < 3 + N_FEATURES + 1:
        raise ValueError(f"model file truncated: {path}")
    tag = lines[1]
    try:
        threshold = float(lines[2])
        weights = np.array([float(v) for v in lines[3 : 3 + N_FEATURES]])
        bias = float(lines[3 + N_FEATURES])
    except ValueError:
        raise ValueError(f"model file has non-numeric fields: {path}") from None
    return LinearModel(weights=weights, bias=bias, threshold=threshold, feature_order_tag=tag)


def weight_heatmap(model: LinearModel) -> np.ndarray:
    """Tile-mean weights reshaped to the 5x5 template layout."""
    return model.weights[:25].reshape(5, 5).copy()


def save_weight_heatmap_csv(model: LinearModel, path) -> None:
    np.savetxt(path, weight_heatmap(model), delimiter=",", fmt="%.17g")
