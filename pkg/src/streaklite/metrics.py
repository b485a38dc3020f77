"""Extraction quality metrics: gray-weighted centroids, centroid error, IoU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricRow", "centroid", "centroid_error", "iou", "save_metrics_csv"]


def centroid(frame, component, background_mu: float, raw: bool = False) -> tuple[float, float]:
    """Gray-weighted centroid (x, y) of a component.

    Weights are background-subtracted grays floored at 0, so a bright
    streak on a uniform pedestal is weighted by its signal rather than the
    pedestal. Pass ``raw=True`` to weight by raw grays instead.
    """
    frame = np.asarray(frame, dtype=np.float64)
    pixels = component.pixels
    grays = frame[pixels[:, 1], pixels[:, 0]]
    weights = grays if raw else np.maximum(grays - background_mu, 0.0)
    total = float(weights.sum())
    if total <= 0:
        raise ValueError("centroid undefined: all weights are zero")
    x = float((pixels[:, 0] * weights).sum() / total)
    y = float((pixels[:, 1] * weights).sum() / total)
    return (x, y)


def centroid_error(c: tuple[float, float], ref: tuple[float, float]) -> float:
    """Euclidean distance between a measured and a reference centroid."""
    return math.hypot(c[0] - ref[0], c[1] - ref[1])


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean maps of equal shape.

    Two empty maps are considered identical (IoU 1).
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return inter / union


@dataclass
class MetricRow:
    """One sweep measurement."""

    psnr: float
    length: float
    noise_sigma: float
    method: str  # crude | grown | baseline
    centroid_error: float  # px; NaN when not detected
    iou: float
    detected: bool
    runtime: float  # seconds

    def __post_init__(self):
        if self.method not in ("crude", "grown", "baseline"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (math.isnan(self.iou) or 0.0 <= self.iou <= 1.0):
            raise ValueError(f"iou out of range: {self.iou}")


METRIC_COLUMNS = "psnr,length,noise_sigma,method,centroid_error,iou,detected,runtime"


def save_metrics_csv(rows: list[MetricRow], path, comment: str | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(METRIC_COLUMNS + "\n")
        for r in rows:
            fh.write(
                f"{r.psnr:.4f},{r.length:.3f},{r.noise_sigma:.4f},{r.method},"
                f"{r.centroid_error:.6f},{r.iou:.6f},{int(r.detected)},{r.runtime:.6f}\n"
            )
