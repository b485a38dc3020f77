"""streaklite: faint streak simulation and extraction on star-camera frames.

The pipeline has two stages: a learned local-contrast classifier sweeps a
25x25 template over the frame and size-filters the resulting connected
components (crude classification), then each surviving component is
reconstructed by maximum-likelihood oriented growth along its fitted
direction. Supporting modules simulate PSNR-calibrated streaks, compute
extraction metrics, reproduce the template capability analysis, and provide
a directional-matched-filter baseline for comparisons.
"""

__version__ = "0.1.0"

from .classifier import LinearModel, TrainConfig, load_model, save_model, train
from .detector import Component, classify_frame, connected_components, crude_classify, filter_components
from .growth import DetectionResult, GrowthConfig, LayerModel, refine
from .image import BackgroundStats, NoiseParams, background_stats, gaussian_background, load_pgm, save_mask, save_pgm
from .metrics import MetricRow, centroid, centroid_error, iou
from .simulate import (
    CameraGeometry,
    DatasetConfig,
    LabeledSample,
    StreakParams,
    calibrate_intensity,
    generate_dataset,
    ideal_mask,
    max_rotation_angle,
    psnr_of,
    render_streak,
)

__all__ = [
    "__version__",
    "BackgroundStats",
    "CameraGeometry",
    "Component",
    "DatasetConfig",
    "DetectionResult",
    "GrowthConfig",
    "LabeledSample",
    "LayerModel",
    "LinearModel",
    "MetricRow",
    "NoiseParams",
    "StreakParams",
    "TrainConfig",
    "background_stats",
    "calibrate_intensity",
    "centroid",
    "centroid_error",
    "classify_frame",
    "connected_components",
    "crude_classify",
    "filter_components",
    "gaussian_background",
    "generate_dataset",
    "ideal_mask",
    "iou",
    "load_model",
    "load_pgm",
    "max_rotation_angle",
    "psnr_of",
    "refine",
    "render_streak",
    "save_mask",
    "save_model",
    "save_pgm",
    "train",
]
