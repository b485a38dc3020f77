"""Local-contrast features over a 25x25 template split into 25 disjoint 5x5 tiles.

For a template centered on a pixel, the descriptor is 26-dimensional:

* x1..x25: tile mean grays in raster order (tile 13 is the central tile),
  each minus the minimum tile mean ``m_bck`` of the template. The minimum
  acts as a local background reference, which makes the whole vector
  invariant to additive gray offsets.
* x26: the brightest pixel of the central tile, minus the same ``m_bck``.

The tile order is frozen by :data:`FEATURE_ORDER_TAG`, which trained model
files carry so that training and inference can never disagree silently.

Pixels closer than 12 px to a frame edge have no valid template and are
treated as background by the detector.
"""

from __future__ import annotations

import numpy as np

TEMPLATE_SIZE = 25
TILE_SIZE = 5
MARGIN = TEMPLATE_SIZE // 2  # 12
N_FEATURES = 26
CENTER_TILE = 13  # 1-based raster index of the central 5x5 tile

FEATURE_ORDER_TAG = "tiles5x5-raster-center13-max26-v1"

__all__ = [
    "TEMPLATE_SIZE",
    "TILE_SIZE",
    "MARGIN",
    "N_FEATURES",
    "CENTER_TILE",
    "FEATURE_ORDER_TAG",
    "extract_features",
    "feature_grid",
    "feature_fields",
]


def _box5_mean(frame: np.ndarray) -> np.ndarray:
    """Exact 5x5 box mean, valid region only: out[y-2, x-2] = mean at (y, x).

    Built from 25 shifted adds in tile raster order so the arithmetic is
    bit-identical to a naive per-pixel accumulation in the same order.
    """
    h, w = frame.shape
    acc = np.zeros((h - 4, w - 4), dtype=np.float64)
    for u in range(TILE_SIZE):
        for v in range(TILE_SIZE):
            acc += frame[u : h - 4 + u, v : w - 4 + v]
    return acc / (TILE_SIZE * TILE_SIZE)


def _box5_max(frame: np.ndarray) -> np.ndarray:
    """5x5 max over the same valid region as :func:`_box5_mean`."""
    h, w = frame.shape
    out = frame[0 : h - 4, 0 : w - 4].copy()
    for u in range(TILE_SIZE):
        for v in range(TILE_SIZE):
            np.maximum(out, frame[u : h - 4 + u, v : w - 4 + v], out=out)
    return out


def feature_fields(frame: np.ndarray):
    """Per-pixel feature ingredients for all valid template centers.

    Returns ``(tile_means, center_max, m_bck)`` where ``tile_means`` is a
    list of 25 arrays (raster tile order), ``center_max`` the brightest gray
    of the central tile, and ``m_bck`` the per-center minimum tile mean. All
    arrays have shape (H-24, W-24), aligned so index (0, 0) corresponds to
    template center (12, 12).
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2:
        raise ValueError(f"frame must be 2-D, got shape {frame.shape}")
    h, w = frame.shape
    if h < TEMPLATE_SIZE or w < TEMPLATE_SIZE:
        raise ValueError(
            f"frame {w}x{h} too small for the {TEMPLATE_SIZE}x{TEMPLATE_SIZE} template"
        )
    means = _box5_mean(frame)
    maxes = _box5_max(frame)
    vh, vw = h - 2 * MARGIN, w - 2 * MARGIN
    tile_means = []
    for r in range(5):
        for c in range(5):
            tile_means.append(means[5 * r : 5 * r + vh, 5 * c : 5 * c + vw])
    m_bck = tile_means[0].copy()
    for view in tile_means[1:]:
        np.minimum(m_bck, view, out=m_bck)
    center_max = maxes[10 : 10 + vh, 10 : 10 + vw]
    return tile_means, center_max, m_bck


def feature_grid(frame: np.ndarray) -> np.ndarray:
    """All 26 features for every valid template center.

    Returns an array of shape (H-24, W-24, 26); entry [j, i] describes the
    template centered at pixel (x=i+12, y=j+12).
    """
    tile_means, center_max, m_bck = feature_fields(frame)
    vh, vw = m_bck.shape
    grid = np.empty((vh, vw, N_FEATURES), dtype=np.float64)
    for i, view in enumerate(tile_means):
        grid[:, :, i] = view - m_bck
    grid[:, :, 25] = center_max - m_bck
    return grid


def extract_features(frame: np.ndarray, cx: int, cy: int) -> np.ndarray:
    """26-dim feature vector of the template centered at pixel (cx, cy).

    The template must lie fully inside the frame.
    """
    frame = np.asarray(frame, dtype=np.float64)
    h, w = frame.shape
    if not (MARGIN <= cx < w - MARGIN and MARGIN <= cy < h - MARGIN):
        raise ValueError(
            f"template centered at ({cx}, {cy}) leaves the {w}x{h} frame "
            f"(valid centers: [{MARGIN}, {w - MARGIN - 1}] x [{MARGIN}, {h - MARGIN - 1}])"
        )
    patch = frame[cy - MARGIN : cy + MARGIN + 1, cx - MARGIN : cx + MARGIN + 1]
    return feature_grid(patch)[0, 0]
