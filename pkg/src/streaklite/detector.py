"""Crude classification: sweep the classifier, label components, filter by size.

The per-pixel decision map is computed from shifted box-filter fields rather
than per-pixel template extraction; both paths evaluate the same features.
Pixels within 12 px of an edge have no valid template and stay background.

Connected components use 8-connectivity: diagonal streaks would fragment
under 4-connectivity. Components are returned in raster order of their
first-encountered pixel, which keeps outputs stable for fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import features
from .classifier import LinearModel

__all__ = [
    "Component",
    "classify_frame",
    "decision_map",
    "connected_components",
    "filter_components",
    "crude_classify",
    "save_components_csv",
]

DEFAULT_SIZE_THRESHOLD = 35

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Component:
    """A set of 8-connected pixels, stored as (x, y) rows in raster order."""

    pixels: np.ndarray  # (n, 2) int64, columns (x, y)

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.int64)
        if pixels.ndim != 2 or pixels.shape[1] != 2 or pixels.shape[0] == 0:
            raise ValueError("a component needs a non-empty (n, 2) pixel array")
        object.__setattr__(self, "pixels", pixels)

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(min_x, min_y, max_x, max_y), inclusive."""
        xs, ys = self.pixels[:, 0], self.pixels[:, 1]
        return int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max())

    def mask(self, shape: tuple[int, int]) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        out[self.pixels[:, 1], self.pixels[:, 0]] = True
        return out


def decision_map(frame: np.ndarray, model: LinearModel) -> np.ndarray:
    """Classifier decision value at every valid template center.

    Shape (H-24, W-24); index (0, 0) is the template centered at (12, 12).
    """
    tile_means, center_max, m_bck = features.feature_fields(frame)
    w = model.weights
    out = np.full(m_bck.shape, model.bias, dtype=np.float64)
    for i in range(25):
        out += w[i] * (tile_means[i] - m_bck)
    out += w[25] * (center_max - m_bck)
    return out


def classify_frame(frame: np.ndarray, model: LinearModel) -> np.ndarray:
    """Binary map of per-pixel predictions; the 12 px border is background."""
    frame = np.asarray(frame, dtype=np.float64)
    h, w = frame.shape
    if h < features.TEMPLATE_SIZE or w < features.TEMPLATE_SIZE:
        raise ValueError(f"frame {w}x{h} smaller than the classification template")
    m = features.MARGIN
    out = np.zeros((h, w), dtype=bool)
    out[m : h - m, m : w - m] = decision_map(frame, model) >= model.threshold
    return out


def connected_components(binary_map: np.ndarray) -> list[Component]:
    """8-connected components in raster order of their first pixel."""
    binary_map = np.asarray(binary_map, dtype=bool)
    labels, count = ndimage.label(binary_map, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    flat = labels.ravel()
    nz = np.flatnonzero(flat)
    first_seen: dict[int, int] = {}
    order = []
    for pos in nz:
        lab = flat[pos]
        if lab not in first_seen:
            first_seen[lab] = pos
            order.append(lab)
            if len(order) == count:
                break
    slices = ndimage.find_objects(labels)
    components = []
    for lab in order:
        sl = slices[lab - 1]
        ys, xs = np.nonzero(labels[sl] == lab)
        pixels = np.column_stack([xs + sl[1].start, ys + sl[0].start])
        components.append(Component(pixels=pixels))
    return components


def filter_components(components: list[Component], t_h: int = DEFAULT_SIZE_THRESHOLD) -> list[Component]:
    """Keep components with at least t_h pixels (noise blobs stay small)."""
    if t_h < 1:
        raise ValueError("size threshold must be >= 1")
    return [c for c in components if c.size >= t_h]


def crude_classify(
    frame: np.ndarray, model: LinearModel, t_h: int = DEFAULT_SIZE_THRESHOLD
) -> list[Component]:
    """Full crude stage: classify, extract components, filter by size."""
    return filter_components(connected_components(classify_frame(frame, model)), t_h)


def _run_length_encode(component: Component) -> str:
    """Per-row runs 'y:x0-x1' joined by ';' (pixels are raster sorted)."""
    runs = []
    pixels = component.pixels
    i = 0
    n = pixels.shape[0]
    while i < n:
        y = pixels[i, 1]
        x0 = x1 = pixels[i, 0]
        i += 1
        while i < n and pixels[i, 1] == y and pixels[i, 0] == x1 + 1:
            x1 = pixels[i, 0]
            i += 1
        runs.append(f"{y}:{x0}-{x1}")
    return ";".join(runs)


def save_components_csv(components: list[Component], path, comment: str | None = None) -> None:
    """CSV: id,size,min_x,min_y,max_x,max_y,rle."""
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("id,size,min_x,min_y,max_x,max_y,rle\n")
        for i, comp in enumerate(components):
            x0, y0, x1, y1 = comp.bbox
            fh.write(f"{i},{comp.size},{x0},{y0},{x1},{y1},{_run_length_encode(comp)}\n")
