"""Analytic streak rendering and labeled-dataset synthesis.

A moving point source with total flux ``intensity`` and a Gaussian PSF of
width ``psf_sigma`` sweeps a straight segment of the given length during the
exposure. The pixel signal is the exposure-time integral of the moving 2-D
Gaussian, evaluated at pixel centers by composite midpoint quadrature. A
zero-length streak degenerates to a static star spot.

Intensities are calibrated against a target peak signal-to-noise ratio
PSNR = (g_max - g_bck) / sigma, the detectability measure used throughout
the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import features
from .image import BackgroundStats, NoiseParams, gaussian_background, subseed

__all__ = [
    "StreakParams",
    "CameraGeometry",
    "LabeledSample",
    "DatasetConfig",
    "DatasetRows",
    "render_streak",
    "streak_signal",
    "psnr_of",
    "calibrate_intensity",
    "ideal_mask",
    "max_rotation_angle",
    "generate_dataset",
    "save_rows_csv",
    "load_rows_csv",
]

# Pad (in units of psf_sigma) that must stay inside the frame around the
# segment endpoints; beyond it the remaining flux is < 4e-6 of the total.
SUPPORT_SIGMAS = 5.0
# Wider pad used when evaluating, so the evaluated box loses no flux.
EVAL_SIGMAS = 7.0


@dataclass(frozen=True)
class StreakParams:
    """Analytic description of one trail."""

    center: tuple[float, float]  # (x, y), sub-pixel
    angle: float  # degrees in [0, 180)
    length: float  # px travelled during the exposure
    intensity: float  # total flux I_c, gray * px^2
    psf_sigma: float = 1.35
    exposure: float = 1.0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError(f"length must be >= 0, got {self.length}")
        if self.psf_sigma <= 0:
            raise ValueError(f"psf_sigma must be > 0, got {self.psf_sigma}")
        if self.intensity < 0:
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")
        if self.exposure <= 0:
            raise ValueError(f"exposure must be > 0, got {self.exposure}")

    @property
    def direction(self) -> np.ndarray:
        rad = math.radians(self.angle)
        return np.array([math.cos(rad), math.sin(rad)])

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=np.float64)
        half = 0.5 * self.length * self.direction
        return c - half, c + half


@dataclass(frozen=True)
class CameraGeometry:
    """Optical constants needed for the straight-line approximation bound."""

    half_fov: float  # degrees
    focal_length: float  # same unit as arch_height_limit
    arch_height_limit: float

    def __post_init__(self):
        if not 0 < self.half_fov < 90:
            raise ValueError(f"half_fov must be in (0, 90) degrees, got {self.half_fov}")
        if self.focal_length <= 0:
            raise ValueError("focal_length must be > 0")
        if self.arch_height_limit < 0:
            raise ValueError("arch_height_limit must be >= 0")


def max_rotation_angle(geom: CameraGeometry) -> float:
    """Largest camera rotation (degrees) for which a trail stays straight.

    A curved trail may be treated as its chord while the arch height stays
    under the limit; the bound is alpha = 2*arccos(1 - cos^4(phi) * h / f).
    """
    phi = math.radians(geom.half_fov)
    arg = 1.0 - (math.cos(phi) ** 4) * geom.arch_height_limit / geom.focal_length
    if not -1.0 <= arg <= 1.0:
        raise ValueError(f"arccos argument {arg} outside [-1, 1]; check geometry")
    return math.degrees(2.0 * math.acos(arg))


def _quadrature_steps(length: float) -> int:
    return max(32, int(math.ceil(8.0 * length)))


def streak_signal(shape: tuple[int, int], streak: StreakParams) -> np.ndarray:
    """Added signal of a streak on a zero frame of the given (height, width).

    Raises if the streak support (endpoints padded by 5 psf sigmas) leaves
    the frame, reporting the clipped extent.
    """
    height, width = shape
    cx, cy = streak.center
    if not (0 <= cx <= width - 1 and 0 <= cy <= height - 1):
        raise ValueError(f"streak center ({cx}, {cy}) outside the {width}x{height} frame")
    p0, p1 = streak.endpoints
    pad = SUPPORT_SIGMAS * streak.psf_sigma
    lo = np.minimum(p0, p1) - pad
    hi = np.maximum(p0, p1) + pad
    if lo[0] < 0 or lo[1] < 0 or hi[0] > width - 1 or hi[1] > height - 1:
        raise ValueError(
            "streak extends outside the frame: support box "
            f"x [{lo[0]:.2f}, {hi[0]:.2f}], y [{lo[1]:.2f}, {hi[1]:.2f}] "
            f"vs frame [0, {width - 1}] x [0, {height - 1}]"
        )

    sigma = streak.psf_sigma
    pad_eval = EVAL_SIGMAS * sigma + 1.0
    x0 = max(int(math.floor(min(p0[0], p1[0]) - pad_eval)), 0)
    x1 = min(int(math.ceil(max(p0[0], p1[0]) + pad_eval)), width - 1)
    y0 = max(int(math.floor(min(p0[1], p1[1]) - pad_eval)), 0)
    y1 = min(int(math.ceil(max(p0[1], p1[1]) + pad_eval)), height - 1)

    signal = np.zeros(shape, dtype=np.float64)
    if streak.intensity == 0.0:
        return signal

    n = _quadrature_steps(streak.length)
    # midpoint positions of the source center over the exposure
    s = (np.arange(n) + 0.5) / n - 0.5
    cxs = cx + s * streak.length * math.cos(math.radians(streak.angle))
    cys = cy + s * streak.length * math.sin(math.radians(streak.angle))

    xs = np.arange(x0, x1 + 1, dtype=np.float64)
    ys = np.arange(y0, y1 + 1, dtype=np.float64)
    dx2 = (xs[None, :] - cxs[:, None]) ** 2  # (n, nx)
    dy2 = (ys[None, :] - cys[:, None]) ** 2  # (n, ny)
    inv = 1.0 / (2.0 * sigma * sigma)
    ex = np.exp(-dx2 * inv)
    ey = np.exp(-dy2 * inv)
    # sum_k exp(-dy^2) * exp(-dx^2) = einsum over the time axis
    patch = np.einsum("ky,kx->yx", ey, ex)
    scale = streak.intensity * streak.exposure / (2.0 * math.pi * sigma * sigma * n)
    signal[y0 : y1 + 1, x0 : x1 + 1] = scale * patch
    return signal


def render_streak(background: np.ndarray, streak: StreakParams) -> np.ndarray:
    """Background plus the rendered streak; the background is not modified."""
    background = np.asarray(background, dtype=np.float64)
    return background + streak_signal(background.shape, streak)


def psnr_of(frame: np.ndarray, mask: np.ndarray, bck: BackgroundStats) -> float:
    """Peak signal-to-noise ratio of a region: (max gray - mu) / sigma."""
    frame = np.asarray(frame, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("PSNR of an empty mask is undefined")
    if bck.sigma_hat <= 0:
        raise ValueError("PSNR undefined for zero background sigma")
    return float((frame[mask].max() - bck.mu_hat) / bck.sigma_hat)


def calibrate_intensity(
    target_psnr: float,
    streak_geometry: StreakParams,
    noise: NoiseParams,
    rel_tol: float = 1e-3,
    max_iter: int = 100,
) -> float:
    """Intensity whose noiseless rendering peaks at target_psnr sigmas above mu.

    Bisection on the intensity scale of a unit-intensity rendering (the
    signal is linear in intensity, so one rendering suffices). Deterministic.
    """
    if target_psnr < 0:
        raise ValueError("target_psnr must be >= 0")
    if target_psnr == 0:
        return 0.0
    if noise.sigma <= 0:
        raise ValueError("cannot calibrate against zero noise sigma")

    # local frame, just big enough for the support box
    pad = int(math.ceil(EVAL_SIGMAS * streak_geometry.psf_sigma)) + 2
    half = 0.5 * streak_geometry.length
    size_x = int(math.ceil(2 * (half * abs(math.cos(math.radians(streak_geometry.angle))) + pad))) + 3
    size_y = int(math.ceil(2 * (half * abs(math.sin(math.radians(streak_geometry.angle))) + pad))) + 3
    local = replace(
        streak_geometry,
        center=((size_x - 1) / 2.0, (size_y - 1) / 2.0),
        intensity=1.0,
    )
    unit_peak = float(streak_signal((size_y, size_x), local).max())
    if unit_peak <= 0:
        raise ValueError("unit rendering has zero peak; degenerate geometry")

    target_peak = target_psnr * noise.sigma
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi * unit_peak >= target_peak:
            break
        hi *= 2.0
    else:
        raise RuntimeError("intensity calibration failed to bracket the target peak")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid * unit_peak < target_peak:
            lo = mid
        else:
            hi = mid
        if (hi - lo) <= rel_tol * hi:
            return hi
    raise RuntimeError(f"intensity calibration did not converge in {max_iter} iterations")


def ideal_mask(clean_frame: np.ndarray, background_mu: float, threshold: float = 4.0) -> np.ndarray:
    """Superlevel set of a noiseless frame: (gray - background) >= threshold.

    This is the ground-truth target region used for labels and IoU. The
    threshold is deliberately low so the region does not fracture.
    """
    clean_frame = np.asarray(clean_frame, dtype=np.float64)
    return (clean_frame - background_mu) >= threshold


# ---------------------------------------------------------------------------
# Labeled dataset generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledSample:
    """One synthetic frame with its ground truth."""

    frame: np.ndarray
    ideal_mask: np.ndarray
    streak: StreakParams
    psnr: float


@dataclass(frozen=True)
class DatasetConfig:
    """Recipe for the training corpus.

    Per frame, every ground-truth target pixel (with a valid template)
    becomes one positive row; negatives are drawn so that the final label
    mix is ``background_fraction`` background. Negatives are stratified by
    distance from the target region: a thin contact ring (1 px away), an
    edge band (2 to ``edge_band_radius`` px away), and far background. The
    band dominates by default; those moderately contaminated rows anchor
    the background score median well above pure noise, which is what keeps
    noise blobs small at the operating threshold.
    """

    noise: NoiseParams = field(default_factory=NoiseParams)
    psnr: float = 2.0
    angle_range: tuple[float, float] = (0.0, 180.0)
    length_range: tuple[float, float] = (10.0, 22.0)
    frame_size: tuple[int, int] = (128, 128)  # (width, height)
    mask_threshold: float = 4.0
    psf_sigma: float = 1.35
    background_fraction: float = 0.6
    edge_ring_fraction: float = 0.35  # negatives touching the target region
    edge_band_fraction: float = 0.55  # negatives 2..radius px away
    edge_band_radius: int = 3

    def __post_init__(self):
        if self.angle_range[1] <= self.angle_range[0]:
            raise ValueError(f"empty angle range {self.angle_range}")
        if self.length_range[1] < self.length_range[0]:
            raise ValueError(f"inverted length range {self.length_range}")
        if not 0 < self.background_fraction < 1:
            raise ValueError("background_fraction must be in (0, 1)")
        if self.edge_ring_fraction + self.edge_band_fraction >= 1.0:
            raise ValueError("edge fractions must leave room for far background")
        if self.edge_band_radius < 2:
            raise ValueError("edge_band_radius must be >= 2")
        if self.psnr <= 0:
            raise ValueError("psnr target must be > 0")


# Frames needed for a >= 130,000 row corpus under the default config
# (about 160 rows per frame on average).
DEFAULT_TRAIN_FRAMES = 900


@dataclass
class DatasetRows:
    """Flattened per-pixel training rows with provenance."""

    x: np.ndarray  # (n, 26) float64
    y: np.ndarray  # (n,) int8, 1 = target
    frame_index: np.ndarray  # (n,) int32
    px: np.ndarray  # (n,) int32
    py: np.ndarray  # (n,) int32

    def __len__(self) -> int:
        return self.x.shape[0]


def _sample_streak(rng: np.random.Generator, config: DatasetConfig) -> StreakParams:
    width, height = config.frame_size
    angle = float(rng.uniform(*config.angle_range)) % 180.0
    length = float(rng.uniform(*config.length_range))
    # keep the template-valid part of the streak fully inside the frame
    margin = features.MARGIN + 0.5 * length + SUPPORT_SIGMAS * config.psf_sigma + 1.0
    if 2 * margin >= min(width, height) - 1:
        raise ValueError(
            f"frame {width}x{height} too small for streaks up to length "
            f"{config.length_range[1]}"
        )
    cx = float(rng.uniform(margin, width - 1 - margin))
    cy = float(rng.uniform(margin, height - 1 - margin))
    return StreakParams(
        center=(cx, cy), angle=angle, length=length, intensity=0.0, psf_sigma=config.psf_sigma
    )


def make_mask_and_signal(config: DatasetConfig, streak: StreakParams):
    width, height = config.frame_size
    signal = streak_signal((height, width), streak)
    return signal >= config.mask_threshold, signal


def make_sample(config: DatasetConfig, seed: int) -> LabeledSample:
    """One labeled frame: noise background plus a PSNR-calibrated streak.

    The recorded psnr is the streak's contrast, the noiseless peak over the
    estimated background statistics of the noisy frame.
    """
    rng = np.random.default_rng(seed)
    geometry = _sample_streak(rng, config)
    intensity = calibrate_intensity(config.psnr, geometry, config.noise)
    streak = replace(geometry, intensity=intensity)

    width, height = config.frame_size
    mask, signal = make_mask_and_signal(config, streak)
    noise_seed = subseed(seed, "noise")
    noise = gaussian_background(width, height, replace(config.noise, seed=noise_seed))
    frame = noise + signal
    if mask.any():
        from .image import background_stats

        bck = background_stats(frame)
        measured = float((signal.max() + config.noise.mu - bck.mu_hat) / max(bck.sigma_hat, 1e-12))
    else:
        measured = 0.0
    return LabeledSample(frame=frame, ideal_mask=mask, streak=streak, psnr=measured)


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return ndimage.binary_dilation(mask, structure=np.ones((size, size), bool))


def _frame_rows(sample: LabeledSample, config: DatasetConfig, rng: np.random.Generator):
    """Row pixels for one frame: all target pixels + stratified negatives."""
    mask = sample.ideal_mask
    h, w = mask.shape
    m = features.MARGIN
    valid = np.zeros_like(mask)
    valid[m : h - m, m : w - m] = True

    target = mask & valid
    n_t = int(target.sum())
    if n_t == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int8)

    ring1 = _dilate(mask, 1)
    band_outer = _dilate(mask, config.edge_band_radius)
    ring = ring1 & ~mask & valid
    band = band_outer & ~ring1 & valid
    far = valid & ~band_outer

    frac = config.background_fraction
    n_b = int(round(n_t * frac / (1.0 - frac)))
    n_ring = min(int(round(n_b * config.edge_ring_fraction)), int(ring.sum()))
    n_band = min(int(round(n_b * config.edge_band_fraction)), int(band.sum()))
    n_far = min(n_b - n_ring - n_band, int(far.sum()))

    def pick(region, count):
        ys, xs = np.nonzero(region)
        if count >= ys.size:
            sel = np.arange(ys.size)
        else:
            sel = rng.choice(ys.size, size=count, replace=False)
        return np.column_stack([xs[sel], ys[sel]])

    t_pix = pick(target, n_t)
    b_pix = np.vstack([pick(ring, n_ring), pick(band, n_band), pick(far, n_far)])
    pixels = np.vstack([t_pix, b_pix])
    labels = np.concatenate(
        [np.ones(len(t_pix), dtype=np.int8), np.zeros(len(b_pix), dtype=np.int8)]
    )
    return pixels, labels


def generate_dataset(n_frames: int, config: DatasetConfig, seed: int):
    """Synthesize labeled frames and flattened per-pixel training rows.

    Returns ``(samples, rows)``. Per-frame sub-seeds are derived from the
    master seed, so the output is reproducible and order-independent.
    """
    if n_frames <= 0:
        raise ValueError("n_frames must be > 0")
    samples: list[LabeledSample] = []
    xs, ys, fidx, pxs, pys = [], [], [], [], []
    for i in range(n_frames):
        frame_seed = subseed(seed, i)
        sample = make_sample(config, frame_seed)
        samples.append(sample)
        rng = np.random.default_rng(subseed(seed, i, "rows"))
        pixels, labels = _frame_rows(sample, config, rng)
        if len(pixels) == 0:
            continue
        grid = features.feature_grid(sample.frame)
        m = features.MARGIN
        xs.append(grid[pixels[:, 1] - m, pixels[:, 0] - m])
        ys.append(labels)
        fidx.append(np.full(len(pixels), i, dtype=np.int32))
        pxs.append(pixels[:, 0].astype(np.int32))
        pys.append(pixels[:, 1].astype(np.int32))
    rows = DatasetRows(
        x=np.vstack(xs) if xs else np.empty((0, features.N_FEATURES)),
        y=np.concatenate(ys) if ys else np.empty(0, dtype=np.int8),
        frame_index=np.concatenate(fidx) if fidx else np.empty(0, dtype=np.int32),
        px=np.concatenate(pxs) if pxs else np.empty(0, dtype=np.int32),
        py=np.concatenate(pys) if pys else np.empty(0, dtype=np.int32),
    )
    return samples, rows


def save_rows_csv(rows: DatasetRows, path, comment: str | None = None) -> None:
    """Persist rows as CSV: x1..x26,label (one header row)."""
    header = ",".join(f"x{i}" for i in range(1, features.N_FEATURES + 1)) + ",label"
    with open(path, "w", encoding="ascii") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for feats, label in zip(rows.x, rows.y):
            fh.write(",".join(f"{v:.17g}" for v in feats) + f",{int(label)}\n")


def load_rows_csv(path) -> DatasetRows:
    """Read rows written by :func:`save_rows_csv` (provenance is not stored)."""
    expected = ",".join(f"x{i}" for i in range(1, features.N_FEATURES + 1)) + ",label"
    with open(path, "r", encoding="ascii") as fh:
        header = None
        skip = 0
        for line in fh:
            skip += 1
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                header = stripped
                break
        if header != expected:
            raise ValueError(f"not a dataset rows CSV (bad header): {path}")
        data = np.loadtxt(fh, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != features.N_FEATURES + 1:
        raise ValueError(f"expected {features.N_FEATURES + 1} columns in {path}")
    x = data[:, : features.N_FEATURES]
    y = data[:, features.N_FEATURES].astype(np.int8)
    zeros = np.zeros(len(y), dtype=np.int32)
    return DatasetRows(x=x, y=y, frame_index=zeros, px=zeros.copy(), py=zeros.copy())
