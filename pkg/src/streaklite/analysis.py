"""Theoretical capability analysis of the 25-tile template.

Under independent Gaussian pixels, a 5x5 tile crossed by a 3-layer streak
has closed-form mean-gray statistics; the brightest-pixel gray of the tile
has a product-of-CDFs distribution. Comparing these with single-pixel
distributions shows why averaged features separate target from background
far better than raw pixels do.

The weighted sum of the 25 tile-mean features is again Gaussian with
closed-form parameters; the max-gray term is not, and is only ever reported
as Monte-Carlo samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from .features import N_FEATURES

__all__ = [
    "AnalysisParams",
    "streak_occupancy",
    "subregion_distributions",
    "max_gray_distribution",
    "weighted_sum_distribution",
    "sample_weighted_terms",
    "pdf_overlap",
]

N0 = 25  # pixels per 5x5 sub-region
N_STREAK_LAYERS = 3


@dataclass(frozen=True)
class AnalysisParams:
    """Inputs of the capability analysis for one target sub-region layout."""

    noise_mu: float = 30.0
    noise_sigma: float = 8.0
    layer_means: tuple[float, float, float] = (40.0, 46.0, 40.0)
    layer_stds: tuple[float, float, float] = (8.0, 8.0, 8.0)
    occupancy: tuple[int, int, int] = (5, 5, 5)  # pixels of the tile in each layer
    bg_count: int = 10  # remaining tile pixels are pure background
    k: int = 24  # how many of the 25 tile features are pure background
    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    bias: float = 0.0

    def __post_init__(self):
        if self.bg_count + sum(self.occupancy) != N0:
            raise ValueError(
                f"occupancy {self.occupancy} + background {self.bg_count} must cover {N0} pixels"
            )
        if not 0 <= self.k <= N0:
            raise ValueError(f"k must be in [0, {N0}]")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (N_FEATURES,):
            raise ValueError(f"weights must have shape ({N_FEATURES},)")
        object.__setattr__(self, "weights", w)
        if any(s <= 0 for s in self.layer_stds) or self.noise_sigma <= 0:
            raise ValueError("all sigmas must be > 0")


def streak_occupancy(angle_deg: float, tile: int = 5) -> tuple[tuple[int, int, int], int]:
    """Pixel counts of the three streak layers in a centered tile, by geometry.

    A 3 px wide streak through the tile center at the given angle assigns
    each pixel to the layer whose perpendicular offset (rounded) it is
    nearest; pixels beyond the band count as background. Returns
    ``(occupancy, bg_count)``.
    """
    half = (tile - 1) / 2.0
    rad = math.radians(angle_deg)
    n = np.array([-math.sin(rad), math.cos(rad)])
    occupancy = [0, 0, 0]
    bg = 0
    for y in np.arange(-half, half + 1):
        for x in np.arange(-half, half + 1):
            offset = float(np.array([x, y]) @ n)
            layer = int(math.floor(offset + 0.5))
            if -1 <= layer <= 1:
                occupancy[layer + 1] += 1
            else:
                bg += 1
    return tuple(occupancy), bg


def subregion_distributions(params: AnalysisParams):
    """Gaussian (mu, sigma) of the mean gray of a background and a target tile."""
    mu_sb = params.noise_mu
    sigma_sb = params.noise_sigma / math.sqrt(N0)

    mu_st = params.bg_count * params.noise_mu
    var_st = params.bg_count * params.noise_sigma**2
    for count, mu, sd in zip(params.occupancy, params.layer_means, params.layer_stds):
        mu_st += count * mu
        var_st += count * sd**2
    mu_st /= N0
    sigma_st = math.sqrt(var_st) / N0
    return (mu_sb, sigma_sb), (mu_st, sigma_st)


def _tile_pixel_populations(params: AnalysisParams):
    """(mu, sigma, count) triples describing the 25 pixels of the target tile."""
    pops = [(params.noise_mu, params.noise_sigma, params.bg_count)]
    pops += list(zip(params.layer_means, params.layer_stds, params.occupancy))
    return [(mu, sd, n) for mu, sd, n in pops if n > 0]


def max_gray_cdf(params: AnalysisParams, grid: np.ndarray) -> np.ndarray:
    """Analytic CDF of the brightest pixel of the target tile on a grid."""
    grid = np.asarray(grid, dtype=np.float64)
    log_cdf = np.zeros_like(grid)
    for mu, sd, count in _tile_pixel_populations(params):
        log_cdf += count * norm.logcdf((grid - mu) / sd)
    return np.exp(log_cdf)


def max_gray_distribution(params: AnalysisParams, n_samples: int, seed: int = 0, grid=None):
    """Empirical samples plus analytic CDF/PDF of the tile's brightest gray.

    Returns ``(samples, grid, cdf, pdf)``; the PDF is the numerical
    derivative of the analytic CDF on the grid.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    parts = []
    for mu, sd, count in _tile_pixel_populations(params):
        parts.append(mu + sd * rng.standard_normal((n_samples, count)))
    samples = np.concatenate(parts, axis=1).max(axis=1)

    if grid is None:
        lo = min(mu - 5 * sd for mu, sd, _ in _tile_pixel_populations(params))
        hi = max(mu + 6 * sd for mu, sd, _ in _tile_pixel_populations(params))
        grid = np.linspace(lo, hi, 2001)
    grid = np.asarray(grid, dtype=np.float64)
    cdf = max_gray_cdf(params, grid)
    pdf = np.gradient(cdf, grid)
    return samples, grid, cdf, pdf


def weighted_sum_distribution(params: AnalysisParams) -> tuple[float, float]:
    """Gaussian (mu, sigma) of the weighted sum of the 25 tile-mean features.

    The first k tiles are pure background, the rest follow the target-tile
    law. The 26th (max gray) term is excluded: it has no common closed
    form, so it is only available through :func:`sample_weighted_terms`.
    """
    (mu_sb, sigma_sb), (mu_st, sigma_st) = subregion_distributions(params)
    w = params.weights
    w_bg = w[: params.k]
    w_tg = w[params.k : N0]
    mu = mu_sb * float(w_bg.sum()) + mu_st * float(w_tg.sum())
    var = sigma_sb**2 * float((w_bg**2).sum()) + sigma_st**2 * float((w_tg**2).sum())
    return mu, math.sqrt(var)


def sample_weighted_terms(params: AnalysisParams, n_samples: int, seed: int = 0):
    """Monte-Carlo draws of the Gaussian sum term and of the max-gray term.

    The max-gray term is w26 * (tile max - background reference), where the
    reference is the minimum of the k background tile means (the noise mean
    when k is 0). Returns ``(a1_samples, a2_samples)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    (mu_sb, sigma_sb), (mu_st, sigma_st) = subregion_distributions(params)
    bg_means = mu_sb + sigma_sb * rng.standard_normal((n_samples, params.k))
    tg_means = mu_st + sigma_st * rng.standard_normal((n_samples, N0 - params.k))
    w = params.weights
    a1 = bg_means @ w[: params.k] + tg_means @ w[params.k : N0]

    parts = []
    for mu, sd, count in _tile_pixel_populations(params):
        parts.append(mu + sd * rng.standard_normal((n_samples, count)))
    g_max = np.concatenate(parts, axis=1).max(axis=1)
    if params.k > 0:
        m_bck = bg_means.min(axis=1)
    else:
        m_bck = np.full(n_samples, params.noise_mu)
    a2 = w[25] * (g_max - m_bck)
    return a1, a2


def pdf_overlap(pdf_a: np.ndarray, pdf_b: np.ndarray, grid: np.ndarray) -> float:
    """Overlap coefficient of two densities sampled on a common grid."""
    return float(trapezoid(np.minimum(pdf_a, pdf_b), grid))
