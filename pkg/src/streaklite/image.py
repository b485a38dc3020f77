"""Grayscale frame primitives: noise synthesis, background statistics, PGM I/O.

A frame is a plain 2-D float64 numpy array indexed ``frame[y, x]``. Gray
values are real-valued internally; quantization to 8 bits happens only when
writing PGM files (round half up). Everything here is a pure function of its
arguments, so frames can be shared freely across threads.

Random numbers come from numpy's PCG64 bit generator (``default_rng``),
whose stream for a given seed is stable across numpy releases. Sub-seeds for
parallel work are derived with :func:`subseed`, a SHA-256 based split that
does not depend on numpy at all.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseParams",
    "BackgroundStats",
    "PgmFormatError",
    "gaussian_background",
    "background_stats",
    "subseed",
    "load_pgm",
    "save_pgm",
    "save_mask",
]


@dataclass(frozen=True)
class NoiseParams:
    """Additive Gaussian background: gray ~ N(mu, sigma^2), clamped at 0."""

    mu: float = 30.0
    sigma: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"noise mean must be >= 0, got {self.mu}")
        if self.sigma < 0:
            raise ValueError(f"noise sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class BackgroundStats:
    """Sigma-clipped background estimate of a frame."""

    mu_hat: float
    sigma_hat: float

    def __post_init__(self):
        if self.sigma_hat < 0:
            raise ValueError("sigma_hat must be >= 0")


class PgmFormatError(ValueError):
    """Raised for malformed or unsupported PGM files."""


def subseed(master: int, *parts) -> int:
    """Derive a deterministic 64-bit sub-seed from a master seed.

    ``subseed(master, i)`` is the seed-splitting contract used by frame
    generators and sweep drivers: it only depends on the values of
    ``master`` and ``parts``, never on call order or worker count.
    """
    text = repr((int(master),) + tuple(parts)).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "big")


def gaussian_background(width: int, height: int, noise: NoiseParams) -> np.ndarray:
    """Synthesize a pure-noise frame of shape (height, width).

    Each pixel is an independent draw from N(mu, sigma^2); negative samples
    clamp to 0 (sensor floor). The same (width, height, noise) always yields
    a bit-identical frame.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"frame dimensions must be positive, got {width}x{height}")
    rng = np.random.default_rng(noise.seed)
    frame = noise.mu + noise.sigma * rng.standard_normal((height, width))
    np.maximum(frame, 0.0, out=frame)
    return frame


def background_stats(frame: np.ndarray, clip: float = 3.0, iterations: int = 3) -> BackgroundStats:
    """Sigma-clipped mean/std of a frame.

    Three rounds of 3-sigma clipping are enough to reject the sparse bright
    pixels of a streak without biasing the noise estimate.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0:
        raise ValueError("cannot estimate background of an empty frame")
    values = frame.ravel()
    mu = float(values.mean())
    sigma = float(values.std())
    for _ in range(iterations):
        if sigma == 0.0:
            break
        keep = np.abs(values - mu) <= clip * sigma
        values = values[keep]
        if values.size == 0:
            break
        mu = float(values.mean())
        sigma = float(values.std())
    return BackgroundStats(mu_hat=mu, sigma_hat=sigma)


# ---------------------------------------------------------------------------
# PGM (portable graymap) I/O. 8-bit only, maxval 255.
# Reader accepts binary P5 and ASCII P2; writer emits P5.
# ---------------------------------------------------------------------------


def _read_header_tokens(data: bytes, count: int):
    """Pull `count` whitespace-separated tokens off a PGM header.

    Comments (# to end of line) are allowed anywhere whitespace is.
    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last token.
    """
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise PgmFormatError("malformed PGM header: truncated before all fields were read")
        tokens.append(data[start:i])
        if len(tokens) == count:
            if i >= n:
                raise PgmFormatError("malformed PGM header: missing separator after maxval")
            i += 1  # exactly one whitespace byte before the payload
    return tokens, i


def load_pgm(path) -> np.ndarray:
    """Read an 8-bit PGM file (binary P5 or ASCII P2) as a float64 frame."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2 or data[:2] not in (b"P5", b"P2"):
        raise PgmFormatError("malformed PGM header: bad magic (expected P5 or P2)")
    magic = data[:2]
    tokens, offset = _read_header_tokens(data[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmFormatError("malformed PGM header: non-numeric size field") from None
    if width <= 0 or height <= 0:
        raise PgmFormatError(f"malformed PGM header: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmFormatError(f"unsupported bit depth: maxval {maxval} (only 255 supported)")
    payload = data[2 + offset :]
    if magic == b"P5":
        expected = width * height
        if len(payload) < expected:
            raise PgmFormatError(
                f"truncated PGM payload: expected {expected} bytes, got {len(payload)}"
            )
        pixels = np.frombuffer(payload[:expected], dtype=np.uint8)
    else:
        fields = payload.split()
        if len(fields) < width * height:
            raise PgmFormatError(
                f"truncated PGM payload: expected {width * height} values, got {len(fields)}"
            )
        try:
            pixels = np.array([int(f) for f in fields[: width * height]], dtype=np.int64)
        except ValueError:
            raise PgmFormatError("malformed PGM payload: non-numeric ASCII sample") from None
        if pixels.min() < 0 or pixels.max() > 255:
            raise PgmFormatError("malformed PGM payload: sample out of [0, 255]")
    return pixels.reshape(height, width).astype(np.float64)


def _quantize(frame: np.ndarray) -> np.ndarray:
    # round half up, clip into the 8-bit range
    return np.clip(np.floor(np.asarray(frame, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def save_pgm(frame: np.ndarray, path) -> None:
    """Write a frame as binary 8-bit PGM (P5). Values are rounded half up."""
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ValueError(f"frame must be 2-D, got shape {frame.shape}")
    height, width = frame.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_quantize(frame).tobytes())


def save_mask(mask: np.ndarray, path) -> None:
    """Write a boolean map as a {0, 255} P5 mask."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    save_pgm(np.where(mask.astype(bool), 255.0, 0.0), path)
