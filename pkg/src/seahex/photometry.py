"""Heading-aware exposure control and histogram-weighted gamma enhancement.

The exposure controller picks an exposure time from the angle between the
sun heading and the vehicle heading:

    t_exp = 0.5 * (cos(sun - uav) + 1) * (t_max - t_min) + t_min

The contrast enhancer builds a per-intensity gamma table from the image's
own 256-bin histogram:

    pdf_w(l) = pdf_max * ((pdf(l) - pdf_min) / (pdf_max - pdf_min)) ** alpha
    cdf_w(l) = cumsum(pdf_w)(l) / sum(pdf_w)
    gamma(l) = 1 - cdf_w(l)

and remaps each pixel through l -> round(255 * (l / 255) ** gamma(l)).
pdf_min and pdf_max are taken over all 256 bins, empty ones included, so
pdf_min is 0 whenever any intensity is absent.

Degenerate histograms (all 256 bins tied, or a single occupied bin, which
covers constant images) carry no usable weighting information.  For those
the table is built from the unweighted pdf, the result is flagged via
``GammaTable.fallback``, and ``agcwd_apply`` leaves the image unchanged,
which keeps constant images fixed points of the enhancement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

L_MAX = 255
DEFAULT_ALPHA = 0.5


class MalformedImage(ValueError):
    """Raised on malformed PGM input."""


@dataclass(frozen=True)
class ExposureCalibration:
    """Exposure time bounds in microseconds, from pre-deployment calibration."""

    t_exp_min: float
    t_exp_max: float

    def __post_init__(self):
        if not (math.isfinite(self.t_exp_min) and math.isfinite(self.t_exp_max)):
            raise ValueError("exposure bounds must be finite")
        if not (0.0 < self.t_exp_min <= self.t_exp_max):
            raise ValueError("require 0 < t_exp_min <= t_exp_max")


def exposure_time(sun_heading: float, uav_heading: float, calib: ExposureCalibration) -> float:
    """Exposure time in microseconds for the given sun and vehicle headings."""
    span = calib.t_exp_max - calib.t_exp_min
    return 0.5 * (math.cos(sun_heading - uav_heading) + 1.0) * span + calib.t_exp_min


class GrayImage:
    """8-bit grayscale raster; pixels stored row-major as a (h, w) uint8 array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        a = np.asarray(pixels)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError("image must be a 2-D array with positive dimensions")
        if a.dtype != np.uint8:
            if np.any((a < 0) | (a > L_MAX)):
                raise ValueError("intensities must lie in [0, 255]")
            a = a.astype(np.uint8)
        self.pixels = a

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @staticmethod
    def constant(width: int, height: int, value: int) -> "GrayImage":
        return GrayImage(np.full((height, width), value, dtype=np.uint8))

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class Histogram256:
    """256-bin intensity histogram; ``total`` is the pixel count."""

    counts: np.ndarray
    total: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (256,) or np.any(c < 0):
            raise ValueError("counts must be 256 non-negative integers")
        if self.total <= 0 or int(c.sum()) != self.total:
            raise ValueError("total must be positive and equal the sum of counts")
        object.__setattr__(self, "counts", c)

    @staticmethod
    def from_counts(counts) -> "Histogram256":
        c = np.asarray(counts, dtype=np.int64)
        return Histogram256(c, int(c.sum()))


def histogram(img: GrayImage) -> Histogram256:
    counts = np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)
    return Histogram256(counts, int(img.pixels.size))


@dataclass(frozen=True)
class GammaTable:
    """Per-intensity exponents in [0, 1]; ``fallback`` marks degenerate input."""

    gamma: np.ndarray
    fallback: bool = False


def agcwd_gamma(hist: Histogram256, alpha: float = DEFAULT_ALPHA) -> GammaTable:
    """Gamma table from a histogram, weighted by ``alpha``."""
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise ValueError("alpha must be positive and finite")
    pdf = hist.counts.astype(np.float64) / float(hist.total)
    pdf_min = float(pdf.min())
    pdf_max = float(pdf.max())
    degenerate = pdf_max == pdf_min or int(np.count_nonzero(hist.counts)) == 1
    if degenerate:
        pdf_w = pdf
    else:
        pdf_w = pdf_max * ((pdf - pdf_min) / (pdf_max - pdf_min)) ** alpha
    cdf_w = np.cumsum(pdf_w)
    cdf_w /= cdf_w[-1]
    gamma = 1.0 - cdf_w
    return GammaTable(gamma=gamma, fallback=degenerate)


def _build_lut(gamma: np.ndarray) -> np.ndarray:
    levels = np.arange(256, dtype=np.float64)
    mapped = L_MAX * (levels / L_MAX) ** gamma
    mapped[0] = 0.0  # 0**0 := 0, black stays black
    lut = np.floor(mapped + 0.5)  # round half away from zero (values are >= 0)
    return np.clip(lut, 0, L_MAX).astype(np.uint8)


def agcwd_apply(img: GrayImage, alpha: float = DEFAULT_ALPHA) -> GrayImage:
    """Remap an image through its own gamma table.

    Degenerate histograms (see ``agcwd_gamma``) pass the image through
    unchanged.
    """
    table = agcwd_gamma(histogram(img), alpha)
    if table.fallback:
        return GrayImage(img.pixels.copy())
    return GrayImage(_build_lut(table.gamma)[img.pixels])


# ---------------------------------------------------------------------------
# Binary PGM (P5, maxval 255) I/O


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise MalformedImage("truncated header")
    return data[start:pos], pos


def load_pgm(data: bytes) -> GrayImage:
    """Parse a binary PGM (magic P5, maxval 255)."""
    if not data.startswith(b"P5"):
        raise MalformedImage("bad magic, expected P5")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise MalformedImage(f"non-numeric header token {token!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise MalformedImage("dimensions must be positive")
    if maxval != 255:
        raise MalformedImage(f"unsupported maxval {maxval}, expected 255")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedImage("missing whitespace after maxval")
    pos += 1
    payload = data[pos : pos + width * height]
    if len(payload) != width * height:
        raise MalformedImage("truncated payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape((height, width))
    return GrayImage(pixels.copy())


def save_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()
