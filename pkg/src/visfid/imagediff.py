"""View-dependent image measures: MSE and a simplified visible-difference
predictor producing a per-pixel detection map summarized by its mean."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .render import GrayImage

MSE_NORM_EPS = 1e-6  # guards division by black pixels in the normalized variant


class ImageMeasureError(Exception):
    pass


def _check_pair(a: GrayImage, b: GrayImage):
    if (a.width, a.height) != (b.width, b.height):
        raise ImageMeasureError(
            f"image dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    if a.width == 0 or a.height == 0:
        raise ImageMeasureError("images are empty")


def mse(a: GrayImage, b: GrayImage, normalized: bool = False) -> float:
    """Mean squared pixel difference; the normalized variant divides each
    term by the squared pixel of the first (original) image."""
    _check_pair(a, b)
    sq = (a.pixels - b.pixels) ** 2
    if normalized:
        sq = sq / np.maximum(a.pixels**2, MSE_NORM_EPS)
    return float(sq.mean())


# Defaults follow the stimulus viewing geometry: a 17-inch 4:3 CRT
# (0.345 m picture width, 1024 px across) viewed from 0.7 m.
_DISPLAY_WIDTH_M = 0.345
_DISPLAY_WIDTH_PX = 1024
_VIEWING_DISTANCE_M = 0.7


def _default_pixels_per_degree() -> float:
    pixel_m = _DISPLAY_WIDTH_M / _DISPLAY_WIDTH_PX
    deg_per_pixel = np.degrees(np.arctan(pixel_m / _VIEWING_DISTANCE_M))
    return 1.0 / deg_per_pixel


@dataclass(frozen=True)
class ViewParams:
    pixels_per_degree: float = _default_pixels_per_degree()
    max_luminance: float = 100.0  # cd/m^2 for the [0,1] -> luminance mapping

    def __post_init__(self):
        if self.pixels_per_degree <= 0 or self.max_luminance <= 0:
            raise ImageMeasureError("ViewParams must be positive")


@dataclass(frozen=True)
class VdpConstants:
    """Tunable constants of the visible-difference pipeline, in one place."""

    n_bands: int = 5
    lightness_exponent: float = 1.0 / 3.0
    contrast_floor: float = 1e-3     # stabilizes contrast at dark pixels
    csf_peak_cpd: float = 4.0        # peak of the bandpass sensitivity curve
    masking_exponent: float = 0.7    # threshold-elevation exponent
    pooling_exponent: float = 4.0    # Minkowski summation across bands
    detection_threshold: float = 0.05
    psychometric_slope: float = 2.0


VDP = VdpConstants()


@dataclass(frozen=True)
class DiffImage:
    """Per-pixel detection probabilities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise ValueError("DiffImage values must be 2-D")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("DiffImage values must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]


def csf(freq_cpd: np.ndarray | float, peak: float = VDP.csf_peak_cpd):
    """Analytic bandpass contrast-sensitivity approximation, 1 at the peak."""
    f = np.asarray(freq_cpd, dtype=np.float64)
    return (f / peak) * np.exp(1.0 - f / peak)


def band_contrasts(lightness: np.ndarray, consts: VdpConstants = VDP):
    """Band-pass contrast stack: difference-of-Gaussians bands divided by
    the local low-pass mean (plus a dark-stabilizing floor)."""
    blurs = [lightness]
    for k in range(consts.n_bands):
        blurs.append(gaussian_filter(lightness, sigma=float(2**k)))
    bands = []
    for k in range(consts.n_bands):
        base = blurs[k + 1]
        bands.append((blurs[k] - blurs[k + 1]) / (np.abs(base) + consts.contrast_floor))
    return bands


def band_peak_frequencies(pixels_per_degree: float, consts: VdpConstants = VDP):
    """Peak frequency (cycles/degree) of each pyramid band."""
    nyquist = pixels_per_degree / 2.0
    return [nyquist / (2 ** (k + 1)) for k in range(consts.n_bands)]


def perceptual_diff(a: GrayImage, b: GrayImage, vp: ViewParams | None = None,
                    consts: VdpConstants = VDP) -> DiffImage:
    """Simplified visible-difference map between two stimulus images.

    Pipeline: cube-root lightness encoding, 5-level band-pass contrast
    stack, sensitivity weighting at each band's peak frequency, masked
    per-band contrast differencing, Minkowski pooling across bands, and a
    psychometric squashing to per-pixel detection values.  Symmetric in
    its two arguments by construction.
    """
    _check_pair(a, b)
    vp = vp or ViewParams()
    light_a = a.pixels ** consts.lightness_exponent
    light_b = b.pixels ** consts.lightness_exponent
    bands_a = band_contrasts(light_a, consts)
    bands_b = band_contrasts(light_b, consts)
    weights = csf(np.array(band_peak_frequencies(vp.pixels_per_degree, consts)),
                  consts.csf_peak_cpd)
    pooled = np.zeros_like(light_a)
    for ca, cb, w in zip(bands_a, bands_b, weights):
        wa = w * ca
        wb = w * cb
        masking = 1.0 + (0.5 * (np.abs(wa) + np.abs(wb))) ** consts.masking_exponent
        d = np.abs(wa - wb) / masking
        pooled += d ** consts.pooling_exponent
    pooled = pooled ** (1.0 / consts.pooling_exponent)
    detect = 1.0 - np.exp(
        -((pooled / consts.detection_threshold) ** consts.psychometric_slope))
    return DiffImage(detect)


def summarize_diff(d: DiffImage) -> float:
    """Scalar summary: arithmetic mean of all local detection values."""
    if d.values.size == 0:
        raise ImageMeasureError("cannot summarize an empty difference image")
    return float(d.values.mean())


def bm_measure(a: GrayImage, b: GrayImage, vp: ViewParams | None = None) -> float:
    """Perceptual difference map averaged to one number."""
    return summarize_diff(perceptual_diff(a, b, vp))
