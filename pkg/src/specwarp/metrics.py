"""Cube quality metrics: peak signal-to-noise ratio, structural
similarity and spectral angle.

All three operate on cubes of identical shape.  PSNR uses a fixed peak
of 1.0 (data is normalized) and reports a 100 dB sentinel for identical
inputs.  SSIM averages per-band maps from an 11x11 Gaussian window.
Spectral angle averages per-pixel angles in degrees, skipping pixels
whose spectrum norm is negligible on either side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .core import HyperCube

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SAM_NORM_FLOOR = 1e-8


@dataclass(frozen=True)
class MetricReport:
    """One row of metric values for a (reference, test) cube pair."""

    psnr: float
    ssim: float
    sam: float

    def to_json(self) -> dict:
        return {"psnr": self.psnr, "ssim": self.ssim, "sam": self.sam}


def _check_dims(a: HyperCube, b: HyperCube) -> None:
    if a.data.shape != b.data.shape:
        msg = f"cube shapes differ: {a.data.shape} vs {b.data.shape}"
        raise ValueError(msg)


def psnr(a: HyperCube, b: HyperCube) -> float:
    """Peak signal-to-noise ratio in dB over all samples, peak 1.0.

    Zero mean squared error returns the 100 dB sentinel; the value is
    capped there so the sentinel is the maximum.
    """
    _check_dims(a, b)
    diff = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def _gaussian_window(side: int, sigma: float) -> np.ndarray:
    half = (side - 1) / 2.0
    coords = np.arange(side, dtype=np.float64) - half
    one_d = np.exp(-(coords * coords) / (2.0 * sigma * sigma))
    window = np.outer(one_d, one_d)
    return window / window.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, window: np.ndarray) -> float:
    mu_x = fftconvolve(x, window, mode="valid")
    mu_y = fftconvolve(y, window, mode="valid")
    xx = fftconvolve(x * x, window, mode="valid")
    yy = fftconvolve(y * y, window, mode="valid")
    xy = fftconvolve(x * y, window, mode="valid")
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: HyperCube, b: HyperCube) -> float:
    """Mean per-band structural similarity.

    Uses an 11x11 Gaussian window with sigma 1.5 (shrunk to the largest
    odd side that fits small inputs), stabilizers (0.01)^2 and (0.03)^2
    on the unit range, and valid-region averaging.
    """
    _check_dims(a, b)
    side = min(SSIM_WINDOW, a.height, a.width)
    if side % 2 == 0:
        side -= 1
    window = _gaussian_window(side, SSIM_SIGMA)
    scores = [
        _ssim_plane(
            a.data[band].astype(np.float64),
            b.data[band].astype(np.float64),
            window,
        )
        for band in range(a.bands)
    ]
    return float(np.mean(scores))


def sam(a: HyperCube, b: HyperCube) -> float:
    """Mean spectral angle in degrees over pixels with usable norms.

    Pixels where either spectrum's norm is at most 1e-8 are excluded
    rather than treated as zero angle.  Returns 0.0 when no pixel
    qualifies.
    """
    _check_dims(a, b)
    mat_a = a.pixel_matrix()
    mat_b = b.pixel_matrix()
    norm_a = np.linalg.norm(mat_a, axis=1)
    norm_b = np.linalg.norm(mat_b, axis=1)
    valid = (norm_a > SAM_NORM_FLOOR) & (norm_b > SAM_NORM_FLOOR)
    if not np.any(valid):
        return 0.0
    unit_a = mat_a[valid] / norm_a[valid, None]
    unit_b = mat_b[valid] / norm_b[valid, None]
    # Half-angle form: 2*atan2(|a-b|, |a+b|) on unit vectors.  Unlike
    # arccos of the normalized dot product it loses no precision near 0
    # or 180 degrees, so colinear spectra give an exact zero.
    chord = np.linalg.norm(unit_a - unit_b, axis=1)
    span = np.linalg.norm(unit_a + unit_b, axis=1)
    angles = 2.0 * np.arctan2(chord, span)
    return float(np.degrees(np.mean(angles)))


def evaluate(reference: HyperCube, test: HyperCube) -> MetricReport:
    """All three metrics for one cube pair."""
    return MetricReport(
        psnr=psnr(reference, test),
        ssim=ssim(reference, test),
        sam=sam(reference, test),
    )
