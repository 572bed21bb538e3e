"""Reference fidelity metrics on luma (PSNR, SSIM) and score correlations.

PSNR/SSIM run on the BT.601 Y channel scaled to 0..255. Correlations are
raw Pearson (PLCC) and Pearson-of-average-ranks (SRCC); no logistic
remapping is applied before PLCC.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy import signal
from scipy.stats import rankdata

from restoriq.errors import MetricError
from restoriq.imaging import rgb_to_y

PSNR_MAX = math.inf  # sentinel for identical inputs

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0


def psnr_y(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between luma planes, 0..255 scale."""
    ya = rgb_to_y(a)
    yb = rgb_to_y(b)
    if ya.shape != yb.shape:
        raise MetricError(f"shape mismatch: {ya.shape} vs {yb.shape}")
    mse = float(np.mean((255.0 * (ya - yb)) ** 2))
    if mse == 0.0:
        return PSNR_MAX
    return 20.0 * math.log10(255.0 / math.sqrt(mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim_y(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM over luma; 11x11 Gaussian window, valid region only."""
    ya = rgb_to_y(a) * 255.0
    yb = rgb_to_y(b) * 255.0
    if ya.shape != yb.shape:
        raise MetricError(f"shape mismatch: {ya.shape} vs {yb.shape}")
    if min(ya.shape) < SSIM_WINDOW:
        raise MetricError(
            f"image {ya.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2

    mu_a = signal.convolve2d(ya, win, mode="valid")
    mu_b = signal.convolve2d(yb, win, mode="valid")
    ea2 = signal.convolve2d(ya * ya, win, mode="valid")
    eb2 = signal.convolve2d(yb * yb, win, mode="valid")
    eab = signal.convolve2d(ya * yb, win, mode="valid")
    var_a = ea2 - mu_a * mu_a
    var_b = eb2 - mu_b * mu_b
    cov = eab - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def correlations(predicted, ground_truth) -> dict[str, float]:
    """PLCC (raw Pearson) and SRCC (Pearson of average ranks)."""
    p = np.asarray(predicted, dtype=np.float64)
    g = np.asarray(ground_truth, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1:
        raise MetricError(f"score lists must be equal-length 1-D, got {p.shape} vs {g.shape}")
    if p.size < 2:
        raise MetricError("need at least 2 score pairs")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(g))):
        raise MetricError("scores contain non-finite values")
    if np.all(p == p[0]) or np.all(g == g[0]):
        raise MetricError("correlation undefined for a constant sequence")
    plcc = _pearson(p, g)
    srcc = _pearson(rankdata(p, method="average"), rankdata(g, method="average"))
    return {"plcc": plcc, "srcc": srcc}


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))


_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


def parse_score(text: str) -> float | None:
    """First decimal number in generated IQA text, or None if unparseable."""
    m = _NUMBER_RE.search(text)
    return float(m.group(0)) if m else None
