"""Reference PSNR and SSIM on full-resolution RGB frames.

PSNR is 10*log10(255^2 / MSE) with MSE over all RGB samples; identical
frames yield the +inf sentinel (aggregation caps it downstream).

SSIM uses a 7x7 uniform window, K1=0.01, K2=0.03, L=255, unbiased sample
variance normalization, computed per channel and averaged over channels and
over all windows fully inside the frame.  A Gaussian window (sigma 1.5,
11x11) is available behind a flag for the original SSIM variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, uniform_filter

from .errors import DimensionMismatchError, ValidationError
from .media import Frame

K1 = 0.01
K2 = 0.03
L = 255.0
WINDOW = 7
GAUSSIAN_SIGMA = 1.5
GAUSSIAN_TRUNCATE = 3.5  # 11x11 effective window


@dataclass(frozen=True)
class FramePairScore:
    frame_id: str
    psnr: float  # dB; math.inf when frames are identical
    ssim: float


def _check_pair(reference: Frame, test: Frame):
    if not reference.same_size(test):
        raise DimensionMismatchError(
            f"frames differ: {reference.width}x{reference.height} vs "
            f"{test.width}x{test.height}"
        )


def psnr(reference: Frame, test: Frame) -> float:
    """Peak signal-to-noise ratio in dB over all RGB samples."""
    _check_pair(reference, test)
    diff = reference.pixels.astype(np.float64) - test.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(L * L / mse)


def _ssim_channel(x: np.ndarray, y: np.ndarray, gaussian: bool) -> float:
    if gaussian:
        def filt(a):
            return gaussian_filter(a, GAUSSIAN_SIGMA, truncate=GAUSSIAN_TRUNCATE)
        win = 2 * int(GAUSSIAN_TRUNCATE * GAUSSIAN_SIGMA + 0.5) + 1
    else:
        def filt(a):
            return uniform_filter(a, WINDOW)
        win = WINDOW
    np_win = win * win
    cov_norm = np_win / (np_win - 1)  # unbiased sample (co)variance

    ux, uy = filt(x), filt(y)
    uxx, uyy, uxy = filt(x * x), filt(y * y), filt(x * y)
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)

    c1 = (K1 * L) ** 2
    c2 = (K2 * L) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / \
        ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    pad = (win - 1) // 2
    return float(s[pad:-pad, pad:-pad].mean())


def ssim(reference: Frame, test: Frame, gaussian_window: bool = False) -> float:
    """Mean structural similarity over windows, averaged across RGB channels."""
    _check_pair(reference, test)
    win = 2 * int(GAUSSIAN_TRUNCATE * GAUSSIAN_SIGMA + 0.5) + 1 \
        if gaussian_window else WINDOW
    if min(reference.width, reference.height) < win:
        raise ValidationError(
            f"frame {reference.width}x{reference.height} smaller than the "
            f"{win}x{win} SSIM window"
        )
    x = reference.pixels.astype(np.float64)
    y = test.pixels.astype(np.float64)
    return float(np.mean([
        _ssim_channel(x[..., c], y[..., c], gaussian_window) for c in range(3)
    ]))


def score_pair(reference: Frame, test: Frame, frame_id: str = "") -> FramePairScore:
    """Both metrics on full-resolution RGB; no downscaling, no luma shortcut."""
    return FramePairScore(frame_id, psnr(reference, test), ssim(reference, test))
