"""Evaluation metrics: RMSE, spectral angle, mean SSIM, correlation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .raster import MultiBandImage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_DYNAMIC_RANGE = 1.0


@dataclass(frozen=True)
class MetricsReport:
    rmse: float
    sam: float
    mssim: float
    cc: float

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent)


def _check_geometry(est: MultiBandImage, truth: MultiBandImage) -> None:
    if est.shape != truth.shape:
        raise ValueError(f"geometry mismatch: {est.shape} vs {truth.shape}")


def rmse(est: MultiBandImage, truth: MultiBandImage) -> float:
    """Root mean square error over all samples."""
    _check_geometry(est, truth)
    d = est.data - truth.data
    return float(np.sqrt((d * d).mean()))


def sam(est: MultiBandImage, truth: MultiBandImage) -> float:
    """Mean per-pixel angle (radians) between the two spectral vectors.

    Pixels where either spectrum is the zero vector contribute angle 0.
    """
    _check_geometry(est, truth)
    a = est.band_matrix()
    b = truth.band_matrix()
    na = np.sqrt((a * a).sum(axis=0))
    nb = np.sqrt((b * b).sum(axis=0))
    dots = (a * b).sum(axis=0)
    angles = np.zeros(est.pixels)
    ok = (na > 0) & (nb > 0)
    cosine = np.clip(dots[ok] / (na[ok] * nb[ok]), -1.0, 1.0)
    angles[ok] = np.arccos(cosine)
    return float(angles.mean())


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-0.5 * (r / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_band(x: np.ndarray, y: np.ndarray, kernel: np.ndarray,
               c1: float, c2: float) -> float:
    # Weighted local moments over every fully interior window position.
    wx = sliding_window_view(x, kernel.shape)
    wy = sliding_window_view(y, kernel.shape)
    mx = np.einsum("ijkl,kl->ij", wx, kernel)
    my = np.einsum("ijkl,kl->ij", wy, kernel)
    mxx = np.einsum("ijkl,ijkl,kl->ij", wx, wx, kernel)
    myy = np.einsum("ijkl,ijkl,kl->ij", wy, wy, kernel)
    mxy = np.einsum("ijkl,ijkl,kl->ij", wx, wy, kernel)
    vx = mxx - mx * mx
    vy = myy - my * my
    cov = mxy - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * cov + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float((num / den).mean())


def mssim(est: MultiBandImage, truth: MultiBandImage) -> float:
    """Mean over bands of single-band SSIM.

    Uses the reference defaults: 11x11 Gaussian window with sigma 1.5,
    stabilizers (0.01*L)^2 and (0.03*L)^2 with dynamic range L = 1, averaged
    over valid window positions.
    """
    _check_geometry(est, truth)
    if min(est.height, est.width) < SSIM_WINDOW:
        raise ValueError(
            f"image {est.height}x{est.width} smaller than the {SSIM_WINDOW}px window"
        )
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * SSIM_DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_DYNAMIC_RANGE) ** 2
    vals = [
        _ssim_band(est.band_image(b), truth.band_image(b), kernel, c1, c2)
        for b in range(est.bands)
    ]
    return float(np.mean(vals))


def cc(est: MultiBandImage, truth: MultiBandImage) -> float:
    """Pearson correlation over all samples flattened."""
    _check_geometry(est, truth)
    a = est.data - est.data.mean()
    b = truth.data - truth.data.mean()
    sa = math.sqrt(float((a * a).mean()))
    sb = math.sqrt(float((b * b).mean()))
    if sa == 0.0 or sb == 0.0:
        raise ValueError("correlation undefined for a zero-variance image")
    return float((a * b).mean() / (sa * sb))


def evaluate(est: MultiBandImage, truth: MultiBandImage) -> MetricsReport:
    """All four metrics of an estimate against ground truth."""
    return MetricsReport(
        rmse=rmse(est, truth),
        sam=sam(est, truth),
        mssim=mssim(est, truth),
        cc=cc(est, truth),
    )
