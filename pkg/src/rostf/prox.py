"""Closed-form proximity operators and projections used by the solver.

All functions are pure. Vectors with per-pixel cross-band structure are flat
and band-major: ``x.reshape(bands, -1)`` puts one band per row, so a column
is the sample group of one pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def group_l2_norms(x: np.ndarray, bands: int) -> np.ndarray:
    """Euclidean norm of each cross-band pixel group of a band-major vector."""
    m = x.reshape(bands, -1)
    return np.sqrt((m * m).sum(axis=0))


def l12_norm(x: np.ndarray, bands: int) -> float:
    """Sum of per-pixel cross-band group norms."""
    return float(group_l2_norms(x, bands).sum())


def prox_l12(x: np.ndarray, gamma: float, bands: int) -> np.ndarray:
    """Group soft-shrinkage: each pixel group scales by max(1 - g/|group|, 0).

    Zero-norm groups map to zero directly, avoiding a 0/0.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    m = x.reshape(bands, -1)
    gn = np.sqrt((m * m).sum(axis=0))
    scale = np.zeros_like(gn)
    nz = gn > 0
    scale[nz] = np.maximum(1.0 - gamma / gn[nz], 0.0)
    return (m * scale).ravel()


def project_hyperslab(x: np.ndarray, center: float, radius: float) -> np.ndarray:
    """Project onto {z : |center - sum(z)| <= radius}.

    The correction is spread uniformly, so the denominator is the operand's
    dimension.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    s = float(x.sum())
    eta1, eta2 = center - radius, center + radius
    if s < eta1:
        return x + (eta1 - s) / x.size
    if s > eta2:
        return x + (eta2 - s) / x.size
    return x.copy()


def project_l2_ball(x: np.ndarray, center, radius: float) -> np.ndarray:
    """Project onto the l2 ball; boundary points are returned unchanged."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    center = np.asarray(center, dtype=np.float64)
    if center.ndim and center.size != x.size:
        raise ValueError(f"center size {center.size} != operand size {x.size}")
    d = x - center
    nd = float(np.linalg.norm(d))
    if nd <= radius:
        return x.copy()
    if radius == 0.0:
        return np.broadcast_to(center, x.shape).astype(np.float64).copy()
    return center + (radius / nd) * d


def project_l1_ball(x: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {z : ||z||_1 <= radius}, origin-centered.

    Sort-based threshold selection: soft-thresholding with the unique
    theta >= 0 making the result's l1 norm hit the radius.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if radius == 0.0:
        return np.zeros_like(x)
    a = np.abs(x)
    if a.sum() <= radius:
        return x.copy()
    u = np.sort(a)[::-1].copy()  # contiguous: cumsum over the view is slow
    cssv = np.cumsum(u) - radius
    idx = np.arange(1, x.size + 1)
    # the optimality condition holds on a prefix: the last true index wins
    rho = int(np.count_nonzero(u * idx > cssv)) - 1
    theta = cssv[rho] / (rho + 1.0)
    return np.sign(x) * np.maximum(a - theta, 0.0)


def prox_conjugate(prox_f, x: np.ndarray, gamma: float) -> np.ndarray:
    """Prox of the conjugate via the Moreau identity.

    ``prox_f(v, t)`` must evaluate the prox of ``t*f`` at ``v`` for any
    positive ``t``.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return x - gamma * prox_f(x / gamma, 1.0 / gamma)


@dataclass(frozen=True)
class Hyperslab:
    """Sum-of-coordinates slab with a scalar center and radius."""

    center: float
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")

    def project(self, x: np.ndarray) -> np.ndarray:
        return project_hyperslab(x, self.center, self.radius)


@dataclass(frozen=True)
class Ball:
    """An lp-norm ball, p in {1, 2}. l1 balls are origin-centered."""

    p: int
    radius: float
    center: object = 0.0

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        if self.radius < 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")
        if self.p == 1 and np.any(np.asarray(self.center) != 0.0):
            raise ValueError("l1 balls support only the origin center")

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.p == 2:
            return project_l2_ball(x, self.center, self.radius)
        return project_l1_ball(x, self.radius)
