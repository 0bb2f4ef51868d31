"""Synthetic ground truth, the mixed-noise model, and the LR formation chain.

Randomness comes from numpy's PCG64 generator seeded through explicit
SeedSequence entropy tuples, so every artifact is reproducible bit-for-bit
across runs and platforms for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linops import downsample_blur
from .raster import MultiBandImage

# Stream tags keep the HR, reference-LR, and target-LR noise fields independent.
_STREAM_HR = 0
_STREAM_LR = 1
_FIXTURE_STREAM = 99

CASE_PRESETS = {
    "case1": (0.0, 0.0, 0.0, 0.0),
    "case2": (0.05, 0.0, 0.0, 0.0),
    "case3": (0.0, 0.0, 0.05, 0.0),
    "case4": (0.05, 0.0, 0.05, 0.0),
}


@dataclass(frozen=True)
class CaseConfig:
    """Noise specification: Gaussian std devs and salt-and-pepper rates."""

    sigma_h: float
    sigma_l: float
    r_h: float
    r_l: float
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_h", "sigma_l"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("r_h", "r_l"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def preset(cls, name: str, seed: int = 0) -> "CaseConfig":
        """One of the four standard noise cases (case1..case4)."""
        try:
            sigma_h, sigma_l, r_h, r_l = CASE_PRESETS[name]
        except KeyError:
            raise ValueError(
                f"unknown case {name!r}; expected one of {sorted(CASE_PRESETS)}"
            ) from None
        return cls(sigma_h=sigma_h, sigma_l=sigma_l, r_h=r_h, r_l=r_l, seed=seed)


def make_lr(hr: MultiBandImage, k: int) -> MultiBandImage:
    """Blur with the k-by-k averaging window, then keep one sample per block."""
    op = downsample_blur(hr.height, hr.width, hr.bands, k)
    return MultiBandImage(hr.height // k, hr.width // k, hr.bands,
                          op.forward(hr.data))


def add_noise(img: MultiBandImage, cfg: CaseConfig, which: str = "hr",
              stream: int = 0) -> MultiBandImage:
    """Apply the observation noise model: Gaussian, then salt-and-pepper.

    Exactly ``round(rate * samples)`` positions (drawn without replacement)
    are replaced with 0 or 1, equiprobably. ``stream`` separates noise
    realizations that share one config, e.g. the two LR dates.
    """
    if which == "hr":
        sigma, rate, tag = cfg.sigma_h, cfg.r_h, _STREAM_HR
    elif which == "lr":
        sigma, rate, tag = cfg.sigma_l, cfg.r_l, _STREAM_LR
    else:
        raise ValueError(f"which must be 'hr' or 'lr', got {which!r}")
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, tag, stream)))
    data = img.data.copy()
    if sigma > 0:
        data += sigma * rng.standard_normal(data.size)
    count = int(np.rint(rate * data.size))
    if count > 0:
        positions = rng.choice(data.size, size=count, replace=False)
        data[positions] = rng.integers(0, 2, size=count).astype(np.float64)
    return img.with_data(data)


@dataclass(frozen=True)
class FixtureSpec:
    """Scene generator settings for a synthetic ground-truth pair.

    A seeded Voronoi partition gives a piecewise-constant scene whose region
    boundaries ("land structure") are shared between the two dates, while
    each region's per-band reflectance shifts by up to ``shift`` between
    them. Base reflectances stay inside [base_lo, base_hi] so shifted values
    never need clipping.
    """

    height: int
    width: int
    bands: int
    k: int
    regions: int = 6
    shift: float = 0.05
    base_lo: float = 0.15
    base_hi: float = 0.85
    seed: int = 0

    def __post_init__(self):
        if self.height % self.k or self.width % self.k:
            raise ValueError(
                f"resolution factor {self.k} must divide {self.height}x{self.width}"
            )
        if self.regions < 1:
            raise ValueError("need at least one region")
        if not 0.0 < self.base_lo < self.base_hi < 1.0:
            raise ValueError("base reflectance range must be inside (0, 1)")
        if self.shift < 0 or self.shift > min(self.base_lo, 1.0 - self.base_hi):
            raise ValueError(
                "shift must be non-negative and small enough to keep values in (0, 1)"
            )


@dataclass(frozen=True)
class Fixture:
    """Ground truth plus the three observed inputs for one noise case."""

    spec: FixtureSpec
    case: CaseConfig
    h_r_true: MultiBandImage
    h_t_true: MultiBandImage
    h_r: MultiBandImage
    l_r: MultiBandImage
    l_t: MultiBandImage


def _voronoi_labels(spec: FixtureSpec, rng: np.random.Generator) -> np.ndarray:
    sy = rng.uniform(0, spec.height, spec.regions)
    sx = rng.uniform(0, spec.width, spec.regions)
    yy, xx = np.mgrid[0 : spec.height, 0 : spec.width]
    d2 = (yy[..., None] - sy) ** 2 + (xx[..., None] - sx) ** 2
    return np.argmin(d2, axis=-1)


def make_truth_pair(spec: FixtureSpec) -> tuple[MultiBandImage, MultiBandImage]:
    """Reference-date and target-date noiseless HR images."""
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, _FIXTURE_STREAM)))
    labels = _voronoi_labels(spec, rng)
    base = rng.uniform(spec.base_lo, spec.base_hi, size=(spec.regions, spec.bands))
    delta = rng.uniform(-spec.shift, spec.shift, size=(spec.regions, spec.bands))
    ref_cube = base[labels].transpose(2, 0, 1)
    tgt_cube = (base + delta)[labels].transpose(2, 0, 1)
    ref = MultiBandImage(spec.height, spec.width, spec.bands, ref_cube.ravel())
    tgt = MultiBandImage(spec.height, spec.width, spec.bands, tgt_cube.ravel())
    return ref, tgt


def make_fixture(spec: FixtureSpec, case: CaseConfig) -> Fixture:
    """Truth pair, LR formation, then per-observation noise."""
    h_r_true, h_t_true = make_truth_pair(spec)
    l_r_clean = make_lr(h_r_true, spec.k)
    l_t_clean = make_lr(h_t_true, spec.k)
    return Fixture(
        spec=spec,
        case=case,
        h_r_true=h_r_true,
        h_t_true=h_t_true,
        h_r=add_noise(h_r_true, case, "hr", stream=0),
        l_r=add_noise(l_r_clean, case, "lr", stream=1),
        l_t=add_noise(l_t_clean, case, "lr", stream=2),
    )
