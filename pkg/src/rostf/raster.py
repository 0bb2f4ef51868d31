"""Multiband raster container, norms, and bit-exact file I/O.

Images are stored as flat float64 vectors in band-major order: band ``b``
occupies the contiguous slice ``[b*N, (b+1)*N)`` with ``N = height*width``,
row-major within a band. All public operations keep samples finite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"BMRAST01"


class RasterError(Exception):
    """Base class for raster container/format failures."""


class RasterFormatError(RasterError):
    """Raised when a .bmr stream cannot be decoded."""


@dataclass(frozen=True)
class MultiBandImage:
    """Immutable multiband image with band-major flat storage.

    Parameters
    ----------
    height, width : int
        Spatial dimensions in pixels, both positive.
    bands : int
        Number of spectral bands, positive.
    data : ndarray
        Flat float64 vector of length ``height*width*bands``, band-major.
    """

    height: int
    width: int
    bands: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0 or self.bands <= 0:
            raise RasterError(
                f"dimensions must be positive, got "
                f"{self.height}x{self.width}x{self.bands}"
            )
        arr = np.ascontiguousarray(self.data, dtype=np.float64).ravel()
        expected = self.height * self.width * self.bands
        if arr.size != expected:
            raise RasterError(
                f"data length {arr.size} does not match "
                f"height*width*bands = {expected}"
            )
        if not np.all(np.isfinite(arr)):
            raise RasterError("image contains non-finite samples")
        if arr is self.data and arr.flags.writeable:
            arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def pixels(self) -> int:
        """Pixels per band (N)."""
        return self.height * self.width

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.bands)

    def band(self, b: int) -> np.ndarray:
        """Read-only view of band ``b`` as a length-N vector."""
        if not 0 <= b < self.bands:
            raise IndexError(f"band index {b} out of range [0, {self.bands})")
        n = self.pixels
        return self.data[b * n : (b + 1) * n]

    def band_matrix(self) -> np.ndarray:
        """Read-only (bands, N) view of the sample matrix."""
        return self.data.reshape(self.bands, self.pixels)

    def band_image(self, b: int) -> np.ndarray:
        """Band ``b`` as a (height, width) array."""
        return self.band(b).reshape(self.height, self.width)

    def with_data(self, data: np.ndarray) -> "MultiBandImage":
        """New image with the same geometry and replaced samples."""
        return MultiBandImage(self.height, self.width, self.bands, data)

    def same_geometry(self, other: "MultiBandImage") -> bool:
        return self.shape == other.shape


def band_mean(img: MultiBandImage, b: int) -> float:
    """Average sample value of band ``b``."""
    return float(img.band(b).mean())


def band_means(img: MultiBandImage) -> np.ndarray:
    """Per-band average brightness as a length-B vector."""
    return img.band_matrix().mean(axis=1)


def norms(img: MultiBandImage) -> dict[str, float]:
    """The three sample norms: l1, l2, and the per-pixel group norm l12.

    ``l12`` sums, over pixels, the euclidean norm of the cross-band
    sample group at that pixel.
    """
    m = img.band_matrix()
    return {
        "l1": float(np.abs(m).sum()),
        "l2": float(np.linalg.norm(img.data)),
        "l12": float(np.sqrt((m * m).sum(axis=0)).sum()),
    }


def _header_bytes(img: MultiBandImage) -> bytes:
    header = {
        "height": img.height,
        "width": img.width,
        "bands": img.bands,
        "dtype": "f64",
        "layout": "band-major",
    }
    return json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n"


def write_raster(img: MultiBandImage, path) -> None:
    """Write a .bmr file: magic, JSON header line, then raw little-endian f64."""
    payload = img.data.astype("<f8", copy=False).tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_header_bytes(img))
        fh.write(payload)


def read_raster(path) -> MultiBandImage:
    """Read a .bmr file written by :func:`write_raster`.

    Raises
    ------
    RasterFormatError
        On bad magic, malformed header, payload length mismatch, or
        non-finite samples.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise RasterFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        header_raw = bytearray()
        while True:
            ch = fh.read(1)
            if not ch:
                raise RasterFormatError("unterminated header line")
            if ch == b"\n":
                break
            header_raw += ch
            if len(header_raw) > 4096:
                raise RasterFormatError("header line exceeds 4096 bytes")
        try:
            header = json.loads(header_raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise RasterFormatError(f"malformed header: {exc}") from exc
        for key in ("height", "width", "bands"):
            if not isinstance(header.get(key), int) or header[key] <= 0:
                raise RasterFormatError(f"header field {key!r} must be a positive integer")
        if header.get("dtype") != "f64":
            raise RasterFormatError(f"unsupported dtype {header.get('dtype')!r}")
        if header.get("layout") != "band-major":
            raise RasterFormatError(f"unsupported layout {header.get('layout')!r}")
        h, w, b = header["height"], header["width"], header["bands"]
        expected = 8 * h * w * b
        payload = fh.read()
        if len(payload) != expected:
            raise RasterFormatError(
                f"payload length mismatch: expected {expected} bytes, got {len(payload)}"
            )
        data = np.frombuffer(payload, dtype="<f8")
        if not np.all(np.isfinite(data)):
            raise RasterFormatError("payload contains non-finite samples")
        return MultiBandImage(h, w, b, data)


def upsample_nearest(img: MultiBandImage, k: int) -> MultiBandImage:
    """Nearest-neighbor k-times upsampling along both spatial axes."""
    if k < 1:
        raise RasterError(f"upsampling factor must be >= 1, got {k}")
    cube = img.data.reshape(img.bands, img.height, img.width)
    big = cube.repeat(k, axis=1).repeat(k, axis=2)
    return MultiBandImage(img.height * k, img.width * k, img.bands, big.ravel())


def to_png(img: MultiBandImage, path, scaling: str = "fixed") -> None:
    """8-bit PNG preview using the first min(3, B) bands.

    scaling="fixed" clips samples to [0, 1]; scaling="minmax" rescales each
    band by its own range (a constant band maps to 0).
    """
    from PIL import Image

    if scaling not in ("fixed", "minmax"):
        raise ValueError(f"unknown scaling {scaling!r}")
    nb = min(3, img.bands)
    planes = []
    for b in range(nb):
        plane = img.band_image(b)
        if scaling == "fixed":
            plane = np.clip(plane, 0.0, 1.0)
        else:
            lo, hi = plane.min(), plane.max()
            plane = (plane - lo) / (hi - lo) if hi > lo else np.zeros_like(plane)
        planes.append(np.round(plane * 255.0).astype(np.uint8))
    if nb == 1:
        Image.fromarray(planes[0], mode="L").save(path)
    else:
        while len(planes) < 3:
            planes.append(planes[-1])
        Image.fromarray(np.stack(planes, axis=-1), mode="RGB").save(path)
