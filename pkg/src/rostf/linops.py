"""Matrix-free linear operators: spatial differences, blur, downsampling.

Every operator exposes ``forward``, an exact ``adjoint``, and a declared
``norm_sq_bound`` (an upper bound on the squared operator norm) used by the
solver's automatic stepsize rule. Operators act band-wise on flat band-major
vectors.
"""

from __future__ import annotations

import numpy as np


class GeometryError(ValueError):
    """Operand shape does not match the operator geometry."""


class LinearOperator:
    """Base class: a linear map R^in_dim -> R^out_dim with exact adjoint."""

    in_dim: int
    out_dim: int
    norm_sq_bound: float

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_in(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.size != self.in_dim:
            raise GeometryError(
                f"{type(self).__name__}: input size {x.size} != {self.in_dim}"
            )
        return x.ravel()

    def _check_out(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.size != self.out_dim:
            raise GeometryError(
                f"{type(self).__name__}: adjoint input size {y.size} != {self.out_dim}"
            )
        return y.ravel()


class IdentityOperator(LinearOperator):
    def __init__(self, dim: int):
        self.in_dim = dim
        self.out_dim = dim
        self.norm_sq_bound = 1.0

    def forward(self, x):
        return self._check_in(x).copy()

    def adjoint(self, y):
        return self._check_out(y).copy()


class NegatedOperator(LinearOperator):
    """-A; same adjoint structure and norm bound as A."""

    def __init__(self, op: LinearOperator):
        self.op = op
        self.in_dim = op.in_dim
        self.out_dim = op.out_dim
        self.norm_sq_bound = op.norm_sq_bound

    def forward(self, x):
        return -self.op.forward(x)

    def adjoint(self, y):
        return -self.op.adjoint(y)


class ComposedOperator(LinearOperator):
    """outer @ inner, with an optional explicit norm bound override."""

    def __init__(self, outer: LinearOperator, inner: LinearOperator,
                 norm_sq_bound: float | None = None):
        if inner.out_dim != outer.in_dim:
            raise GeometryError(
                f"cannot compose: inner out_dim {inner.out_dim} != outer in_dim {outer.in_dim}"
            )
        self.outer = outer
        self.inner = inner
        self.in_dim = inner.in_dim
        self.out_dim = outer.out_dim
        if norm_sq_bound is None:
            norm_sq_bound = outer.norm_sq_bound * inner.norm_sq_bound
        self.norm_sq_bound = norm_sq_bound

    def forward(self, x):
        return self.outer.forward(self.inner.forward(x))

    def adjoint(self, y):
        return self.inner.adjoint(self.outer.adjoint(y))


class DiffOperator(LinearOperator):
    """Forward differences between adjacent pixels, per band.

    Vertical differences are x[i+1,j] - x[i,j] with a zero last row;
    horizontal analogously with a zero last column, so constants lie in the
    null space and the squared norm stays below the declared bound.

    direction="stacked" emits, for each band, the vertical block followed by
    the horizontal block (2N values per band, bands contiguous).
    """

    def __init__(self, height: int, width: int, bands: int, direction: str = "stacked"):
        if direction not in ("vertical", "horizontal", "stacked"):
            raise ValueError(f"unknown direction {direction!r}")
        self.height = height
        self.width = width
        self.bands = bands
        self.direction = direction
        n = height * width * bands
        self.in_dim = n
        self.out_dim = 2 * n if direction == "stacked" else n
        self.norm_sq_bound = 8.0 if direction == "stacked" else 4.0

    def _cube(self, x):
        return x.reshape(self.bands, self.height, self.width)

    def forward(self, x):
        c = self._cube(self._check_in(x))
        parts = []
        if self.direction in ("vertical", "stacked"):
            dv = np.zeros_like(c)
            dv[:, :-1, :] = c[:, 1:, :] - c[:, :-1, :]
            parts.append(dv)
        if self.direction in ("horizontal", "stacked"):
            dh = np.zeros_like(c)
            dh[:, :, :-1] = c[:, :, 1:] - c[:, :, :-1]
            parts.append(dh)
        if len(parts) == 1:
            return parts[0].ravel()
        n = self.height * self.width
        return np.stack([p.reshape(self.bands, n) for p in parts], axis=1).ravel()

    def adjoint(self, y):
        y = self._check_out(y)
        n = self.height * self.width
        if self.direction == "stacked":
            pair = y.reshape(self.bands, 2, n)
            yv = pair[:, 0, :].reshape(self.bands, self.height, self.width)
            yh = pair[:, 1, :].reshape(self.bands, self.height, self.width)
        elif self.direction == "vertical":
            yv, yh = self._cube(y), None
        else:
            yv, yh = None, self._cube(y)
        out = np.zeros((self.bands, self.height, self.width))
        if yv is not None:
            out[:, 1:, :] += yv[:, :-1, :]
            out[:, :-1, :] -= yv[:, :-1, :]
        if yh is not None:
            out[:, :, 1:] += yh[:, :, :-1]
            out[:, :, :-1] -= yh[:, :, :-1]
        return out.ravel()


def _sliding_mean_last(a: np.ndarray, k: int) -> np.ndarray:
    """Mean of the length-k window starting at each index along the last
    axis, replicating the final element past the end."""
    if k == 1:
        return a.copy()
    length = a.shape[-1]
    pad = np.repeat(a[..., -1:], k - 1, axis=-1)
    ap = np.concatenate([a, pad], axis=-1)
    cs = np.concatenate([np.zeros_like(ap[..., :1]), np.cumsum(ap, axis=-1)], axis=-1)
    return (cs[..., k : length + k] - cs[..., :length]) / k


def _sliding_mean_last_adjoint(y: np.ndarray, k: int, length: int) -> np.ndarray:
    """Exact transpose of :func:`_sliding_mean_last` along the last axis."""
    if k == 1:
        return y.copy()
    cs = np.concatenate([np.zeros_like(y[..., :1]), np.cumsum(y, axis=-1)], axis=-1)
    idx = np.arange(length + k - 1)
    hi = np.minimum(idx, length - 1) + 1
    lo = np.maximum(idx - k + 1, 0)
    ext = (cs[..., hi] - cs[..., lo]) / k
    out = ext[..., :length].copy()
    out[..., -1] += ext[..., length:].sum(axis=-1)
    return out


class BlurOperator(LinearOperator):
    """Mean over the k-by-k window whose top-left corner is each pixel.

    Windows extending past the bottom/right edges replicate the border, so
    constants are preserved. Separable: one sliding pass per axis.
    """

    def __init__(self, height: int, width: int, bands: int, k: int):
        if k < 1:
            raise ValueError(f"window size must be >= 1, got {k}")
        if k > min(height, width):
            raise GeometryError(
                f"window size {k} exceeds image extent {height}x{width}"
            )
        self.height = height
        self.width = width
        self.bands = bands
        self.k = k
        self.in_dim = self.out_dim = height * width * bands
        # Replicate padding pushes the norm slightly above 1; only the
        # blur+downsample composition (bound pinned there) feeds stepsizes.
        self.norm_sq_bound = ((k + 1) / 2.0) ** 2

    def forward(self, x):
        c = self._check_in(x).reshape(self.bands, self.height, self.width)
        rows = _sliding_mean_last(c, self.k)
        cols = _sliding_mean_last(rows.swapaxes(-1, -2), self.k).swapaxes(-1, -2)
        return cols.ravel()

    def adjoint(self, y):
        c = self._check_out(y).reshape(self.bands, self.height, self.width)
        cols = _sliding_mean_last_adjoint(c.swapaxes(-1, -2), self.k, self.height)
        rows = _sliding_mean_last_adjoint(cols.swapaxes(-1, -2), self.k, self.width)
        return rows.ravel()


class DownsampleOperator(LinearOperator):
    """Keeps the top-left pixel of each k-by-k window, per band.

    The adjoint scatters low-resolution values back to the sampled
    positions and zero-fills everywhere else.
    """

    def __init__(self, height: int, width: int, bands: int, k: int):
        if k < 1:
            raise ValueError(f"factor must be >= 1, got {k}")
        if height % k or width % k:
            raise GeometryError(
                f"factor {k} must divide image extent {height}x{width}; crop first"
            )
        self.height = height
        self.width = width
        self.bands = bands
        self.k = k
        self.lr_height = height // k
        self.lr_width = width // k
        self.in_dim = height * width * bands
        self.out_dim = self.lr_height * self.lr_width * bands
        self.norm_sq_bound = 1.0

    def forward(self, x):
        c = self._check_in(x).reshape(self.bands, self.height, self.width)
        return c[:, :: self.k, :: self.k].ravel()

    def adjoint(self, y):
        lr = self._check_out(y).reshape(self.bands, self.lr_height, self.lr_width)
        out = np.zeros((self.bands, self.height, self.width))
        out[:, :: self.k, :: self.k] = lr
        return out.ravel()


class BlockMeanOperator(LinearOperator):
    """Mean of each k-by-k block, per band.

    When k divides both extents, sampling the top-left corner of the blurred
    image IS the block mean (every window the sampler keeps lies fully
    inside the image), so this single fused pass equals blur-then-downsample
    exactly, adjoint included: the transpose spreads each LR value uniformly
    over its block, scaled by 1/k^2.
    """

    def __init__(self, height: int, width: int, bands: int, k: int,
                 norm_sq_bound: float = 1.0):
        if k < 1:
            raise ValueError(f"factor must be >= 1, got {k}")
        if height % k or width % k:
            raise GeometryError(
                f"factor {k} must divide image extent {height}x{width}; crop first"
            )
        self.height = height
        self.width = width
        self.bands = bands
        self.k = k
        self.lr_height = height // k
        self.lr_width = width // k
        self.in_dim = height * width * bands
        self.out_dim = self.lr_height * self.lr_width * bands
        self.norm_sq_bound = norm_sq_bound

    def forward(self, x):
        c = self._check_in(x).reshape(
            self.bands, self.lr_height, self.k, self.lr_width, self.k)
        return c.mean(axis=(2, 4)).ravel()

    def adjoint(self, y):
        lr = self._check_out(y).reshape(self.bands, self.lr_height, self.lr_width)
        scaled = lr / (self.k * self.k)
        out = np.broadcast_to(
            scaled[:, :, None, :, None],
            (self.bands, self.lr_height, self.k, self.lr_width, self.k),
        )
        return out.reshape(self.bands, self.height, self.width).ravel()


def downsample_blur(height: int, width: int, bands: int, k: int) -> BlockMeanOperator:
    """The low-resolution formation operator: blur then downsample.

    The squared-norm bound is pinned to 2 so automatic stepsizes come out at
    the published values (1/19, 1/18); the true norm is 1, and a looser
    bound only shrinks steps, which preserves convergence.
    """
    return BlockMeanOperator(height, width, bands, k, norm_sq_bound=2.0)


def op_norm_sq_bound(op: LinearOperator) -> float:
    """Declared upper bound on the squared operator norm."""
    return op.norm_sq_bound


def power_iteration_norm(op: LinearOperator, iterations: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the operator norm (a lower bound).

    Deterministic for a fixed seed; ``iterations`` applications of A^T A.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.in_dim)
    x /= np.linalg.norm(x)
    for _ in range(iterations):
        x = op.adjoint(op.forward(x))
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return 0.0
        x /= nx
    return float(np.linalg.norm(op.forward(x)))
