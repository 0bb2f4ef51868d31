import numpy as np
import pytest

from rostf.linops import (
    BlockMeanOperator,
    BlurOperator,
    ComposedOperator,
    DiffOperator,
    DownsampleOperator,
    GeometryError,
    IdentityOperator,
    NegatedOperator,
    downsample_blur,
    op_norm_sq_bound,
    power_iteration_norm,
)

from conftest import operator_matrix


def adjoint_gap(op, rng, trials=20):
    """Worst relative adjoint-identity error over random pairs."""
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(op.in_dim)
        y = rng.standard_normal(op.out_dim)
        lhs = np.dot(op.forward(x), y)
        rhs = np.dot(x, op.adjoint(y))
        scale = max(abs(lhs), abs(rhs), 1e-30)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


class TestDiff:
    def test_vertical_hand_case(self):
        # row-major 2x2 image (a, b; c, d)
        a, b, c, d = 1.0, 2.0, 5.0, 9.0
        op = DiffOperator(2, 2, 1, "vertical")
        assert np.array_equal(op.forward(np.array([a, b, c, d])),
                              [c - a, d - b, 0.0, 0.0])

    def test_stacked_layout_per_band(self):
        a, b, c, d = 1.0, 2.0, 5.0, 9.0
        op = DiffOperator(2, 2, 1, "stacked")
        out = op.forward(np.array([a, b, c, d]))
        assert np.array_equal(out[:4], [c - a, d - b, 0.0, 0.0])   # vertical
        assert np.array_equal(out[4:], [b - a, d - c, 0.0, 0.0])   # horizontal

    def test_constants_in_null_space(self):
        op = DiffOperator(5, 4, 3, "stacked")
        assert np.all(op.forward(np.full(op.in_dim, 0.7)) == 0.0)

    @pytest.mark.parametrize("direction", ["vertical", "horizontal", "stacked"])
    def test_adjoint_is_exact_transpose(self, direction):
        op = DiffOperator(3, 4, 2, direction)
        m = operator_matrix(op)
        adj = np.stack([op.adjoint(e) for e in np.eye(op.out_dim)], axis=1)
        assert np.array_equal(adj, m.T)

    def test_adjoint_identity_random(self, rng):
        op = DiffOperator(8, 7, 3, "stacked")
        assert adjoint_gap(op, rng) < 1e-12

    def test_geometry_mismatch(self):
        op = DiffOperator(3, 3, 1)
        with pytest.raises(GeometryError):
            op.forward(np.zeros(5))
        with pytest.raises(GeometryError):
            op.adjoint(np.zeros(5))


class TestBlur:
    def test_k1_is_identity(self, rng):
        op = BlurOperator(4, 5, 2, 1)
        x = rng.standard_normal(op.in_dim)
        assert np.allclose(op.forward(x), x, atol=0)

    def test_constant_preserved(self):
        op = BlurOperator(6, 6, 2, 3)
        out = op.forward(np.full(op.in_dim, 0.4))
        assert np.allclose(out, 0.4, atol=1e-14)

    def test_hand_two_by_two(self):
        # window mean with replicate padding at bottom/right
        a, b, c, d = 1.0, 2.0, 3.0, 4.0
        op = BlurOperator(2, 2, 1, 2)
        out = op.forward(np.array([a, b, c, d])).reshape(2, 2)
        expect = np.array([
            [(a + b + c + d) / 4, (b + b + d + d) / 4],
            [(c + d + c + d) / 4, d],
        ])
        assert np.allclose(out, expect, atol=1e-14)

    def test_adjoint_is_exact_transpose(self):
        op = BlurOperator(4, 5, 1, 3)
        m = operator_matrix(op)
        adj = np.stack([op.adjoint(e) for e in np.eye(op.out_dim)], axis=1)
        assert np.allclose(adj, m.T, atol=1e-14)

    def test_adjoint_identity_random(self, rng):
        op = BlurOperator(9, 8, 2, 4)
        assert adjoint_gap(op, rng) < 1e-12

    def test_window_too_large(self):
        with pytest.raises(GeometryError):
            BlurOperator(3, 3, 1, 4)


class TestDownsample:
    def test_k1_is_identity(self, rng):
        op = DownsampleOperator(4, 4, 2, 1)
        x = rng.standard_normal(op.in_dim)
        assert np.array_equal(op.forward(x), x)

    def test_top_left_sampling(self):
        vals = np.arange(16.0)  # 4x4, row-major
        op = DownsampleOperator(4, 4, 1, 2)
        assert np.array_equal(op.forward(vals), [0.0, 2.0, 8.0, 10.0])

    def test_sts_is_diagonal_mask(self):
        op = DownsampleOperator(4, 4, 1, 2)
        m = operator_matrix(op)
        sts = m.T @ m
        diag = np.zeros(16)
        diag[[0, 2, 8, 10]] = 1.0
        assert np.array_equal(sts, np.diag(diag))

    def test_adjoint_identity_random(self, rng):
        op = DownsampleOperator(8, 8, 3, 4)
        assert adjoint_gap(op, rng) < 1e-12

    def test_rejects_non_divisible(self):
        with pytest.raises(GeometryError, match="crop"):
            DownsampleOperator(5, 4, 1, 2)


class TestBlockMean:
    def test_equals_blur_then_downsample(self, rng):
        h, w, b, k = 8, 12, 3, 4
        fused = downsample_blur(h, w, b, k)
        chained = ComposedOperator(DownsampleOperator(h, w, b, k),
                                   BlurOperator(h, w, b, k))
        x = rng.standard_normal(fused.in_dim)
        y = rng.standard_normal(fused.out_dim)
        assert np.allclose(fused.forward(x), chained.forward(x), atol=1e-13)
        assert np.allclose(fused.adjoint(y), chained.adjoint(y), atol=1e-13)

    def test_checkerboard_block_means(self):
        board = np.indices((4, 4)).sum(axis=0) % 2
        op = downsample_blur(4, 4, 1, 2)
        assert np.allclose(op.forward(board.astype(float).ravel()), 0.5, atol=0)

    def test_constant_preserved(self):
        op = downsample_blur(8, 8, 2, 4)
        assert np.allclose(op.forward(np.full(op.in_dim, 0.9)), 0.9, atol=1e-15)

    def test_adjoint_identity_random(self, rng):
        assert adjoint_gap(downsample_blur(8, 8, 2, 2), rng) < 1e-12

    def test_band_permutation_commutes(self, rng):
        h, w, b, k = 6, 6, 3, 3
        op = downsample_blur(h, w, b, k)
        x = rng.standard_normal(op.in_dim)
        perm = [2, 0, 1]
        n = h * w
        nl = op.out_dim // b
        x_perm = x.reshape(b, n)[perm].ravel()
        out_perm = op.forward(x).reshape(b, nl)[perm].ravel()
        assert np.allclose(op.forward(x_perm), out_perm, atol=1e-14)


class TestNormBounds:
    def test_declared_bounds(self):
        assert op_norm_sq_bound(DiffOperator(8, 8, 2, "stacked")) == 8.0
        assert op_norm_sq_bound(IdentityOperator(10)) == 1.0
        assert op_norm_sq_bound(downsample_blur(8, 8, 2, 2)) == 2.0

    def test_negation_keeps_bound(self):
        op = NegatedOperator(DiffOperator(4, 4, 1))
        assert op.norm_sq_bound == 8.0

    def test_power_iteration_identity(self):
        est = power_iteration_norm(IdentityOperator(64), iterations=10, seed=0)
        assert est == pytest.approx(1.0, abs=1e-9)

    def test_power_iteration_diff_below_bound(self):
        op = DiffOperator(32, 32, 1, "stacked")
        est = power_iteration_norm(op, iterations=80, seed=1)
        assert est <= np.sqrt(8.0)
        assert est > 2.5  # the bound is nearly tight on a 32x32 grid

    def test_power_iteration_block_mean_below_bound(self):
        op = downsample_blur(8, 8, 1, 2)
        est = power_iteration_norm(op, iterations=80, seed=2)
        assert est <= np.sqrt(2.0)

    def test_power_iteration_deterministic(self):
        op = DiffOperator(10, 10, 1)
        a = power_iteration_norm(op, iterations=25, seed=42)
        b = power_iteration_norm(op, iterations=25, seed=42)
        assert a == b

    def test_negated_forward(self, rng):
        base = DiffOperator(4, 4, 1)
        op = NegatedOperator(base)
        x = rng.standard_normal(op.in_dim)
        assert np.array_equal(op.forward(x), -base.forward(x))
