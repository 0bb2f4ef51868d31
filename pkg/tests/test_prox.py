import numpy as np
import pytest

from rostf.prox import (
    Ball,
    Hyperslab,
    group_l2_norms,
    l12_norm,
    project_hyperslab,
    project_l1_ball,
    project_l2_ball,
    prox_conjugate,
    prox_l12,
)


class TestProxL12:
    def test_zero_fixed_point(self):
        x = np.zeros(12)
        assert np.array_equal(prox_l12(x, 1.0, 3), x)

    def test_tiny_gamma_is_identity(self, rng):
        x = rng.standard_normal(20)
        out = prox_l12(x, 1e-300, 4)
        assert np.allclose(out, x, atol=1e-12)

    def test_hand_case_three_four(self):
        out = prox_l12(np.array([3.0, 4.0]), 1.0, 2)
        assert np.allclose(out, [2.4, 3.2], atol=1e-14)

    def test_direction_preserved_or_zero(self, rng):
        x = rng.standard_normal(30)
        out = prox_l12(x, 0.8, 3)
        gx = x.reshape(3, -1)
        go = out.reshape(3, -1)
        for n in range(gx.shape[1]):
            if np.allclose(go[:, n], 0.0):
                continue
            ratios = go[:, n] / gx[:, n]
            assert np.allclose(ratios, ratios[0], atol=1e-12)
            assert ratios[0] > 0

    def test_group_norm_shrinks_by_gamma(self, rng):
        x = rng.standard_normal(24) * 5
        gamma = 0.7
        before = group_l2_norms(x, 2)
        after = group_l2_norms(prox_l12(x, gamma, 2), 2)
        expect = np.maximum(before - gamma, 0.0)
        assert np.allclose(after, expect, atol=1e-12)

    def test_rejects_bad_gamma(self):
        with pytest.raises(ValueError):
            prox_l12(np.ones(4), 0.0, 2)

    def test_l12_norm_value(self):
        x = np.array([3.0, 0.0, 4.0, 0.0])  # two bands, two pixels
        assert l12_norm(x, 2) == pytest.approx(5.0)


class TestHyperslab:
    def test_interior_unchanged(self):
        x = np.array([0.5, 0.5])
        out = project_hyperslab(x, 1.0, 0.5)
        assert np.array_equal(out, x)

    def test_hand_case_above(self):
        out = project_hyperslab(np.array([2.0, 2.0]), 2.0, 1.0)
        assert np.allclose(out, [1.5, 1.5], atol=1e-14)

    def test_below_side(self):
        out = project_hyperslab(np.array([0.0, 0.0]), 4.0, 1.0)
        assert np.allclose(out, [1.5, 1.5], atol=1e-14)

    def test_idempotent(self, rng):
        for _ in range(25):
            x = rng.standard_normal(7) * 3
            once = project_hyperslab(x, 0.3, 0.2)
            twice = project_hyperslab(once, 0.3, 0.2)
            assert np.allclose(twice, once, atol=1e-12)

    def test_spec_class_validates(self):
        with pytest.raises(ValueError):
            Hyperslab(center=0.0, radius=-1.0)


class TestL2Ball:
    def test_inside_unchanged(self, rng):
        c = rng.standard_normal(5)
        x = c + 0.01 * rng.standard_normal(5)
        assert np.array_equal(project_l2_ball(x, c, 1.0), x)

    def test_radial_scaling(self):
        out = project_l2_ball(np.array([3.0, 0.0]), np.zeros(2), 1.0)
        assert np.allclose(out, [1.0, 0.0], atol=1e-14)

    def test_zero_radius_returns_center(self, rng):
        c = rng.standard_normal(6)
        x = rng.standard_normal(6)
        assert np.allclose(project_l2_ball(x, c, 0.0), c, atol=0)

    def test_boundary_point_unchanged(self):
        x = np.array([1.0, 0.0])
        assert np.array_equal(project_l2_ball(x, np.zeros(2), 1.0), x)

    def test_center_size_mismatch(self):
        with pytest.raises(ValueError, match="center"):
            project_l2_ball(np.ones(3), np.zeros(2), 1.0)


class TestL1Ball:
    def test_feasible_unchanged(self):
        x = np.array([0.3, -0.2, 0.1])
        assert np.array_equal(project_l1_ball(x, 1.0), x)

    def test_hand_case_axis(self):
        out = project_l1_ball(np.array([2.0, 0.0]), 1.0)
        assert np.allclose(out, [1.0, 0.0], atol=1e-14)

    def test_hand_case_diagonal(self):
        out = project_l1_ball(np.array([1.0, 1.0]), 1.0)
        assert np.allclose(out, [0.5, 0.5], atol=1e-14)

    def test_zero_radius(self, rng):
        x = rng.standard_normal(9)
        assert np.array_equal(project_l1_ball(x, 0.0), np.zeros(9))

    def test_matches_dense_grid_search(self):
        # brute-force the 2-D projection over a fine grid of the ball
        x = np.array([0.9, -0.55])
        radius = 0.7
        proj = project_l1_ball(x, radius)
        us = np.linspace(-radius, radius, 701)
        best = None
        best_d = np.inf
        for u in us:
            rem = radius - abs(u)
            for v in (-rem, 0.0, rem, np.clip(x[1], -rem, rem)):
                d = (x[0] - u) ** 2 + (x[1] - v) ** 2
                if d < best_d:
                    best_d = d
                    best = (u, v)
        assert (x[0] - proj[0]) ** 2 + (x[1] - proj[1]) ** 2 <= best_d + 1e-6
        assert np.allclose(proj, best, atol=5e-3)

    def test_result_on_sphere_when_projected(self, rng):
        for _ in range(30):
            x = rng.standard_normal(40) * 2
            r = 3.0
            out = project_l1_ball(x, r)
            if np.abs(x).sum() > r:
                assert np.abs(out).sum() == pytest.approx(r, rel=1e-12)


class TestMoreau:
    def test_residual_identity_random(self, rng):
        def prox_f(v, t):
            return prox_l12(v, t, 2)

        for _ in range(20):
            x = rng.standard_normal(16)
            gamma = float(rng.uniform(0.05, 5.0))
            conj = prox_conjugate(prox_f, x, gamma)
            direct = gamma * prox_f(x / gamma, 1.0 / gamma)
            assert np.allclose(conj + direct, x, atol=1e-12)

    def test_indicator_specialization(self, rng):
        ball = Ball(p=2, radius=0.8, center=0.0)

        def prox_ind(v, _t):
            return ball.project(v)

        x = rng.standard_normal(10)
        gamma = 0.3
        out = prox_conjugate(prox_ind, x, gamma)
        assert np.allclose(out, x - gamma * ball.project(x / gamma), atol=1e-14)

    def test_zero_maps_to_zero(self):
        out = prox_conjugate(lambda v, t: prox_l12(v, t, 2), np.zeros(8), 1.7)
        assert np.array_equal(out, np.zeros(8))


class TestSharedProperties:
    def projections(self, rng):
        c = rng.standard_normal(12)
        return [
            (lambda x: project_hyperslab(x, 0.4, 0.9), "hyperslab"),
            (lambda x: project_l2_ball(x, c, 1.3), "l2ball"),
            (lambda x: project_l1_ball(x, 2.0), "l1ball"),
        ]

    def test_idempotence(self, rng):
        for proj, name in self.projections(rng):
            for _ in range(25):
                x = rng.standard_normal(12) * 4
                once = proj(x)
                assert np.allclose(proj(once), once, atol=1e-12), name

    def test_firm_nonexpansiveness_spot(self, rng):
        for proj, name in self.projections(rng):
            for _ in range(25):
                x = rng.standard_normal(12) * 3
                y = rng.standard_normal(12) * 3
                lhs = np.linalg.norm(proj(x) - proj(y))
                assert lhs <= np.linalg.norm(x - y) + 1e-12, name

    def test_distance_optimality_sampled(self, rng):
        # projection must be at least as close as any sampled feasible point
        for _ in range(200):
            x = rng.standard_normal(6) * 3
            r = 1.5
            p = project_l1_ball(x, r)
            z = rng.standard_normal(6)
            z = z / max(np.abs(z).sum() / r, 1.0)
            assert np.linalg.norm(x - p) <= np.linalg.norm(x - z) + 1e-10


class TestSpecTypes:
    def test_ball_validation(self):
        with pytest.raises(ValueError):
            Ball(p=3, radius=1.0)
        with pytest.raises(ValueError):
            Ball(p=1, radius=-0.1)
        with pytest.raises(ValueError):
            Ball(p=1, radius=1.0, center=np.ones(3))

    def test_ball_projects_by_norm(self, rng):
        x = rng.standard_normal(8) * 3
        assert np.allclose(Ball(p=1, radius=1.0).project(x),
                           project_l1_ball(x, 1.0), atol=0)
        assert np.allclose(Ball(p=2, radius=1.0).project(x),
                           project_l2_ball(x, 0.0, 1.0), atol=0)
