import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopmcl.geometry import (
    Pose2D,
    RelativePoseMeas,
    angle_diff,
    compose,
    compose_array,
    inverse,
    normalize_angle,
    normalize_angles,
    predict_relative_pose,
    predict_relative_pose_array,
    relative,
)

from .oracles import relative_range_bearing, wrap

finite_angle = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
coord = st.floats(min_value=-100, max_value=100, allow_nan=False)
poses = st.builds(Pose2D, coord, coord, st.floats(min_value=-10, max_value=10))


def close_pose(a, b, tol=1e-9):
    return abs(a.x - b.x) <= tol and abs(a.y - b.y) <= tol and abs(angle_diff(a.theta, b.theta)) <= tol


class TestNormalizeAngle:
    @pytest.mark.parametrize(
        "a, expected",
        [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi, math.pi), (2 * math.pi, 0.0), (-0.5, -0.5)],
    )
    def test_values(self, a, expected):
        assert normalize_angle(a) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(ValueError):
            normalize_angle(bad)

    @given(finite_angle)
    def test_idempotent_and_in_range(self, a):
        n = normalize_angle(a)
        assert -math.pi < n <= math.pi
        assert normalize_angle(n) == n

    @given(st.floats(min_value=-50, max_value=50, allow_nan=False))
    def test_matches_oracle(self, a):
        assert abs(normalize_angle(a) - wrap(a)) < 1e-9 or abs(abs(normalize_angle(a) - wrap(a)) - 2 * math.pi) < 1e-9

    @given(st.lists(finite_angle, min_size=1, max_size=20))
    def test_vectorized_agrees(self, xs):
        v = normalize_angles(np.array(xs))
        assert np.all(v > -math.pi) and np.all(v <= math.pi)
        for a, b in zip(xs, v):
            assert abs(angle_diff(normalize_angle(a), float(b))) < 1e-9


class TestPose2D:
    def test_theta_normalized(self):
        assert Pose2D(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Pose2D(math.nan, 0.0)

    def test_array_round_trip(self):
        p = Pose2D(1.5, -2.0, 0.3)
        assert Pose2D.from_array(p.as_array()) == p
        assert tuple(p) == (1.5, -2.0, 0.3)

    def test_immutable(self):
        p = Pose2D(0, 0, 0)
        with pytest.raises(AttributeError):
            p.x = 1.0


class TestCompose:
    @given(poses, poses, poses)
    @settings(max_examples=200)
    def test_associative(self, a, b, c):
        assert close_pose(compose(compose(a, b), c), compose(a, compose(b, c)), tol=1e-8)

    @given(poses)
    def test_identity(self, a):
        e = Pose2D(0, 0, 0)
        assert close_pose(compose(e, a), a) and close_pose(compose(a, e), a)

    @given(poses)
    def test_inverse(self, a):
        assert close_pose(compose(a, inverse(a)), Pose2D(0, 0, 0), tol=1e-8)

    @given(poses, poses)
    def test_relative_undoes_compose(self, a, b):
        assert close_pose(relative(a, compose(a, b)), b, tol=1e-8)

    def test_array_matches_scalar(self, rng):
        a = Pose2D(1.0, 2.0, 0.7)
        b = rng.normal(size=(20, 3))
        out = compose_array(a, b)
        for row, o in zip(b, out):
            assert close_pose(compose(a, Pose2D.from_array(row)), Pose2D.from_array(o), tol=1e-12)


class TestPredictRelativePose:
    @pytest.mark.parametrize(
        "obs, tgt, expected",
        [
            ((0, 0, 0), (1, 0, math.pi), (1.0, 0.0)),
            ((0, 0, math.pi / 2), (0, 2, 0), (2.0, 0.0)),
            ((0, 0, 0), (0, 1, 0), (1.0, math.pi / 2)),
        ],
    )
    def test_examples(self, obs, tgt, expected):
        r, b = predict_relative_pose(Pose2D(*obs), Pose2D(*tgt))
        assert r == pytest.approx(expected[0], abs=1e-12)
        assert b == pytest.approx(expected[1], abs=1e-12)

    def test_coincident(self):
        assert predict_relative_pose(Pose2D(1, 1, 0.3), Pose2D(1, 1, -2)) == (0.0, 0.0)

    @given(poses, poses)
    def test_matches_rotation_oracle(self, a, b):
        r, phi = predict_relative_pose(a, b)
        r_o, phi_o = relative_range_bearing(tuple(a), tuple(b))
        assert r == pytest.approx(r_o, rel=1e-9, abs=1e-9)
        if r > 1e-6:
            assert abs(angle_diff(phi, phi_o)) < 1e-7

    @given(poses, poses, poses)
    @settings(max_examples=200)
    def test_rigid_invariance(self, g, a, b):
        r1, p1 = predict_relative_pose(a, b)
        r2, p2 = predict_relative_pose(compose(g, a), compose(g, b))
        assert abs(r1 - r2) <= 1e-9 * max(1.0, r1)
        if r1 > 1e-6:
            assert abs(angle_diff(p1, p2)) < 1e-7

    @given(poses, poses)
    def test_range_symmetric(self, a, b):
        assert predict_relative_pose(a, b)[0] == pytest.approx(predict_relative_pose(b, a)[0], rel=1e-12, abs=1e-12)

    def test_array_matches_scalar(self, rng):
        a = rng.normal(size=(50, 3))
        b = rng.normal(size=(50, 3))
        r, phi = predict_relative_pose_array(a, b)
        for i in range(50):
            rs, ps = predict_relative_pose(Pose2D.from_array(a[i]), Pose2D.from_array(b[i]))
            assert r[i] == pytest.approx(rs)
            assert abs(angle_diff(phi[i], ps)) < 1e-12


class TestRelativePoseMeas:
    def test_bearing_normalized(self):
        m = RelativePoseMeas(1.0, 2 * math.pi + 0.1, 0.1, 0.1)
        assert m.bearing == pytest.approx(0.1)

    @pytest.mark.parametrize("kw", [{"sigma_range": 0.0}, {"sigma_bearing": -1.0}, {"range": -0.1}])
    def test_invalid(self, kw):
        args = {"range": 1.0, "bearing": 0.0, "sigma_range": 0.1, "sigma_bearing": 0.1, **kw}
        with pytest.raises(ValueError):
            RelativePoseMeas(**args)
