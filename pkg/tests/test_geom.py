import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as ScipyRot

from skyhex.geom import EulerRpy, Pose6, UnitQuaternion, wrap_angle


def _scipy_mat(q: UnitQuaternion) -> np.ndarray:
    # scipy is scalar-last
    return ScipyRot.from_quat([q.x, q.y, q.z, q.w]).as_matrix()


def _random_quat(rng) -> UnitQuaternion:
    w, x, y, z = rng.normal(size=4)
    return UnitQuaternion(w, x, y, z)


def test_multiply_z90_twice():
    qz90 = UnitQuaternion.from_axis_angle([0, 0, 1], math.pi / 2)
    q = qz90.multiply(qz90)
    assert abs(q.w) < 1e-15
    assert abs(q.z - 1.0) < 1e-15
    assert q.x == 0.0 and q.y == 0.0


def test_multiply_matches_matrix_product_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a = _random_quat(rng)
        b = _random_quat(rng)
        got = _scipy_mat(a.multiply(b))
        want = _scipy_mat(a) @ _scipy_mat(b)
        assert np.max(np.abs(got - want)) < 1e-9


def test_canonical_form_and_unit_norm():
    rng = np.random.default_rng(2)
    for _ in range(500):
        q = _random_quat(rng)
        assert q.w >= 0.0
        n = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
        assert abs(n - 1.0) < 1e-12
        # q and -q canonicalize to the same instance
        q2 = UnitQuaternion(-q.w, -q.x, -q.y, -q.z)
        assert abs(q2.w - q.w) < 1e-15 and abs(q2.z - q.z) < 1e-15


def test_zero_quaternion_rejected():
    with pytest.raises(ValueError):
        UnitQuaternion(0.0, 0.0, 0.0, 0.0)


def test_rotate_matches_matrix():
    rng = np.random.default_rng(3)
    for _ in range(300):
        q = _random_quat(rng)
        v = rng.normal(size=3)
        assert np.allclose(q.rotate(v), _scipy_mat(q) @ v, atol=1e-12)


def test_to_matrix_from_matrix_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(300):
        q = _random_quat(rng)
        m = q.to_matrix()
        assert np.allclose(m, _scipy_mat(q), atol=1e-12)
        q2 = UnitQuaternion.from_matrix(m)
        assert q.angle_to(q2) < 1e-9


def test_rotvec_round_trip_and_scipy_oracle():
    rng = np.random.default_rng(5)
    for _ in range(300):
        rv = rng.normal(size=3) * rng.uniform(0, 3)
        q = UnitQuaternion.from_rotvec(rv)
        sq = ScipyRot.from_rotvec(rv).as_quat()
        assert np.allclose(_scipy_mat(q), ScipyRot.from_quat(sq).as_matrix(), atol=1e-12)
        back = q.to_rotvec()
        # canonical log keeps |angle| <= pi; compare rotations not vectors
        assert UnitQuaternion.from_rotvec(back).angle_to(q) < 1e-9


def test_euler_round_trip_away_from_gimbal():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        e = EulerRpy(
            rng.uniform(-math.pi, math.pi),
            rng.uniform(-1.45, 1.45),
            rng.uniform(-math.pi, math.pi),
        )
        q = e.to_quat()
        e2 = q.to_euler()
        assert abs(wrap_angle(e2.roll - e.roll)) < 1e-12
        assert abs(e2.pitch - e.pitch) < 1e-12
        assert abs(wrap_angle(e2.yaw - e.yaw)) < 1e-12


def test_euler_matches_scipy_zyx():
    rng = np.random.default_rng(7)
    for _ in range(500):
        q = _random_quat(rng)
        e = q.to_euler()
        yaw, pitch, roll = ScipyRot.from_quat([q.x, q.y, q.z, q.w]).as_euler("ZYX")
        assert abs(wrap_angle(e.roll - roll)) < 1e-9
        assert abs(e.pitch - pitch) < 1e-9
        assert abs(wrap_angle(e.yaw - yaw)) < 1e-9


def test_gimbal_tie_break_roll_zero():
    for sign in (1.0, -1.0):
        for yaw in (0.3, -1.2, 2.9):
            for roll in (0.5, -0.7):
                q = EulerRpy(roll, sign * math.pi / 2, yaw).to_quat()
                e = q.to_euler()
                assert e.roll == 0.0
                assert abs(e.pitch - sign * math.pi / 2) < 1e-9
                # only roll -/+ yaw observable: the recovered yaw must
                # reproduce the rotation once roll is zeroed
                q2 = EulerRpy(e.roll, e.pitch, e.yaw).to_quat()
                assert q.angle_to(q2) < 1e-9


def test_scaled_interpolates_axis_angle():
    q = UnitQuaternion.from_axis_angle([0, 0, 1], math.radians(40))
    half = q.scaled(0.5)
    assert abs(half.to_euler().yaw - math.radians(20)) < 1e-12
    # below the lerp threshold the result still lands within float noise
    small = UnitQuaternion.from_axis_angle([1, 0, 0], math.radians(2))
    s = small.scaled(0.5)
    assert abs(s.to_euler().roll - math.radians(1)) < 1e-6
    # zero keeps identity, one keeps the rotation
    assert q.scaled(0.0).angle_to(UnitQuaternion.identity()) < 1e-12
    assert q.scaled(1.0).angle_to(q) < 1e-12


def test_pose_compose_pointwise_oracle():
    rng = np.random.default_rng(8)
    for _ in range(300):
        a = Pose6(rng.normal(size=3), _random_quat(rng))
        b = Pose6(rng.normal(size=3), _random_quat(rng))
        p = rng.normal(size=3)
        assert np.allclose(a.compose(b).transform(p), a.transform(b.transform(p)), atol=1e-10)


def test_pose_inverse_and_relative():
    rng = np.random.default_rng(9)
    for _ in range(300):
        a = Pose6(rng.normal(size=3), _random_quat(rng))
        ident = a.compose(a.inverse())
        assert np.linalg.norm(ident.position) < 1e-10
        assert ident.orientation.angle_to(UnitQuaternion.identity()) < 1e-10
        b = Pose6(rng.normal(size=3), _random_quat(rng))
        rel = b.relative_to(a)
        assert np.allclose(a.compose(rel).position, b.position, atol=1e-10)


def test_se3_exp_log_round_trip():
    rng = np.random.default_rng(10)
    for _ in range(300):
        xi = rng.normal(size=6)
        p = Pose6.exp(xi)
        assert np.allclose(p.log(), xi, atol=1e-9) or np.allclose(
            Pose6.exp(p.log()).position, p.position, atol=1e-9
        )
        # tiny twists hit the series branch
        xi2 = rng.normal(size=6) * 1e-10
        assert np.allclose(Pose6.exp(xi2).log(), xi2, atol=1e-15)


def test_wrap_angle_range():
    for a in np.linspace(-20, 20, 2001):
        w = wrap_angle(float(a))
        assert -math.pi < w <= math.pi + 1e-15
        assert abs(math.sin(w) - math.sin(a)) < 1e-9
        assert abs(math.cos(w) - math.cos(a)) < 1e-9
