import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from handguard.geometry import (
    HandOffset,
    InvalidRotation,
    Point3,
    RigidTransform,
    compose,
    hand_center,
    hand_in_robot_base,
    invert,
    rotation_from_axis_angle,
    rotation_x,
    rotation_y,
    rotation_z,
)


def random_transform(rng):
    r = rotation_from_axis_angle(rng.normal(size=3), rng.uniform(-np.pi, np.pi))
    return RigidTransform(r, rng.uniform(-2, 2, size=3))


def homogeneous(t):
    """Independent 4x4 oracle built without the library's compose/invert."""
    m = np.eye(4)
    m[:3, :3] = t.rotation
    m[:3, 3] = t.translation
    return m


class TestRigidTransform:
    def test_identity_default(self):
        t = RigidTransform()
        assert np.allclose(t.rotation, np.eye(3))
        assert np.allclose(t.translation, 0)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(InvalidRotation):
            RigidTransform(np.eye(3) * 1.01, np.zeros(3))

    def test_rejects_reflection(self):
        m = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(InvalidRotation):
            RigidTransform(m, np.zeros(3))

    def test_explicit_orthonormalization(self):
        noisy = rotation_z(0.3) + 1e-6 * np.ones((3, 3))
        with pytest.raises(InvalidRotation):
            RigidTransform(noisy, np.zeros(3))
        t = RigidTransform.from_orthonormalized(noisy, np.zeros(3))
        assert np.abs(t.rotation.T @ t.rotation - np.eye(3)).max() < 1e-12

    def test_json_round_trip(self):
        t = RigidTransform(rotation_x(0.4), [1.0, -2.0, 0.5])
        back = RigidTransform.from_json(t.to_json())
        assert np.allclose(back.rotation, t.rotation)
        assert np.allclose(back.translation, t.translation)

    def test_quaternion_is_unit(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = random_transform(rng).to_quaternion()
            assert abs(np.linalg.norm(q) - 1.0) < 1e-12


class TestCompose:
    def test_identity_neutral(self):
        rng = np.random.default_rng(0)
        t = random_transform(rng)
        i = RigidTransform.identity()
        for result in (compose(i, t), compose(t, i)):
            assert np.allclose(result.rotation, t.rotation, atol=1e-12)
            assert np.allclose(result.translation, t.translation, atol=1e-12)

    def test_compose_with_inverse_is_identity(self):
        rng = np.random.default_rng(1)
        t = random_transform(rng)
        r = compose(t, invert(t))
        assert np.abs(r.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(r.translation).max() < 1e-9

    def test_matches_homogeneous_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a, b = random_transform(rng), random_transform(rng)
            expected = homogeneous(a) @ homogeneous(b)
            got = compose(a, b)
            assert np.abs(got.as_matrix() - expected).max() < 1e-12

    def test_associativity(self):
        rng = np.random.default_rng(4)
        a, b, c = (random_transform(rng) for _ in range(3))
        left = compose(compose(a, b), c)
        right = compose(a, compose(b, c))
        assert np.abs(left.as_matrix() - right.as_matrix()).max() < 1e-9


class TestInvert:
    def test_identity(self):
        i = invert(RigidTransform.identity())
        assert np.allclose(i.as_matrix(), np.eye(4))

    def test_pure_translation(self):
        t = RigidTransform(np.eye(3), [1.0, 2.0, 3.0])
        assert np.allclose(invert(t).translation, [-1.0, -2.0, -3.0])

    def test_matches_matrix_inverse_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            t = random_transform(rng)
            expected = np.linalg.inv(homogeneous(t))
            assert np.abs(invert(t).as_matrix() - expected).max() < 1e-12


class TestHandInRobotBase:
    def test_identity_base(self):
        rng = np.random.default_rng(6)
        marker = random_transform(rng)
        out = hand_in_robot_base(marker, RigidTransform.identity())
        assert np.abs(out.as_matrix() - marker.as_matrix()).max() < 1e-12

    def test_coincident_frames(self):
        rng = np.random.default_rng(7)
        t = random_transform(rng)
        out = hand_in_robot_base(t, t)
        assert np.abs(out.as_matrix() - np.eye(4)).max() < 1e-9

    def test_matches_oracle_product(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            a, b = random_transform(rng), random_transform(rng)
            expected = np.linalg.inv(homogeneous(b)) @ homogeneous(a)
            assert np.abs(hand_in_robot_base(a, b).as_matrix() - expected).max() < 1e-12

    def test_recovers_marker_in_camera(self):
        # composing the result back with the base frame recovers the input
        rng = np.random.default_rng(9)
        a, b = random_transform(rng), random_transform(rng)
        recovered = compose(b, hand_in_robot_base(a, b))
        assert np.abs(recovered.as_matrix() - a.as_matrix()).max() < 1e-9


class TestHandCenter:
    def test_zero_offset_is_translation(self):
        rng = np.random.default_rng(10)
        t = random_transform(rng)
        p = hand_center(t, HandOffset((0, 0, 0)))
        assert np.allclose(p.as_array(), t.translation)

    def test_identity_pose(self):
        p = hand_center(RigidTransform.identity(), HandOffset((0, 0, -0.10)))
        assert np.allclose(p.as_array(), [0, 0, -0.10])

    def test_matches_matrix_vector_oracle(self):
        rng = np.random.default_rng(11)
        t = random_transform(rng)
        o = HandOffset((0.02, -0.03, -0.08))
        expected = t.rotation @ np.array([0.02, -0.03, -0.08]) + t.translation
        assert np.abs(hand_center(t, o).as_array() - expected).max() < 1e-12


class TestValidation:
    def test_point3_rejects_nan(self):
        with pytest.raises(ValueError):
            Point3(float("nan"), 0, 0)

    def test_hand_offset_magnitude_bound(self):
        with pytest.raises(ValueError):
            HandOffset((0.5, 0.0, 0.0))


@settings(max_examples=50, deadline=None)
@given(
    angle=st.floats(-3.1, 3.1),
    tx=st.floats(-5, 5),
    ty=st.floats(-5, 5),
)
def test_invert_round_trip_property(angle, tx, ty):
    t = RigidTransform(rotation_y(angle), [tx, ty, 0.3])
    back = invert(invert(t))
    assert np.abs(back.as_matrix() - t.as_matrix()).max() < 1e-12
