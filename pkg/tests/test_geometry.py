import math

import numpy as np
import pytest

from reloc.errors import AntipodalPair, DegenerateBaseline
from reloc.geometry import (
    Pose,
    Quaternion,
    RelativePoseEstimate,
    average_rotation,
    camera_center,
    compose,
    format_pose_record,
    ground_truth_targets,
    invert,
    parse_pose_record,
    pose_loss,
    relative_pose,
    rotation_angle,
)

from conftest import random_pose, random_rotation
from oracles import compose_matrices


class TestQuaternion:
    def test_normalize_unit_norm(self, rng):
        for _ in range(100):
            q = Quaternion(*rng.standard_normal(4)).normalized()
            assert abs(q.norm() - 1.0) < 1e-9

    def test_double_cover_same_matrix(self, rng):
        q = random_rotation(rng)
        neg = Quaternion(-q.w, -q.x, -q.y, -q.z)
        np.testing.assert_allclose(q.to_matrix(), neg.to_matrix(), atol=1e-12)

    def test_canonical_sign(self):
        q = Quaternion(-0.5, 0.5, 0.5, 0.5)
        assert q.w >= 0.0
        # w == 0: the first nonzero of (x, y, z) becomes positive
        q = Quaternion(0.0, -1.0, 0.0, 0.0)
        assert q.x > 0.0

    def test_hamilton_product_matches_matrix_product(self, rng):
        for _ in range(50):
            a, b = random_rotation(rng), random_rotation(rng)
            np.testing.assert_allclose(
                (a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12
            )

    def test_matrix_round_trip(self, rng):
        for _ in range(100):
            q = random_rotation(rng)
            r = Quaternion.from_matrix(q.to_matrix())
            assert rotation_angle(q, r) < 1e-7

    def test_rotate_matches_matrix(self, rng):
        q = random_rotation(rng)
        v = rng.standard_normal(3)
        np.testing.assert_allclose(q.rotate(v), q.to_matrix() @ v, atol=1e-12)


class TestCompose:
    def test_identity_identity(self):
        out = compose(Pose.identity(), Pose.identity())
        assert rotation_angle(out.rotation, Quaternion.identity()) == 0.0
        assert np.linalg.norm(out.translation) == 0.0

    def test_inverse_cancels(self, rng):
        p = random_pose(rng)
        out = compose(p, invert(p))
        assert rotation_angle(out.rotation, Quaternion.identity()) < 1e-9
        assert np.linalg.norm(out.translation) < 1e-9

    def test_matches_homogeneous_matrix_oracle(self, rng):
        for _ in range(50):
            a, b = random_pose(rng), random_pose(rng)
            expected = compose_matrices(a.to_matrix(), b.to_matrix())
            np.testing.assert_allclose(compose(a, b).to_matrix(), expected, atol=1e-12)


class TestCameraCenter:
    def test_identity(self):
        np.testing.assert_array_equal(camera_center(Pose.identity()), np.zeros(3))

    def test_pure_translation(self):
        p = Pose(Quaternion.identity(), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(camera_center(p), [-1.0, -2.0, -3.0], atol=1e-12)

    def test_center_maps_to_origin(self, rng):
        for _ in range(100):
            p = random_pose(rng)
            np.testing.assert_allclose(p.apply(camera_center(p)), np.zeros(3), atol=1e-9)


class TestRelativePose:
    def test_same_pose_gives_identity(self, rng):
        p = random_pose(rng)
        rel = relative_pose(p, p)
        assert rotation_angle(rel.rotation, Quaternion.identity()) < 1e-9
        assert np.linalg.norm(rel.translation) < 1e-9

    def test_identity_reference_gives_query(self, rng):
        q = random_pose(rng)
        rel = relative_pose(Pose.identity(), q)
        assert rotation_angle(rel.rotation, q.rotation) < 1e-9
        np.testing.assert_allclose(rel.translation, q.translation, atol=1e-9)

    def test_round_trip_1000_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a, b = random_pose(rng), random_pose(rng)
            back = compose(relative_pose(a, b), a)
            assert rotation_angle(back.rotation, b.rotation) < 1e-9
            assert np.linalg.norm(back.translation - b.translation) < 1e-9


class TestGroundTruthTargets:
    def test_axis_aligned_case(self):
        rel = Pose(Quaternion.identity(), np.array([0.0, 0.0, 2.0]))
        direction, rotation, scale = ground_truth_targets(rel)
        np.testing.assert_allclose(direction, [0.0, 0.0, -1.0], atol=1e-12)
        assert rotation_angle(rotation, Quaternion.identity()) == 0.0
        assert scale == 2.0

    def test_direction_points_at_query_center_1000_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            pi, pq = random_pose(rng), random_pose(rng)
            rel = relative_pose(pi, pq)
            direction, _, scale = ground_truth_targets(rel)
            world_dir = pi.rotation.conjugate().rotate(direction)
            np.testing.assert_allclose(
                camera_center(pi) + scale * world_dir, camera_center(pq), atol=1e-9
            )

    def test_scale_is_translation_norm(self, rng):
        rel = random_pose(rng)
        _, _, scale = ground_truth_targets(rel)
        assert scale == pytest.approx(float(np.linalg.norm(rel.translation)), abs=1e-15)

    def test_degenerate_baseline_raises(self):
        with pytest.raises(DegenerateBaseline):
            ground_truth_targets(Pose(Quaternion.identity(), np.zeros(3)))


class TestPoseLoss:
    def test_exact_prediction_is_zero(self, rng):
        rel = random_pose(rng)
        direction, rotation, scale = ground_truth_targets(rel)
        pred = RelativePoseEstimate(direction=direction, rotation=rotation, scale=scale)
        terms = pose_loss(pred, (direction, rotation, scale))
        assert terms.translation_term == 0.0
        assert terms.rotation_term == 0.0
        assert terms.scale_term == 0.0
        assert terms.total == 0.0

    def test_l1_direction_arithmetic(self):
        pred = RelativePoseEstimate(
            direction=np.array([1.0, 0.0, 0.0]),
            rotation=Quaternion.identity(),
            scale=1.0,
        )
        terms = pose_loss(pred, (np.array([0.0, 1.0, 0.0]), Quaternion.identity(), 1.0))
        assert terms.translation_term == pytest.approx(2.0)

    def test_matches_scalar_loop_oracle(self, rng):
        for _ in range(50):
            pred = RelativePoseEstimate(
                direction=rng.standard_normal(3),
                rotation=random_rotation(rng),
                scale=float(rng.uniform(0.1, 3.0)),
            )
            t_dir = rng.standard_normal(3)
            t_dir /= np.linalg.norm(t_dir)
            t_rot = random_rotation(rng)
            t_scale = float(rng.uniform(0.1, 3.0))
            terms = pose_loss(pred, (t_dir, t_rot, t_scale), mu=1.0, beta=1.0)

            expect_t = sum(abs(pred.direction[i] - t_dir[i]) for i in range(3))
            qp = [pred.rotation.w, pred.rotation.x, pred.rotation.y, pred.rotation.z]
            qt = [t_rot.w, t_rot.x, t_rot.y, t_rot.z]
            if sum(a * b for a, b in zip(qp, qt)) < 0:
                qt = [-v for v in qt]
            expect_r = sum(abs(a - b) for a, b in zip(qp, qt))
            expect_s = abs(pred.scale - t_scale)
            assert terms.translation_term == pytest.approx(expect_t, abs=1e-12)
            assert terms.rotation_term == pytest.approx(expect_r, abs=1e-12)
            assert terms.scale_term == pytest.approx(expect_s, abs=1e-12)
            assert terms.total == pytest.approx(expect_t + expect_r + expect_s, abs=1e-12)

    def test_sign_alignment_makes_loss_flip_invariant(self, rng):
        pred = RelativePoseEstimate(
            direction=np.array([0.0, 0.0, 1.0]),
            rotation=random_rotation(rng),
            scale=1.0,
        )
        target = (np.array([0.0, 0.0, 1.0]), pred.rotation, 1.0)
        assert pose_loss(pred, target).rotation_term == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative_and_zero_iff_equal(self, rng):
        for _ in range(20):
            pred = RelativePoseEstimate(
                direction=rng.standard_normal(3),
                rotation=random_rotation(rng),
                scale=float(rng.uniform(0.1, 3.0)),
            )
            other_dir = rng.standard_normal(3)
            other_dir /= np.linalg.norm(other_dir)
            terms = pose_loss(pred, (other_dir, random_rotation(rng), pred.scale + 0.1))
            assert terms.total >= 0.0
            assert terms.total > 0.0


class TestAverageRotation:
    def test_same_input(self, rng):
        q = random_rotation(rng)
        assert rotation_angle(average_rotation(q, q), q) < 1e-9

    def test_geodesic_midpoint_of_90_degrees(self):
        q90 = Quaternion.from_axis_angle([0, 0, 1], math.pi / 2)
        q45 = Quaternion.from_axis_angle([0, 0, 1], math.pi / 4)
        mid = average_rotation(Quaternion.identity(), q90)
        assert rotation_angle(mid, q45) < 1e-9

    def test_equidistant_from_both_inputs(self, rng):
        for _ in range(100):
            a, b = random_rotation(rng), random_rotation(rng)
            try:
                mid = average_rotation(a, b)
            except AntipodalPair:
                continue
            assert rotation_angle(mid, a) == pytest.approx(rotation_angle(mid, b), abs=1e-9)

    def test_symmetric_in_arguments(self, rng):
        for _ in range(50):
            a, b = random_rotation(rng), random_rotation(rng)
            assert rotation_angle(average_rotation(a, b), average_rotation(b, a)) < 1e-9

    def test_antipodal_raises(self):
        a = Quaternion.identity()
        b = Quaternion.from_axis_angle([1, 0, 0], math.pi)
        with pytest.raises(AntipodalPair):
            average_rotation(a, b)


class TestRotationAngle:
    def test_zero_for_same(self, rng):
        q = random_rotation(rng)
        assert rotation_angle(q, q) == 0.0

    def test_ninety_degrees(self):
        q = Quaternion.from_axis_angle([0, 1, 0], math.pi / 2)
        assert rotation_angle(Quaternion.identity(), q) == pytest.approx(90.0, abs=1e-9)

    def test_double_cover_gives_zero(self, rng):
        q = random_rotation(rng)
        neg = Quaternion(-q.w, -q.x, -q.y, -q.z)
        assert rotation_angle(q, neg) == pytest.approx(0.0, abs=1e-6)

    def test_range(self, rng):
        for _ in range(200):
            a = rotation_angle(random_rotation(rng), random_rotation(rng))
            assert 0.0 <= a <= 180.0


class TestPoseRecord:
    def test_round_trip(self, rng):
        p = random_pose(rng)
        image_id, parsed = parse_pose_record(format_pose_record("img_007", p))
        assert image_id == "img_007"
        np.testing.assert_array_equal(parsed.translation, p.translation)
        assert rotation_angle(parsed.rotation, p.rotation) == 0.0

    def test_rejects_short_line(self):
        with pytest.raises(ValueError):
            parse_pose_record("img 1 2 3")
