import numpy as np
import pytest

from poseval.errors import VertexBehindCamera
from poseval.geometry import CameraIntrinsics, RigidTransform
from poseval.pose_error import add, adi, mspd, mssd, vsd
from poseval.reference import (
    add_loop,
    adi_loop,
    mspd_triple_loop,
    mssd_triple_loop,
    vsd_pixel_loop,
)
from poseval.shapes import cube
from poseval.symmetry import find_discrete_symmetries

from helpers import random_pose, random_visibility_instance

CAM = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)
IDENTITY_ONLY = [RigidTransform.identity()]


@pytest.fixture(scope="module")
def cube_syms():
    return find_discrete_symmetries(cube(200.0))


@pytest.fixture(scope="module")
def cube_verts():
    return cube(200.0).vertices


class TestVsd:
    def test_perfect_pose_is_zero_for_every_tau(self):
        rng = np.random.default_rng(0)
        dist = np.where(rng.random((8, 8)) < 0.6, rng.uniform(400, 900, (8, 8)), 0)
        mask = dist > 0
        errors = vsd(dist, dist, mask, mask, [1.0, 5.0, 50.0])
        assert np.array_equal(errors, [0.0, 0.0, 0.0])

    def test_hand_evaluated_union_example(self):
        # est visible at {p1, p2}, gt visible at {p2, p3}; |diff| at p2 = 3 mm.
        est_dist = np.array([[600.0, 700.0, 0.0]])
        gt_dist = np.array([[0.0, 703.0, 800.0]])
        est_mask = np.array([[True, True, False]])
        gt_mask = np.array([[False, True, True]])
        errors = vsd(est_dist, gt_dist, est_mask, gt_mask, [2.0, 5.0])
        assert errors[1] == pytest.approx(2.0 / 3.0, abs=1e-15)  # tau = 5
        assert errors[0] == 1.0                                  # tau = 2

    def test_matches_pixel_loop_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(10):
            est, gt, est_mask, gt_mask = random_visibility_instance(rng, 8, 8)
            taus = np.sort(rng.uniform(0.5, 600.0, size=20))
            fast = vsd(est, gt, est_mask, gt_mask, taus)
            slow, _, _ = vsd_pixel_loop(est, gt, est_mask, gt_mask, taus)
            assert np.array_equal(fast, slow)

    def test_empty_union_rejected(self):
        zeros = np.zeros((4, 4))
        falses = np.zeros((4, 4), dtype=bool)
        with pytest.raises(ValueError, match="visibility"):
            vsd(zeros, zeros, falses, falses, [5.0])

    def test_taus_must_increase(self):
        maps = np.ones((2, 2))
        mask = np.ones((2, 2), bool)
        with pytest.raises(ValueError):
            vsd(maps, maps, mask, mask, [5.0, 5.0])

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            est, gt, est_mask, gt_mask = random_visibility_instance(rng, 10, 10)
            taus = np.sort(rng.uniform(0.5, 800.0, size=8))
            errors = vsd(est, gt, est_mask, gt_mask, taus)
            assert np.all(np.diff(errors) <= 0)


class TestMssd:
    def test_equal_poses(self, cube_verts):
        pose = random_pose(np.random.default_rng(1))
        assert mssd(pose, pose, IDENTITY_ONLY, cube_verts) == 0.0

    def test_symmetry_equivalent_pose(self, cube_syms, cube_verts):
        rng = np.random.default_rng(2)
        gt = random_pose(rng)
        for sym in list(cube_syms)[::5]:
            est = gt.compose(sym)
            assert mssd(est, gt, cube_syms, cube_verts) <= 1e-9

    def test_pure_translation(self, cube_verts):
        gt = random_pose(np.random.default_rng(3))
        est = RigidTransform(gt.rotation, gt.translation + [3.0, 4.0, 0.0])
        assert mssd(est, gt, IDENTITY_ONLY, cube_verts) == pytest.approx(5.0, abs=1e-12)

    def test_matches_triple_loop(self, cube_syms):
        rng = np.random.default_rng(4)
        verts = rng.uniform(-100, 100, size=(50, 3))
        for _ in range(5):
            est, gt = random_pose(rng), random_pose(rng)
            fast = mssd(est, gt, cube_syms, verts)
            slow = mssd_triple_loop(est, gt, cube_syms, verts)
            assert fast == pytest.approx(slow, abs=1e-9)

    def test_empty_vertices_rejected(self):
        pose = RigidTransform.identity()
        with pytest.raises(ValueError):
            mssd(pose, pose, IDENTITY_ONLY, np.zeros((0, 3)))


class TestMspd:
    def test_equal_poses(self, cube_verts):
        pose = random_pose(np.random.default_rng(6))
        assert mspd(pose, pose, IDENTITY_ONLY, cube_verts, CAM) == 0.0

    def test_optical_axis_shift_invisible(self):
        # A vertex on the optical axis projects identically after a pure
        # Z-shift: the projection error does not see optical-axis motion.
        verts = np.array([[0.0, 0.0, 0.0]])
        gt = RigidTransform(np.eye(3), (0.0, 0.0, 600.0))
        est = RigidTransform(np.eye(3), (0.0, 0.0, 480.0))
        assert mspd(est, gt, IDENTITY_ONLY, verts, CAM) == 0.0

    def test_matches_triple_loop(self, cube_syms):
        rng = np.random.default_rng(7)
        verts = rng.uniform(-80, 80, size=(40, 3))
        for _ in range(5):
            est = random_pose(rng, center=(0, 0, 900), spread=30)
            gt = random_pose(rng, center=(0, 0, 900), spread=30)
            fast = mspd(est, gt, cube_syms, verts, CAM)
            slow = mspd_triple_loop(est, gt, cube_syms, verts, CAM)
            assert fast == pytest.approx(slow, abs=1e-6)

    def test_vertex_behind_camera(self, cube_verts):
        gt = RigidTransform(np.eye(3), (0.0, 0.0, 600.0))
        est = RigidTransform(np.eye(3), (0.0, 0.0, 50.0))  # cube spans z<0
        with pytest.raises(VertexBehindCamera):
            mspd(est, gt, IDENTITY_ONLY, cube_verts, CAM)


class TestAddAdi:
    def test_equal_poses(self, cube_verts):
        pose = random_pose(np.random.default_rng(8))
        assert add(pose, pose, cube_verts) == 0.0
        assert adi(pose, pose, cube_verts) == 0.0

    def test_translation_add(self, cube_verts):
        gt = random_pose(np.random.default_rng(9))
        est = RigidTransform(gt.rotation, gt.translation + [3.0, 4.0, 0.0])
        assert add(est, gt, cube_verts) == pytest.approx(5.0, abs=1e-12)

    def test_matches_loops_and_adi_bound(self):
        rng = np.random.default_rng(10)
        verts = rng.uniform(-100, 100, size=(100, 3))
        for _ in range(5):
            est, gt = random_pose(rng), random_pose(rng)
            a = add(est, gt, verts)
            i = adi(est, gt, verts)
            assert a == pytest.approx(add_loop(est, gt, verts), abs=1e-9)
            assert i == pytest.approx(adi_loop(est, gt, verts), abs=1e-9)
            assert i <= a + 1e-12


class TestInvariances:
    def test_adding_symmetries_never_increases_error(self, cube_syms):
        rng = np.random.default_rng(11)
        verts = rng.uniform(-100, 100, size=(30, 3))
        for _ in range(20):
            est, gt = random_pose(rng), random_pose(rng)
            base_m = mssd(est, gt, IDENTITY_ONLY, verts)
            base_p = mspd(est, gt, IDENTITY_ONLY, verts, CAM)
            more = [RigidTransform.identity(), random_pose(rng, center=(0, 0, 0), spread=10)]
            assert mssd(est, gt, more, verts) <= base_m + 1e-12
            assert mspd(est, gt, more, verts, CAM) <= base_p + 1e-12
            assert mssd(est, gt, cube_syms, verts) <= base_m + 1e-12

    def test_mssd_rigid_motion_invariance(self, cube_syms):
        rng = np.random.default_rng(12)
        verts = rng.uniform(-100, 100, size=(30, 3))
        for _ in range(20):
            est, gt, world = (random_pose(rng) for _ in range(3))
            plain = mssd(est, gt, cube_syms, verts)
            moved = mssd(world.compose(est), world.compose(gt), cube_syms, verts)
            assert moved == pytest.approx(plain, abs=1e-9)

    def test_mssd_invariant_under_right_composition_with_group(self, cube_syms, cube_verts):
        rng = np.random.default_rng(13)
        est, gt = random_pose(rng), random_pose(rng)
        base = mssd(est, gt, cube_syms, cube_verts)
        for sym in list(cube_syms)[::6]:
            shifted = mssd(est.compose(sym), gt, cube_syms, cube_verts)
            assert shifted == pytest.approx(base, abs=1e-9)
