import json

import numpy as np
import pytest

from avatarkit.camera import fit_camera_to_bbox
from avatarkit.errors import AlignmentError, AnnotationError, EmptySelectionError
from avatarkit.handles import JOINT_NAMES, joint_positions
from avatarkit.metrics import (
    chamfer_gt_to_pred,
    evaluate,
    joint_error,
    silhouette_iou,
    visible_vertex_filter,
)
from avatarkit.mesh import TriMesh
from avatarkit.raster import BinaryMask, rasterize
from avatarkit.synth import make_synthetic_case
from avatarkit.templates import default_joint_handles


def point_cloud_mesh(points):
    """Wrap loose points as a mesh with one dummy face (metrics use vertices)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    face = [[0, 1 % n, 2 % n]]
    return TriMesh(pts, face)


class TestSilhouetteIoU:
    def test_identical(self):
        bits = np.random.default_rng(0).random((16, 16)) > 0.5
        assert silhouette_iou(BinaryMask(bits), BinaryMask(bits)) == 1.0

    def test_disjoint(self):
        a = np.zeros((8, 8), dtype=bool)
        b = np.zeros((8, 8), dtype=bool)
        a[:4] = True
        b[4:] = True
        assert silhouette_iou(BinaryMask(a), BinaryMask(b)) == 0.0

    def test_quarter_overlap(self):
        # 4x4 squares overlapping in a 2x2 corner: 4 / (16 + 16 - 4) = 1/7;
        # and two half-offset 4x4 squares sharing 8 pixels: 8 / 24 = 1/3
        a = np.zeros((8, 8), dtype=bool)
        b = np.zeros((8, 8), dtype=bool)
        a[0:4, 0:4] = True
        b[2:6, 0:4] = True
        assert silhouette_iou(BinaryMask(a), BinaryMask(b)) == pytest.approx(1 / 3)

    def test_both_empty(self):
        e = BinaryMask(np.zeros((4, 4), dtype=bool))
        assert silhouette_iou(e, e) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = BinaryMask(rng.random((12, 12)) > 0.4)
        b = BinaryMask(rng.random((12, 12)) > 0.6)
        assert silhouette_iou(a, b) == silhouette_iou(b, a)

    def test_size_mismatch(self):
        with pytest.raises(AlignmentError):
            silhouette_iou(
                BinaryMask(np.zeros((4, 4), dtype=bool)),
                BinaryMask(np.zeros((5, 4), dtype=bool)),
            )


class TestJointError:
    def test_zero(self):
        pts = np.random.default_rng(0).random((10, 2))
        assert joint_error(pts, pts) == 0.0

    def test_three_four_five(self):
        pred = [[0.0, 0.0], [1.0, 1.0]]
        gt = [[3.0, 4.0], [1.0, 1.0]]
        assert joint_error(pred, gt) == pytest.approx(2.5)

    def test_count_mismatch(self):
        with pytest.raises(AnnotationError):
            joint_error(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_translation_of_both_invariant(self):
        rng = np.random.default_rng(2)
        pred, gt = rng.random((6, 2)), rng.random((6, 2))
        t = np.array([7.0, -3.0])
        assert joint_error(pred + t, gt + t) == pytest.approx(joint_error(pred, gt))


class TestChamfer:
    def test_identical_zero(self):
        mesh = point_cloud_mesh(np.random.default_rng(0).random((50, 3)))
        assert chamfer_gt_to_pred(mesh, mesh) == 0.0

    def test_two_point_millimeters(self):
        gt = point_cloud_mesh([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        pred = point_cloud_mesh([[0.001, 0.0, 0.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]])
        assert chamfer_gt_to_pred(gt, pred) == pytest.approx(1.0)

    def test_one_directional(self):
        # an extra faraway predicted vertex must not change the GT->pred mean
        gt = point_cloud_mesh(np.random.default_rng(1).random((20, 3)))
        pred_pts = np.random.default_rng(2).random((20, 3))
        base = chamfer_gt_to_pred(gt, point_cloud_mesh(pred_pts))
        extended = chamfer_gt_to_pred(
            gt, point_cloud_mesh(np.vstack([pred_pts, [[100.0, 100.0, 100.0]]]))
        )
        assert extended == pytest.approx(base)

    def test_kdtree_equals_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            gt = point_cloud_mesh(rng.normal(size=(500, 3)))
            pred = point_cloud_mesh(rng.normal(size=(500, 3)))
            fast = chamfer_gt_to_pred(gt, pred)
            slow = chamfer_gt_to_pred(gt, pred, brute_force=True)
            assert fast == slow

    def test_empty_filter(self):
        mesh = point_cloud_mesh(np.random.default_rng(0).random((10, 3)))
        with pytest.raises(EmptySelectionError):
            chamfer_gt_to_pred(mesh, mesh, visible_filter=np.zeros(10, dtype=bool))


class TestVisibleVertexFilter:
    def test_flat_sheet_all_visible(self):
        verts = [[-1.0, -1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, 1.0], [-1.0, 1.0, 1.0]]
        mesh = TriMesh(verts, [[0, 1, 2], [0, 2, 3]])
        cam = fit_camera_to_bbox(mesh.vertices, (64, 64))
        assert visible_vertex_filter(mesh, cam).all()

    def test_sphere_fraction(self, sphere):
        cam = fit_camera_to_bbox(sphere.vertices, (256, 256))
        vis = visible_vertex_filter(sphere, cam)
        frac = vis.mean()
        assert 0.45 < frac < 0.60


class TestEvaluate:
    def test_assembly_and_json(self, tmp_path):
        case = make_synthetic_case(seed=17)
        handles = default_joint_handles(case.initial_mesh)
        pred_joints = joint_positions(case.initial_mesh, handles, case.camera)
        gt = np.asarray([case.gt_joints[n] for n in JOINT_NAMES])
        report = evaluate(
            case.initial_mesh,
            case.camera,
            gt_mask=case.gt_mask,
            gt_mesh=case.gt_mesh,
            pred_joints=pred_joints,
            gt_joints=gt,
        )
        assert 0.0 < report.sil_iou < 1.0
        assert report.joint_err_px > 0.0
        assert report.chamfer_full_mm > 0.0
        assert report.chamfer_visible_mm > 0.0
        path = tmp_path / "metrics.json"
        report.to_json(path)
        data = json.loads(path.read_text())
        assert set(data) == {
            "sil IoU",
            "2D joint err",
            "3D err full",
            "3D err visible",
            "breakdown",
        }
        assert len(data["breakdown"]["joint_err_px_per_joint"]) == len(JOINT_NAMES)

    def test_partial_ground_truth(self):
        case = make_synthetic_case(seed=18)
        report = evaluate(case.initial_mesh, case.camera, gt_mask=case.gt_mask)
        assert report.sil_iou is not None
        assert report.joint_err_px is None
        assert report.chamfer_full_mm is None

    def test_self_evaluation_perfect(self):
        case = make_synthetic_case(seed=19)
        report = evaluate(case.gt_mesh, case.camera, gt_mask=case.gt_mask, gt_mesh=case.gt_mesh)
        assert report.sil_iou == 1.0
        assert report.chamfer_full_mm == 0.0
