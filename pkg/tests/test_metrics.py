import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from progip import metrics, rotmath, skeleton
from progip.errors import LengthMismatch
from progip.metrics import (
    evaluate_sequence,
    mjpe,
    mjpe_wrist,
    mjre,
    mjre_pelvis,
    per_motion_report,
    summarize,
)


@pytest.fixture(scope="module")
def skel():
    return skeleton.default_skeleton()


def random_poses(seed, t=5):
    dof = skeleton.default_skeleton().joint_indices(skeleton.REDUCED_JOINTS)
    poses = np.broadcast_to(np.eye(3), (t, 24, 3, 3)).copy()
    rots = Rotation.random(t * 16, random_state=np.random.RandomState(seed)).as_matrix()
    poses[:, dof] = rots.reshape(t, 16, 3, 3)
    return poses


def identity_poses(t=5):
    return np.broadcast_to(np.eye(3), (t, 24, 3, 3)).copy()


class TestMjre:
    def test_zero_for_identical(self, skel):
        p = random_poses(0)
        assert mjre(p, p, skel).max() < 1e-5

    def test_pelvis_rotation_propagates_to_all_joints(self, skel):
        pred = identity_poses(1)
        pred[0, 0] = Rotation.from_euler("z", 90, degrees=True).as_matrix()
        gt = identity_poses(1)
        assert abs(mjre(pred, gt, skel)[0] - 90.0) < 1e-9

    def test_single_joint_brute_force_oracle(self, skel):
        # rotating one elbow changes the global rotations of its descendants
        pred = identity_poses(1)
        j = skel.index["L_Elbow"]
        pred[0, j] = Rotation.from_euler("y", 90, degrees=True).as_matrix()
        gt = identity_poses(1)
        got = mjre(pred, gt, skel)[0]
        # oracle: walk every joint, compose ancestors by hand
        def global_rot(pose, joint):
            r = pose[joint]
            p = skel.parents[joint]
            while p >= 0:
                r = pose[p] @ r
                p = skel.parents[p]
            return r
        angles = [
            rotmath.geodesic_angle_deg(global_rot(pred[0], k), global_rot(gt[0], k))
            for k in range(24)
        ]
        assert abs(got - np.mean(angles)) < 1e-9
        # descendants of the elbow: elbow itself, wrist, hand -> 3 of 24 at 90 deg
        assert abs(got - 90.0 * 3 / 24) < 1e-9

    def test_gauge_invariance(self, skel):
        pred, gt = random_poses(1), random_poses(2)
        g = Rotation.random(random_state=np.random.RandomState(3)).as_matrix()
        pred_g, gt_g = pred.copy(), gt.copy()
        pred_g[:, 0] = g @ pred[:, 0]
        gt_g[:, 0] = g @ gt[:, 0]
        np.testing.assert_allclose(mjre(pred_g, gt_g, skel), mjre(pred, gt, skel), atol=1e-9)

    def test_length_mismatch(self, skel):
        with pytest.raises(LengthMismatch):
            mjre(random_poses(4, t=3), random_poses(5, t=4), skel)


class TestMjpe:
    def test_zero_for_identical(self, skel):
        p = random_poses(6)
        assert mjpe(p, p, skel).max() < 1e-9

    def test_pelvis_rotation_swings_limbs(self, skel):
        pred = identity_poses(1)
        pred[0, 0] = Rotation.from_euler("y", 90, degrees=True).as_matrix()
        gt = identity_poses(1)
        got = mjpe(pred, gt, skel)[0]
        # oracle: positions rotate rigidly about the pelvis
        pos_gt, _ = skeleton.forward_kinematics(skel, gt)
        pos_pred = pos_gt[0] @ pred[0, 0].T
        expected = np.linalg.norm(pos_pred - pos_gt[0], axis=-1).mean() * 100
        assert abs(got - expected) < 1e-9
        assert got > 1.0

    def test_translation_removed_by_alignment(self, skel):
        p = random_poses(7)
        trans = np.random.default_rng(8).normal(size=(5, 3))
        with_trans = mjpe(p, p, skel, pred_trans=trans, gt_trans=np.zeros((5, 3)))
        assert with_trans.max() < 1e-9

    def test_common_translation_invariance(self, skel):
        pred, gt = random_poses(9), random_poses(10)
        trans = np.random.default_rng(11).normal(size=(5, 3))
        base = mjpe(pred, gt, skel)
        moved = mjpe(pred, gt, skel, pred_trans=trans, gt_trans=trans)
        np.testing.assert_allclose(moved, base, atol=1e-9)


class TestRestrictions:
    def test_pelvis_only_30deg(self, skel):
        pred = identity_poses(2)
        pred[:, 0] = Rotation.from_euler("x", 30, degrees=True).as_matrix()
        gt = identity_poses(2)
        np.testing.assert_allclose(mjre_pelvis(pred, gt, skel), 30.0, atol=1e-9)

    def test_zero_for_identical(self, skel):
        p = random_poses(12)
        assert mjre_pelvis(p, p, skel).max() < 1e-5
        assert mjpe_wrist(p, p, skel).max() < 1e-9

    def test_wrist_metric_is_slice_of_full(self, skel):
        pred, gt = random_poses(13), random_poses(14)
        wrists = skel.joint_indices(("L_Wrist", "R_Wrist"))
        pred_pos, _ = skeleton.forward_kinematics(skel, pred)
        gt_pos, _ = skeleton.forward_kinematics(skel, gt)
        d = np.linalg.norm(
            (pred_pos - pred_pos[:, 0:1])[:, wrists] - (gt_pos - gt_pos[:, 0:1])[:, wrists], axis=-1
        ).mean(axis=-1) * 100
        np.testing.assert_allclose(mjpe_wrist(pred, gt, skel), d, atol=1e-9)

    def test_upper_body_mask(self, skel):
        pred = identity_poses(1)
        pred[0, skel.index["L_Knee"]] = Rotation.from_euler("x", 45, degrees=True).as_matrix()
        gt = identity_poses(1)
        assert mjre(pred, gt, skel)[0] > 0
        assert mjre(pred, gt, skel, joint_mask="upper_body")[0] < 1e-9


class TestReporting:
    def _metrics(self, label, seed):
        return evaluate_sequence(random_poses(seed), random_poses(seed + 100), skeleton.default_skeleton(), label=label)

    def test_single_group_overall_equals_group(self):
        m = self._metrics("walk", 20)
        rows, overall = per_motion_report([m])
        assert rows[0][0] == "walk"
        for k in metrics.METRIC_KEYS:
            assert abs(overall["mean"][k] - rows[0][1][k]) < 1e-12
            assert overall["std"][k] == 0.0

    def test_two_equal_groups_zero_std(self):
        a = self._metrics("a", 21)
        b = self._metrics("b", 21)
        rows, overall = per_motion_report([a, b])
        for k in metrics.METRIC_KEYS:
            assert overall["std"][k] < 1e-12

    def test_matches_streaming_mean_oracle(self):
        seqs = [self._metrics(f"m{i}", 30 + i) for i in range(4)]
        rows, overall = per_motion_report(seqs)
        # oracle: running mean over group means
        acc = {k: 0.0 for k in metrics.METRIC_KEYS}
        for _, values in rows:
            for k in metrics.METRIC_KEYS:
                acc[k] += values[k]
        for k in metrics.METRIC_KEYS:
            assert abs(overall["mean"][k] - acc[k] / len(rows)) < 1e-12

    def test_summarize_pools_frames(self):
        a = self._metrics("a", 40)
        b = self._metrics("b", 41)
        rep = summarize([a, b])
        pooled = np.concatenate([a.per_frame["mjre_deg"], b.per_frame["mjre_deg"]])
        assert abs(rep.mean["mjre_deg"] - pooled.mean()) < 1e-12
        assert abs(rep.std["mjre_deg"] - pooled.std()) < 1e-12
        assert "(+/-" in rep.line("mjre_deg")

    def test_csv_and_text_output(self, tmp_path):
        seqs = [self._metrics("walk", 50), self._metrics("run", 51)]
        rows, overall = per_motion_report(seqs)
        text = metrics.format_report(rows, overall)
        assert "walk" in text and "mean" in text and "std" in text
        path = tmp_path / "report.csv"
        metrics.write_csv(rows, overall, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("motion,")
        assert len(lines) == 1 + len(rows) + 2
