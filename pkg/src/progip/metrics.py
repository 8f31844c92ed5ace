"""Evaluation metrics over full-pose sequences, plus per-motion reporting.

All rotation metrics compare *global* joint rotations (composed through the
kinematic chain) in degrees; position metrics compare FK joint positions in
centimeters after per-frame pelvis alignment.  Every metric is computed per
frame first; reported means and standard deviations aggregate the per-frame
series (population form).
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import rotmath
from .errors import LengthMismatch
from .skeleton import forward_kinematics

METRIC_KEYS = ("mjre_deg", "mjre_pelvis_deg", "mjpe_cm", "mjpe_wrist_cm")

UPPER_BODY_JOINTS = (
    "Pelvis", "Spine1", "Spine2", "Spine3", "Neck", "L_Collar", "R_Collar",
    "Head", "L_Shoulder", "R_Shoulder", "L_Elbow", "R_Elbow",
    "L_Wrist", "R_Wrist", "L_Hand", "R_Hand",
)


def _mask_indices(skel, joint_mask):
    if joint_mask is None or joint_mask == "all":
        return np.arange(24)
    if joint_mask == "upper_body":
        return skel.joint_indices(UPPER_BODY_JOINTS)
    return skel.joint_indices(tuple(joint_mask))


def _check_lengths(pred, gt):
    if len(pred) != len(gt):
        raise LengthMismatch(f"pred has {len(pred)} frames, gt has {len(gt)}")


def _fk_pair(pred, gt, skel, pred_trans=None, gt_trans=None):
    pred_pos, pred_rot = forward_kinematics(skel, np.asarray(pred, dtype=np.float64))
    gt_pos, gt_rot = forward_kinematics(skel, np.asarray(gt, dtype=np.float64))
    if pred_trans is not None:
        pred_pos = pred_pos + np.asarray(pred_trans, dtype=np.float64)[:, None, :]
    if gt_trans is not None:
        gt_pos = gt_pos + np.asarray(gt_trans, dtype=np.float64)[:, None, :]
    return pred_pos, pred_rot, gt_pos, gt_rot


def mjre(pred, gt, skel, joint_mask=None):
    """Mean angular error (deg) of global joint rotations, per frame (T,)."""
    _check_lengths(pred, gt)
    _, pred_rot, _, gt_rot = _fk_pair(pred, gt, skel)
    idx = _mask_indices(skel, joint_mask)
    angles = rotmath.geodesic_angle_deg(pred_rot[:, idx], gt_rot[:, idx])
    return angles.mean(axis=-1)


def mjre_pelvis(pred, gt, skel):
    """Global pelvis rotation error (deg), per frame (T,)."""
    _check_lengths(pred, gt)
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    return rotmath.geodesic_angle_deg(pred[:, 0], gt[:, 0])


def mjpe(pred, gt, skel, joint_mask=None, pred_trans=None, gt_trans=None):
    """Mean joint position error (cm) with pelvis aligned, per frame (T,)."""
    _check_lengths(pred, gt)
    pred_pos, _, gt_pos, _ = _fk_pair(pred, gt, skel, pred_trans, gt_trans)
    pred_pos = pred_pos - pred_pos[:, 0:1]
    gt_pos = gt_pos - gt_pos[:, 0:1]
    idx = _mask_indices(skel, joint_mask)
    dist = np.linalg.norm(pred_pos[:, idx] - gt_pos[:, idx], axis=-1)
    return dist.mean(axis=-1) * 100.0


def mjpe_wrist(pred, gt, skel, pred_trans=None, gt_trans=None):
    """Wrist-pair position error (cm) with pelvis aligned, per frame (T,)."""
    return mjpe(pred, gt, skel, joint_mask=("L_Wrist", "R_Wrist"),
                pred_trans=pred_trans, gt_trans=gt_trans)


@dataclass
class SequenceMetrics:
    """Per-frame metric series of one evaluated sequence."""

    label: str
    per_frame: dict

    @property
    def n_frames(self):
        return len(next(iter(self.per_frame.values())))

    def mean(self, key):
        return float(np.mean(self.per_frame[key]))

    def std(self, key):
        return float(np.std(self.per_frame[key]))


@dataclass
class EvalReport:
    """Aggregated means/stds plus the per-sequence breakdown."""

    mean: dict
    std: dict
    sequences: list

    def line(self, key):
        return f"{self.mean[key]:.2f} (+/- {self.std[key]:.2f})"


def evaluate_sequence(pred, gt, skel, joint_mask=None, label=""):
    """All metrics for one aligned pair of full-pose sequences."""
    return SequenceMetrics(
        label=label,
        per_frame={
            "mjre_deg": mjre(pred, gt, skel, joint_mask),
            "mjre_pelvis_deg": mjre_pelvis(pred, gt, skel),
            "mjpe_cm": mjpe(pred, gt, skel, joint_mask),
            "mjpe_wrist_cm": mjpe_wrist(pred, gt, skel),
        },
    )


def summarize(sequences):
    """Pool per-frame series across sequences into one EvalReport."""
    seqs = list(sequences)
    if not seqs:
        raise ValueError("nothing to summarize")
    pooled = {k: np.concatenate([s.per_frame[k] for s in seqs]) for k in METRIC_KEYS}
    return EvalReport(
        mean={k: float(v.mean()) for k, v in pooled.items()},
        std={k: float(v.std()) for k, v in pooled.items()},
        sequences=seqs,
    )


def per_motion_report(sequences):
    """Group sequences by label: per-group means plus overall mean/std rows.

    Returns (rows, overall) where rows is a list of
    (label, {metric: group mean}) in first-seen label order and overall maps
    "mean"/"std" to aggregates across the group means.
    """
    seqs = list(sequences)
    if not seqs:
        raise ValueError("need at least one sequence")
    groups = {}
    for s in seqs:
        groups.setdefault(s.label, []).append(s)
    rows = []
    for label, members in groups.items():
        pooled = {k: np.concatenate([m.per_frame[k] for m in members]) for k in METRIC_KEYS}
        rows.append((label, {k: float(v.mean()) for k, v in pooled.items()}))
    table = np.array([[row[1][k] for k in METRIC_KEYS] for row in rows])
    overall = {
        "mean": dict(zip(METRIC_KEYS, table.mean(axis=0))),
        "std": dict(zip(METRIC_KEYS, table.std(axis=0))),
    }
    return rows, overall


def format_report(rows, overall):
    """Plain-text table of a per-motion report."""
    header = f"{'motion':<16}" + "".join(f"{k:>18}" for k in METRIC_KEYS)
    lines = [header, "-" * len(header)]
    for label, values in rows:
        lines.append(f"{label:<16}" + "".join(f"{values[k]:>18.4f}" for k in METRIC_KEYS))
    lines.append("-" * len(header))
    for agg in ("mean", "std"):
        lines.append(f"{agg:<16}" + "".join(f"{overall[agg][k]:>18.4f}" for k in METRIC_KEYS))
    return "\n".join(lines)


def write_csv(rows, overall, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["motion", *METRIC_KEYS])
        for label, values in rows:
            writer.writerow([label] + [f"{values[k]:.6f}" for k in METRIC_KEYS])
        for agg in ("mean", "std"):
            writer.writerow([agg] + [f"{overall[agg][k]:.6f}" for k in METRIC_KEYS])
