"""Synthetic IMU generation and measurement normalization.

Sensors are worn on the head and both wrists.  Synthetic measurements come
from forward kinematics of a motion sequence: the sensor rotation is the
global rotation of its joint, and the acceleration is a central second
difference of the joint position.  Real and synthetic measurements are
mapped to the same 45-dim per-frame network input by build_input.

Per frame the input layout is, for each sensor in placement order:

    [acc / acc_scale (3), rotation 6D (6), angular velocity 6D (6)]

Angular velocity is the relative rotation from the previous frame; the first
frame of a stream uses the identity.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import rotmath, skeleton
from .errors import TooShort

ACC_SCALE = 30.0
FEATURE_DIM = 45


@dataclass(frozen=True)
class SensorPlacement:
    """The three tracked joints, in feature order."""

    sensor_joints: tuple = ("Head", "L_Wrist", "R_Wrist")

    def __post_init__(self):
        if len(self.sensor_joints) != 3:
            raise ValueError("exactly three sensors are supported")

    def indices(self, skel):
        return skel.joint_indices(self.sensor_joints)


@dataclass
class ImuSequence:
    """Per-frame sensor measurements: acc (T, 3, 3) m/s^2, rot (T, 3, 3, 3)."""

    acc: np.ndarray
    rot: np.ndarray
    dt: float

    def __post_init__(self):
        self.acc = np.asarray(self.acc, dtype=np.float64)
        self.rot = np.asarray(self.rot, dtype=np.float64)
        if self.acc.ndim != 3 or self.acc.shape[1:] != (3, 3):
            raise ValueError(f"acc must be (T, 3, 3), got {self.acc.shape}")
        if self.rot.shape != self.acc.shape + (3,):
            raise ValueError(f"rot must be (T, 3, 3, 3), got {self.rot.shape}")

    def __len__(self):
        return len(self.acc)


def central_acceleration(positions, dt, span=1):
    """Second difference (p[t-s] + p[t+s] - 2 p[t]) / (s*dt)^2 along axis 0.

    Boundary frames copy their nearest interior value.  Exact for quadratic
    trajectories regardless of span.
    """
    positions = np.asarray(positions, dtype=np.float64)
    t = len(positions)
    if t < 2 * span + 1:
        raise TooShort(f"need at least {2 * span + 1} frames, got {t}")
    acc = np.empty_like(positions)
    inner = (positions[: -2 * span] + positions[2 * span:] - 2.0 * positions[span:-span]) / (span * dt) ** 2
    acc[span:-span] = inner
    acc[:span] = inner[0]
    acc[-span:] = inner[-1]
    return acc


def synthesize_imu(skel, motion, placement=None, dt=None, smoothing_span=1, add_gravity=False):
    """Generate sensor measurements from a motion sequence via FK.

    motion: a datasets.MotionSequence (or anything with .local_rotations()
    and .framerate).  dt defaults to 1/framerate.  Gravity is left out by
    default; downstream mean alignment removes constant offsets anyway.
    """
    placement = placement or SensorPlacement()
    if dt is None:
        dt = 1.0 / motion.framerate
    rots = motion.local_rotations()
    if len(rots) < 2 * smoothing_span + 1:
        raise TooShort(f"motion has {len(rots)} frames; need {2 * smoothing_span + 1}")
    positions, global_rot = skeleton.forward_kinematics(skel, rots)
    sensors = placement.indices(skel)
    acc = central_acceleration(positions[:, sensors], dt, span=smoothing_span)
    if add_gravity:
        acc = acc + np.array([0.0, 9.81, 0.0])
    return ImuSequence(acc=acc, rot=global_rot[:, sensors], dt=dt)


def frame_features(acc, rot, prev_rot, acc_scale=ACC_SCALE):
    """45-dim input vector for one frame.

    acc (3, 3) and rot (3, 3, 3) are the frame's sensor measurements;
    prev_rot is the previous frame's rotations or None at stream start.
    Shared by offline feature building and the streaming runtime so both
    produce bit-identical features.
    """
    parts = []
    for s in range(3):
        w = np.eye(3) if prev_rot is None else rotmath.angular_velocity(prev_rot[s], rot[s])
        parts.append(np.asarray(acc[s], dtype=np.float64) / acc_scale)
        parts.append(rotmath.rot_to_6d(rot[s]))
        parts.append(rotmath.rot_to_6d(w))
    return np.concatenate(parts)


def build_input(imu, acc_scale=ACC_SCALE):
    """Feature sequence (T, 45) for an ImuSequence.

    The first frame's angular velocity is the identity (no predecessor).
    """
    if len(imu) < 2:
        raise TooShort("need at least 2 frames for angular velocity")
    feats = np.empty((len(imu), FEATURE_DIM), dtype=np.float64)
    prev = None
    for t in range(len(imu)):
        feats[t] = frame_features(imu.acc[t], imu.rot[t], prev, acc_scale)
        prev = imu.rot[t]
    return feats


def acc_bias_align(imu, synth_mean_acc):
    """Shift each sensor's accelerations so their mean matches the target.

    synth_mean_acc: (3, 3) per-sensor target means.  Rotations unchanged.
    Idempotent.
    """
    target = np.asarray(synth_mean_acc, dtype=np.float64)
    mean = imu.acc.mean(axis=0)
    return replace(imu, acc=imu.acc - mean + target)


def align_global_frame(imu, sensor_calib, global_rot=None):
    """Map raw measurements into the unified global frame.

    rot' = G @ rot @ C_s and acc' = G @ acc, with per-sensor mounting
    corrections C_s (3, 3, 3) and one shared frame rotation G.
    """
    c = np.asarray(sensor_calib, dtype=np.float64)
    g = np.eye(3) if global_rot is None else np.asarray(global_rot, dtype=np.float64)
    rot = g @ imu.rot @ c
    acc = imu.acc @ g.T
    return replace(imu, acc=acc, rot=rot)


def _mean_rotation(rots):
    """Chordal mean: project the arithmetic mean back onto SO(3)."""
    m = np.asarray(rots, dtype=np.float64).mean(axis=0)
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def tpose_calibration(imu, n_frames=60):
    """Derive (sensor_calib, global_rot) from a still rest-pose prefix.

    While the wearer holds the rest pose, every sensor should read the
    identity once aligned, so C_s = (G @ mean rot_s)^T.  G removes the head
    sensor's heading (rotation about the vertical y axis) so the shared
    frame faces the wearer's initial direction.
    """
    k = min(n_frames, len(imu))
    means = np.stack([_mean_rotation(imu.rot[:k, s]) for s in range(3)])
    head = means[0]
    # heading of the head sensor's forward (z) axis in the horizontal plane
    fwd = head[:, 2]
    yaw = np.arctan2(fwd[0], fwd[2])
    g = rotmath.axis_angle_to_rot(np.array([0.0, -yaw, 0.0]))
    calib = np.swapaxes(g @ means, -1, -2)
    return calib, g
