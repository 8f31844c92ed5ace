"""Canonical motion/IMU storage, loaders, resampling and split protocol.

A motion sequence is stored as a directory:

    meta.json      {"format_version": 1, "framerate": 60.0, "n_frames": F,
                    "n_joints": 24, "subject": "...", "label": "...",
                    "has_imu": false}
    poses.f32      little-endian float32, row-major [frame][joint][3]
                   axis-angle local rotations; the pelvis entry is the
                   global orientation
    imu_acc.f32    optional, [frame][sensor][3] m/s^2
    imu_rot.f32    optional, [frame][sensor][3][3] row-major global rotations

The directory layout keeps metadata diff-able and the blobs streamable from
any language.
"""

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import rotmath
from .errors import FormatError, NaNError, ProtocolError

FORMAT_VERSION = 1
N_SENSORS = 3


@dataclass
class MotionSequence:
    """In-memory form of one canonical sequence.

    poses: (F, 24, 3) float32 axis-angle; framerate in Hz; imu_acc/imu_rot
    are None unless the sequence carries real measurements ((F, 3, 3) and
    (F, 3, 3, 3) when present, frame-aligned with poses).
    """

    poses: np.ndarray
    framerate: float
    subject: str = ""
    label: str = ""
    imu_acc: np.ndarray = None
    imu_rot: np.ndarray = None

    def __post_init__(self):
        self.poses = np.ascontiguousarray(self.poses, dtype=np.float32)
        if self.poses.ndim != 3 or self.poses.shape[1:] != (24, 3):
            raise ValueError(f"poses must be (F, 24, 3), got {self.poses.shape}")
        if self.framerate <= 0:
            raise ValueError("framerate must be positive")
        if (self.imu_acc is None) != (self.imu_rot is None):
            raise ValueError("imu_acc and imu_rot must be present together")
        if self.imu_acc is not None:
            self.imu_acc = np.ascontiguousarray(self.imu_acc, dtype=np.float32)
            self.imu_rot = np.ascontiguousarray(self.imu_rot, dtype=np.float32)
            f = len(self.poses)
            if self.imu_acc.shape != (f, N_SENSORS, 3) or self.imu_rot.shape != (f, N_SENSORS, 3, 3):
                raise ValueError("IMU channels must be frame-aligned (F, 3, 3[, 3])")

    @property
    def n_frames(self):
        return len(self.poses)

    @property
    def has_imu(self):
        return self.imu_acc is not None

    def local_rotations(self):
        """Axis-angle poses decoded to (F, 24, 3, 3) rotation matrices."""
        return rotmath.axis_angle_to_rot(self.poses.astype(np.float64))

    def duration_s(self):
        return self.n_frames / self.framerate


def save_canonical(seq, path):
    """Write a MotionSequence to a canonical directory (created if missing)."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "framerate": float(seq.framerate),
        "n_frames": int(seq.n_frames),
        "n_joints": 24,
        "subject": seq.subject,
        "label": seq.label,
        "has_imu": bool(seq.has_imu),
    }
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=1)
    seq.poses.astype("<f4").tofile(os.path.join(path, "poses.f32"))
    if seq.has_imu:
        seq.imu_acc.astype("<f4").tofile(os.path.join(path, "imu_acc.f32"))
        seq.imu_rot.astype("<f4").tofile(os.path.join(path, "imu_rot.f32"))


def _read_blob(path, shape):
    data = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise FormatError(f"{path}: expected {expected} floats, found {data.size}")
    if not np.isfinite(data).all():
        raise NaNError(f"{path}: blob contains non-finite values")
    return data.reshape(shape)


def load_canonical(path):
    """Load a canonical directory; raises FormatError / NaNError on damage."""
    meta_path = os.path.join(path, "meta.json")
    if not os.path.isfile(meta_path):
        raise FormatError(f"{path}: missing meta.json")
    try:
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{meta_path}: invalid JSON ({e})") from e
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {meta.get('format_version')}")
    if meta.get("n_joints") != 24:
        raise FormatError(f"{path}: expected 24 joints, got {meta.get('n_joints')}")
    n = int(meta["n_frames"])
    poses = _read_blob(os.path.join(path, "poses.f32"), (n, 24, 3))
    acc = rot = None
    if meta.get("has_imu"):
        acc = _read_blob(os.path.join(path, "imu_acc.f32"), (n, N_SENSORS, 3))
        rot = _read_blob(os.path.join(path, "imu_rot.f32"), (n, N_SENSORS, 3, 3))
    return MotionSequence(
        poses=poses,
        framerate=float(meta["framerate"]),
        subject=str(meta.get("subject", "")),
        label=str(meta.get("label", "")),
        imu_acc=acc,
        imu_rot=rot,
    )


def _slerp(r0, r1, u):
    """Geodesic interpolation between two batches of rotation matrices."""
    rel = np.swapaxes(r0, -1, -2) @ r1
    aa = rotmath.rot_to_axis_angle(rel)
    return r0 @ rotmath.axis_angle_to_rot(aa * u)


def resample(seq, target_hz=60.0):
    """Resample to target_hz by per-joint spherical interpolation.

    Returns the sequence unchanged when it is already at the target rate.
    First and last frames are preserved.
    """
    if abs(seq.framerate - target_hz) < 1e-9:
        return seq
    n_src = seq.n_frames
    if n_src < 2:
        return replace(seq, framerate=float(target_hz))
    duration = (n_src - 1) / seq.framerate
    n_dst = int(np.floor(duration * target_hz)) + 1
    t_dst = np.arange(n_dst) / target_hz * seq.framerate  # in source-frame units
    idx0 = np.clip(np.floor(t_dst).astype(int), 0, n_src - 2)
    u = (t_dst - idx0)[:, None, None]  # broadcast over (joint, vec) axes
    rots = seq.local_rotations()
    out = _slerp(rots[idx0], rots[idx0 + 1], u)
    poses = rotmath.rot_to_axis_angle(out).astype(np.float32)
    # output frames that land exactly on source frames keep their stored rows
    exact = np.abs(u[:, 0, 0]) < 1e-9
    poses[exact] = seq.poses[idx0[exact]]
    exact_hi = np.abs(u[:, 0, 0] - 1.0) < 1e-9
    poses[exact_hi] = seq.poses[idx0[exact_hi] + 1]
    if seq.has_imu:
        # nearest-frame pick keeps measured values unsynthesized
        nearest = np.clip(np.round(t_dst).astype(int), 0, n_src - 1)
        return replace(
            seq,
            poses=poses,
            framerate=float(target_hz),
            imu_acc=seq.imu_acc[nearest],
            imu_rot=seq.imu_rot[nearest],
        )
    return replace(seq, poses=poses, framerate=float(target_hz))


def align_orientation(seq, g):
    """Left-multiply the pelvis global rotation by g; other joints untouched."""
    g = np.asarray(g, dtype=np.float64)
    rotmath.validate_rotation(g)
    pelvis = rotmath.axis_angle_to_rot(seq.poses[:, 0].astype(np.float64))
    new_pelvis = rotmath.rot_to_axis_angle(g @ pelvis).astype(np.float32)
    poses = seq.poses.copy()
    poses[:, 0] = new_pelvis
    return replace(seq, poses=poses)


# §-protocol constants: AMASS test subsets and the trailing DIP subjects
AMASS_TEST_SUBSETS = ("HumanEval", "Transition")
DIP_VALIDATION_COUNT = 2

DEFAULT_PROTOCOL = {
    "amass_test_subsets": AMASS_TEST_SUBSETS,
    "dip_validation_count": DIP_VALIDATION_COUNT,
}


def build_splits(catalog, protocol=None):
    """Partition a catalog into {train, val, test} lists of entries.

    catalog: iterable of dicts with at least {"path", "dataset"} and, per
    dataset, "subset" (amass) or "subject" (dip).  Rules: AMASS test subsets
    go to test and the rest to train; the last N DIP subjects go to val and
    the rest to train; TotalCapture is test-only.
    """
    protocol = {**DEFAULT_PROTOCOL, **(protocol or {})}
    entries = list(catalog)
    splits = {"train": [], "val": [], "test": []}
    test_subsets = set(protocol["amass_test_subsets"])

    dip_subjects = sorted(
        {str(e.get("subject", "")) for e in entries if e.get("dataset") == "dip"},
        key=lambda s: (len(s), s),
    )
    val_subjects = set(dip_subjects[-protocol["dip_validation_count"]:]) if dip_subjects else set()

    for e in entries:
        kind = e.get("dataset")
        if kind == "amass":
            role = "test" if e.get("subset") in test_subsets else "train"
        elif kind == "dip":
            role = "val" if str(e.get("subject", "")) in val_subjects else "train"
        elif kind == "totalcapture":
            role = "test"
        else:
            raise ProtocolError(f"unknown dataset kind {kind!r} in catalog")
        splits[role].append(e)

    has_amass = any(e.get("dataset") == "amass" for e in entries)
    if has_amass and not any(e.get("dataset") == "amass" for e in splits["test"]):
        raise ProtocolError(f"catalog has no sequences from the test subsets {sorted(test_subsets)}")
    return splits


def load_catalog(path):
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, list):
        raise ProtocolError(f"{path}: catalog must be a JSON list of entries")
    return data
