"""Writer for the canonical motion directory format.

Mirrors the consumer's documented schema: meta.json plus little-endian
float32 blobs, poses as [frame][joint][3] axis-angle with 24 joints.
"""

import json
import os

import numpy as np

N_JOINTS = 24
N_SENSORS = 3
FORMAT_VERSION = 1


def write_sequence(path, poses, framerate, subject="", label="",
                   imu_acc=None, imu_rot=None, extra_meta=None):
    """Write one canonical sequence directory; returns its meta dict."""
    poses = np.ascontiguousarray(poses, dtype="<f4")
    if poses.ndim != 3 or poses.shape[1:] != (N_JOINTS, 3):
        raise ValueError(f"poses must be (F, 24, 3), got {poses.shape}")
    has_imu = imu_acc is not None
    os.makedirs(path, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "framerate": float(framerate),
        "n_frames": int(len(poses)),
        "n_joints": N_JOINTS,
        "subject": subject,
        "label": label,
        "has_imu": bool(has_imu),
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(path, "meta.json"), "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=1)
    poses.tofile(os.path.join(path, "poses.f32"))
    if has_imu:
        acc = np.ascontiguousarray(imu_acc, dtype="<f4")
        rot = np.ascontiguousarray(imu_rot, dtype="<f4")
        if acc.shape != (len(poses), N_SENSORS, 3) or rot.shape != (len(poses), N_SENSORS, 3, 3):
            raise ValueError("IMU channels must be (F, 3, 3) and (F, 3, 3, 3)")
        acc.tofile(os.path.join(path, "imu_acc.f32"))
        rot.tofile(os.path.join(path, "imu_rot.f32"))
    return meta


def read_blob(path, shape):
    data = np.fromfile(path, dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: unexpected blob size")
    return data.reshape(shape)


def write_catalog(out_dir, entries):
    with open(os.path.join(out_dir, "catalog.json"), "w", encoding="utf-8") as f:
        json.dump(entries, f, indent=1)
