"""Readers for the three supported archive styles.

Every reader yields (name, record) pairs where record is a dict with keys
poses (F, 24, 3) float axis-angle, framerate (float or None), and optional
imu_acc (F, 3, 3) / imu_rot (F, 3, 3, 3).  Frames are never reordered and
never resampled here; pose arrays wider than 24 joints are truncated.
"""

import os

import numpy as np

from .errors import CorruptArchive, UnsupportedSource

N_JOINTS = 24


def _pose_array(raw, origin):
    poses = np.asarray(raw, dtype=np.float64)
    if poses.ndim != 2 or poses.shape[1] < N_JOINTS * 3:
        raise CorruptArchive(f"{origin}: poses must be (F, >=72), got {poses.shape}")
    return poses[:, : N_JOINTS * 3].reshape(-1, N_JOINTS, 3)


def _npz_files(source, origin_kind):
    if os.path.isfile(source):
        files = [source]
    elif os.path.isdir(source):
        files = sorted(
            os.path.join(source, f) for f in os.listdir(source) if f.endswith(".npz")
        )
    else:
        raise UnsupportedSource(f"{source}: no such file or directory")
    if not files or not all(f.endswith(".npz") for f in files):
        raise UnsupportedSource(f"{source}: {origin_kind} sources must be .npz containers")
    return files


def read_amass(source):
    """AMASS-style containers: poses + a recorded mocap framerate."""
    for path in _npz_files(source, "amass"):
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            with np.load(path, allow_pickle=False) as data:
                if "poses" not in data:
                    raise CorruptArchive(f"{path}: missing 'poses' array")
                poses = _pose_array(data["poses"], path)
                rate = None
                for key in ("mocap_framerate", "mocap_frame_rate", "framerate"):
                    if key in data:
                        rate = float(np.asarray(data[key]).reshape(-1)[0])
                        break
        except (OSError, ValueError) as e:
            raise CorruptArchive(f"{path}: {e}") from e
        if not np.isfinite(poses).all():
            raise CorruptArchive(f"{path}: non-finite pose values")
        yield name, {"poses": poses, "framerate": rate}


def _fill_nan_nearest(arr):
    """Replace NaN frames with the nearest finite frame (sensor dropouts)."""
    flat = arr.reshape(len(arr), -1)
    bad = ~np.isfinite(flat).all(axis=1)
    if not bad.any():
        return arr, 0
    good_idx = np.nonzero(~bad)[0]
    if len(good_idx) == 0:
        raise CorruptArchive("every frame is NaN")
    nearest = good_idx[np.argmin(np.abs(np.arange(len(arr))[:, None] - good_idx[None, :]), axis=1)]
    filled = arr.copy()
    filled[bad] = arr[nearest[bad]]
    return filled, int(bad.sum())


def read_dip(source):
    """DIP-style containers: poses plus measured IMU channels (may hold NaNs)."""
    for path in _npz_files(source, "dip"):
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            with np.load(path, allow_pickle=False) as data:
                for key in ("poses", "imu_acc", "imu_ori"):
                    if key not in data:
                        raise CorruptArchive(f"{path}: missing '{key}' array")
                poses = _pose_array(data["poses"], path)
                acc = np.asarray(data["imu_acc"], dtype=np.float64)
                ori = np.asarray(data["imu_ori"], dtype=np.float64)
                rate = float(np.asarray(data["framerate"]).reshape(-1)[0]) if "framerate" in data else None
        except (OSError, ValueError) as e:
            raise CorruptArchive(f"{path}: {e}") from e
        if acc.shape != (len(poses), 3, 3) or ori.shape != (len(poses), 3, 3, 3):
            raise CorruptArchive(f"{path}: IMU channels misshaped ({acc.shape}, {ori.shape})")
        if not np.isfinite(poses).all():
            raise CorruptArchive(f"{path}: non-finite pose values")
        acc, n_acc = _fill_nan_nearest(acc)
        ori, n_ori = _fill_nan_nearest(ori)
        yield name, {
            "poses": poses,
            "framerate": rate,
            "imu_acc": acc,
            "imu_rot": ori,
            "gap_filled_frames": max(n_acc, n_ori),
        }


def read_totalcapture(source):
    """TotalCapture-style text: 'framerate H' header then 72 floats per frame.

    A sibling '<name>_imu.txt' sidecar, when present, carries 36 floats per
    frame: per sensor 3 acceleration values then a row-major 3x3 rotation.
    """
    if os.path.isfile(source):
        files = [source]
    elif os.path.isdir(source):
        files = sorted(
            os.path.join(source, f) for f in os.listdir(source)
            if f.endswith(".txt") and not f.endswith("_imu.txt")
        )
    else:
        raise UnsupportedSource(f"{source}: no such file or directory")
    if not files or not all(f.endswith(".txt") for f in files):
        raise UnsupportedSource(f"{source}: totalcapture sources are .txt files")

    for path in files:
        name = os.path.splitext(os.path.basename(path))[0]
        with open(path, "r", encoding="utf-8") as f:
            lines = [l.strip() for l in f if l.strip()]
        if not lines or not lines[0].startswith("framerate"):
            raise CorruptArchive(f"{path}: missing 'framerate <hz>' header")
        try:
            rate = float(lines[0].split()[1])
            rows = [np.array([float(x) for x in line.split()]) for line in lines[1:]]
        except (IndexError, ValueError) as e:
            raise CorruptArchive(f"{path}: {e}") from e
        if not rows or any(len(r) != N_JOINTS * 3 for r in rows):
            raise CorruptArchive(f"{path}: expected {N_JOINTS * 3} floats per frame")
        record = {"poses": np.stack(rows).reshape(-1, N_JOINTS, 3), "framerate": rate}

        imu_path = os.path.join(os.path.dirname(path), f"{name}_imu.txt")
        if os.path.isfile(imu_path):
            with open(imu_path, "r", encoding="utf-8") as f:
                imu_rows = [np.array([float(x) for x in l.split()]) for l in f if l.strip()]
            if len(imu_rows) != len(record["poses"]) or any(len(r) != 36 for r in imu_rows):
                raise CorruptArchive(f"{imu_path}: expected 36 floats per frame, frame-aligned")
            block = np.stack(imu_rows).reshape(-1, 3, 12)
            record["imu_acc"] = block[:, :, :3]
            record["imu_rot"] = block[:, :, 3:].reshape(-1, 3, 3, 3)
        yield name, record


READERS = {"amass": read_amass, "dip": read_dip, "totalcapture": read_totalcapture}
