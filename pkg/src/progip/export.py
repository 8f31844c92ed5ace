"""Pose-stream export: JSONL (one pose per line) and BVH.

JSONL lines carry {"frame", "time_s", "axis_angle": 24 x 3}; BVH files
rebuild the joint hierarchy from the skeleton asset and write per-frame
Euler channels (Z X Y order, degrees) with the root pinned at the origin.
"""

import json

import numpy as np

from . import rotmath
from .errors import IoError


def _euler_zxy_deg(r):
    """Intrinsic Z-X-Y Euler angles (degrees) of rotation matrices (..., 3, 3)."""
    r = np.asarray(r, dtype=np.float64)
    sa = np.clip(r[..., 2, 1], -1.0, 1.0)
    alpha = np.arcsin(sa)  # about x
    locked = np.abs(sa) > 1.0 - 1e-9
    beta = np.where(locked, 0.0, np.arctan2(-r[..., 2, 0], r[..., 2, 2]))  # about y
    gamma = np.where(
        locked,
        np.arctan2(r[..., 0, 2], r[..., 0, 0]),
        np.arctan2(-r[..., 0, 1], r[..., 1, 1]),
    )  # about z
    return np.degrees(np.stack([gamma, alpha, beta], axis=-1))


def export_jsonl(poses, path, framerate=60.0, frame_offset=0):
    """Write (T, 24, 3, 3) full poses as JSON lines."""
    poses = np.asarray(poses)
    if len(poses) == 0:
        raise IoError("refusing to export an empty pose stream")
    aa = rotmath.rot_to_axis_angle(poses)
    with open(path, "w", encoding="utf-8") as f:
        for i, frame in enumerate(aa):
            record = {
                "frame": int(frame_offset + i),
                "time_s": (frame_offset + i) / framerate,
                "axis_angle": [[float(x) for x in row] for row in frame],
            }
            f.write(json.dumps(record) + "\n")


def load_jsonl(path):
    """Read a JSONL pose stream back to (frames, (T, 24, 3, 3))."""
    frames = []
    poses = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            frames.append(int(record["frame"]))
            poses.append(record["axis_angle"])
    if not poses:
        raise IoError(f"{path}: no pose records")
    return np.asarray(frames), rotmath.axis_angle_to_rot(np.asarray(poses, dtype=np.float64))


def export_bvh(poses, skel, path, framerate=60.0):
    """Write (T, 24, 3, 3) full poses as a BVH animation."""
    poses = np.asarray(poses)
    if len(poses) == 0:
        raise IoError("refusing to export an empty pose stream")

    children = {j: [] for j in range(24)}
    for j in range(1, 24):
        children[skel.parents[j]].append(j)
    order = []

    def hierarchy(j, depth):
        pad = "  " * depth
        name = skel.names[j]
        off = skel.rest_offsets[j]
        lines = []
        if j == 0:
            lines.append(f"ROOT {name}")
        else:
            lines.append(f"{pad}JOINT {name}")
        lines.append(f"{pad}{{")
        lines.append(f"{pad}  OFFSET {off[0]:.6f} {off[1]:.6f} {off[2]:.6f}")
        if j == 0:
            lines.append(f"{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation")
        else:
            lines.append(f"{pad}  CHANNELS 3 Zrotation Xrotation Yrotation")
        order.append(j)
        if children[j]:
            for c in children[j]:
                lines.extend(hierarchy(c, depth + 1))
        else:
            tip = off * 0.4 if np.linalg.norm(off) > 0 else np.array([0.0, 0.01, 0.0])
            lines.append(f"{pad}  End Site")
            lines.append(f"{pad}  {{")
            lines.append(f"{pad}    OFFSET {tip[0]:.6f} {tip[1]:.6f} {tip[2]:.6f}")
            lines.append(f"{pad}  }}")
        lines.append(f"{pad}}}")
        return lines

    header = ["HIERARCHY"] + hierarchy(0, 0)
    euler = _euler_zxy_deg(poses)  # (T, 24, 3)
    body = ["MOTION", f"Frames: {len(poses)}", f"Frame Time: {1.0 / framerate:.8f}"]
    for t in range(len(poses)):
        values = ["0.000000", "0.000000", "0.000000"]
        for j in order:
            values.extend(f"{v:.6f}" for v in euler[t, j])
        body.append(" ".join(values))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(header + body) + "\n")


def export_poses(poses, path, fmt="jsonl", skel=None, framerate=60.0):
    """Dispatch on format; raises IoError for empty streams."""
    if fmt == "jsonl":
        export_jsonl(poses, path, framerate=framerate)
    elif fmt == "bvh":
        if skel is None:
            raise ValueError("BVH export needs a skeleton")
        export_bvh(poses, skel, path, framerate=framerate)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
