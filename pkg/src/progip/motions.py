"""Parametric motion scripts for demos, smoke training and fixtures.

Each clip is driven by a handful of shared low-frequency oscillators; every
DOF joint blends them with fixed per-joint gains and axes.  Sharing latent
phases across the body keeps upper- and lower-body motion correlated, the
regime the estimator exploits.
"""

import numpy as np

from .datasets import MotionSequence
from .skeleton import REDUCED_JOINTS, default_skeleton

# amplitude caps (radians) keep joints inside anatomically sane ranges
_AMPLITUDE = {
    "Pelvis": 0.45,
    "Spine1": 0.18, "Spine2": 0.18, "Spine3": 0.15,
    "Neck": 0.25, "L_Collar": 0.12, "R_Collar": 0.12,
    "Head": 0.3,
    "L_Shoulder": 0.55, "R_Shoulder": 0.55,
    "L_Elbow": 0.9, "R_Elbow": 0.9,
    "L_Hip": 0.5, "R_Hip": 0.5,
    "L_Knee": 0.7, "R_Knee": 0.7,
}

_N_OSCILLATORS = 4


def scripted_motion(n_frames, framerate=60.0, seed=0, intensity=1.0,
                    subject="synthetic", label="scripted"):
    """Deterministic smooth full-body motion clip.

    Returns a MotionSequence of n_frames at the given framerate; different
    seeds give different clips from the same family.
    """
    rng = np.random.default_rng(seed)
    skel = default_skeleton()
    t = np.arange(n_frames) / framerate

    freqs = rng.uniform(0.25, 1.1, size=_N_OSCILLATORS)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=_N_OSCILLATORS)
    latents = np.sin(2.0 * np.pi * freqs * t[:, None] + phases)  # (T, K)

    poses = np.zeros((n_frames, 24, 3), dtype=np.float64)
    for name in REDUCED_JOINTS:
        j = skel.index[name]
        gains = rng.normal(size=_N_OSCILLATORS)
        gains /= np.abs(gains).sum()
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = (latents @ gains) * _AMPLITUDE[name] * intensity
        poses[:, j] = angle[:, None] * axis

    return MotionSequence(
        poses=poses.astype(np.float32),
        framerate=framerate,
        subject=subject,
        label=label,
    )


def still_pose(n_frames, framerate=60.0, pose=None):
    """A motionless clip (rest pose unless an axis-angle frame is given)."""
    frame = np.zeros((24, 3), dtype=np.float32) if pose is None else np.asarray(pose, dtype=np.float32)
    poses = np.broadcast_to(frame, (n_frames, 24, 3)).copy()
    return MotionSequence(poses=poses, framerate=framerate, subject="synthetic", label="still")
