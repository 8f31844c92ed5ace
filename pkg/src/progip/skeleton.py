"""SMPL-topology kinematic tree: forward kinematics, reduced/full pose
conversion, and the four-region partition by kinematic-chain depth.

Poses come in two layouts:

  * full pose  -- (..., 24, 3, 3) local rotation matrices, one per joint;
    the pelvis entry is the *global* orientation, every other entry is
    relative to its parent.  Joints without rotational freedom (wrists,
    hands, ankles, feet) carry the identity.
  * reduced pose -- (..., 96) = 16 joints x 6D rotation in the canonical
    order REDUCED_JOINTS (pelvis first, then trunk / transition / upper /
    lower regions).

Root translation is not estimated anywhere in this package, so forward
kinematics pins the pelvis at the origin.
"""

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import rotmath
from .errors import InvalidPrefix

JOINT_COUNT = 24

# joints that carry rotational degrees of freedom, by region of increasing
# kinematic-chain depth; wrists/hands/ankles/feet get no DOF
REGIONS = {
    "d1": ("Pelvis", "Spine1", "Spine2", "Spine3"),
    "d2": ("Neck", "L_Collar", "R_Collar"),
    "d3": ("Head", "L_Shoulder", "R_Shoulder", "L_Elbow", "R_Elbow"),
    "d4": ("L_Hip", "R_Hip", "L_Knee", "R_Knee"),
}
REGION_ORDER = ("d1", "d2", "d3", "d4")

# canonical joint order of the reduced (96-dim) pose vector
REDUCED_JOINTS = (
    "Pelvis", "Spine1", "Spine2", "Spine3",
    "Neck", "L_Collar", "R_Collar",
    "Head", "L_Shoulder", "R_Shoulder", "L_Elbow", "R_Elbow",
    "L_Hip", "R_Hip", "L_Knee", "R_Knee",
)
REDUCED_DIM = len(REDUCED_JOINTS) * 6

NO_DOF_JOINTS = ("L_Ankle", "R_Ankle", "L_Foot", "R_Foot",
                 "L_Wrist", "R_Wrist", "L_Hand", "R_Hand")

# rotation-provider sets accepted by subchain_fk, keyed by stage; pelvis is
# implied and passed separately
STAGE_PREFIX_JOINTS = {
    1: REDUCED_JOINTS[1:4],
    2: REDUCED_JOINTS[1:7],
    3: REDUCED_JOINTS[1:12],
    4: REDUCED_JOINTS[12:16],
}


def region_of(name):
    """Region label of a joint: 'd1'..'d4', or 'none' for no-DOF joints."""
    for label, joints in REGIONS.items():
        if name in joints:
            return label
    return "none"


@dataclass(frozen=True)
class SkeletonModel:
    """Immutable 24-joint tree: names, parent indices and rest offsets (m)."""

    names: tuple
    parents: np.ndarray
    rest_offsets: np.ndarray
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=np.int64)
        offsets = np.asarray(self.rest_offsets, dtype=np.float64)
        if len(self.names) != JOINT_COUNT or parents.shape != (JOINT_COUNT,):
            raise ValueError("skeleton must have exactly 24 joints")
        if offsets.shape != (JOINT_COUNT, 3) or not np.isfinite(offsets).all():
            raise ValueError("rest offsets must be a finite (24, 3) array")
        roots = np.nonzero(parents < 0)[0]
        if len(roots) != 1 or roots[0] != 0 or self.names[0] != "Pelvis":
            raise ValueError("pelvis must be the single root at index 0")
        if not np.all(parents[1:] < np.arange(1, JOINT_COUNT)):
            raise ValueError("parents must precede children (topological order)")
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "rest_offsets", offsets)
        object.__setattr__(self, "index", {n: i for i, n in enumerate(self.names)})

    @classmethod
    def from_asset(cls, path):
        """Load from a skeleton asset file (JSON: names / parents / offsets)."""
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return cls(tuple(data["names"]), data["parents"], data["offsets"])

    @classmethod
    def default(cls):
        """The bundled SMPL-topology skeleton with mean-shape rest offsets."""
        with resources.files("progip.assets").joinpath("smpl_skeleton.json").open("r") as f:
            data = json.load(f)
        return cls(tuple(data["names"]), data["parents"], data["offsets"])

    def joint_indices(self, names):
        return np.array([self.index[n] for n in names], dtype=np.int64)

    def bone_lengths(self):
        return np.linalg.norm(self.rest_offsets, axis=-1)


_DEFAULT = None


def default_skeleton():
    """Shared instance of the bundled skeleton (immutable, safe to cache)."""
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = SkeletonModel.default()
    return _DEFAULT


def default_asset_path():
    return str(resources.files("progip.assets").joinpath("smpl_skeleton.json"))


def asset_sha256(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def forward_kinematics(skel, local_rot):
    """Compose local rotations along the tree.

    local_rot: (..., 24, 3, 3) full pose.
    Returns (positions (..., 24, 3), global_rot (..., 24, 3, 3)) with the
    pelvis pinned at the origin.  Arbitrary leading batch dimensions are
    supported; frames of a sequence batch naturally.
    """
    local_rot = np.asarray(local_rot)
    if local_rot.shape[-3:] != (JOINT_COUNT, 3, 3):
        raise ValueError(f"expected (..., 24, 3, 3), got {local_rot.shape}")
    lead = local_rot.shape[:-3]
    glob = [None] * JOINT_COUNT
    pos = [None] * JOINT_COUNT
    glob[0] = local_rot[..., 0, :, :]
    pos[0] = np.zeros(lead + (3,), dtype=local_rot.dtype)
    for j in range(1, JOINT_COUNT):
        p = skel.parents[j]
        glob[j] = glob[p] @ local_rot[..., j, :, :]
        step = glob[p] @ skel.rest_offsets[j].astype(local_rot.dtype)[..., None]
        pos[j] = pos[p] + step[..., 0]
    return np.stack(pos, axis=-2), np.stack(glob, axis=-3)


def expand_reduced(reduced, skel=None):
    """Decode a (..., 96) reduced pose into a (..., 24, 3, 3) full pose.

    The 8 no-DOF joints are set to the identity.  Propagates DegenerateInput
    from the 6D decoder.
    """
    skel = skel or default_skeleton()
    reduced = np.asarray(reduced)
    if reduced.shape[-1] != REDUCED_DIM:
        raise ValueError(f"expected (..., {REDUCED_DIM}), got {reduced.shape}")
    lead = reduced.shape[:-1]
    rots = rotmath.six_d_to_rot(reduced.reshape(lead + (16, 6)))
    full = np.broadcast_to(np.eye(3, dtype=rots.dtype), lead + (JOINT_COUNT, 3, 3)).copy()
    full[..., skel.joint_indices(REDUCED_JOINTS), :, :] = rots
    return full


def reduce_full(local_rot, skel=None):
    """Encode a (..., 24, 3, 3) full pose as a (..., 96) reduced pose."""
    skel = skel or default_skeleton()
    local_rot = np.asarray(local_rot)
    if local_rot.shape[-3:] != (JOINT_COUNT, 3, 3):
        raise ValueError(f"expected (..., 24, 3, 3), got {local_rot.shape}")
    picked = local_rot[..., skel.joint_indices(REDUCED_JOINTS), :, :]
    return rotmath.rot_to_6d(picked).reshape(local_rot.shape[:-3] + (REDUCED_DIM,))


def subchain_fk(skel, joint_names, rotations, pelvis_rot):
    """Positions of a depth-prefix of the chain, remaining joints identity.

    joint_names must equal one of the four stage sets (STAGE_PREFIX_JOINTS;
    pelvis excluded, it is supplied separately).  rotations is
    (..., len(joint_names), 3, 3) local rotations in the given name order and
    pelvis_rot is the (..., 3, 3) global pelvis orientation.

    Returns positions (..., 1 + len(joint_names), 3) for the pelvis followed
    by the named joints, identical to full forward kinematics restricted to
    those joints.
    """
    names = tuple(joint_names)
    if set(names) not in [set(v) for v in STAGE_PREFIX_JOINTS.values()]:
        raise InvalidPrefix(f"{names} is not a kinematic-chain stage set")
    rotations = np.asarray(rotations)
    pelvis_rot = np.asarray(pelvis_rot)
    lead = rotations.shape[:-3]
    full = np.broadcast_to(np.eye(3, dtype=rotations.dtype), lead + (JOINT_COUNT, 3, 3)).copy()
    full[..., 0, :, :] = pelvis_rot
    full[..., skel.joint_indices(names), :, :] = rotations
    positions, _ = forward_kinematics(skel, full)
    covered = skel.joint_indices(("Pelvis",) + names)
    return positions[..., covered, :]
