"""The 24-joint kinematic tree: forward kinematics and the depth regions.

Joints are grouped into four regions of increasing kinematic-chain depth;
the estimator resolves them in that order.  Run:
python demos/02_skeleton_and_regions.py
"""

import numpy as np

from progip import rotmath, skeleton

skel = skeleton.default_skeleton()

print("== tree ==")
for j, name in enumerate(skel.names):
    parent = "-" if skel.parents[j] < 0 else skel.names[skel.parents[j]]
    region = skeleton.region_of(name)
    print(f"  {j:>2} {name:<11} parent {parent:<11} region {region}")

print("\n== rest pose heights ==")
identity = np.broadcast_to(np.eye(3), (24, 3, 3)).copy()
pos, _ = skeleton.forward_kinematics(skel, identity)
for name in ("Head", "L_Wrist", "R_Wrist", "L_Knee", "L_Ankle"):
    print(f"  {name:<8} at y = {pos[skel.index[name], 1]:+.3f} m")

print("\n== bend an elbow, fingers move ==")
pose = identity.copy()
pose[skel.index["L_Elbow"]] = rotmath.axis_angle_to_rot(np.array([0.0, 0.0, np.pi / 2]))
bent, _ = skeleton.forward_kinematics(skel, pose)
moved = np.linalg.norm(bent - pos, axis=-1)
for name in ("L_Elbow", "L_Wrist", "L_Hand", "R_Hand"):
    print(f"  {name:<8} moved {moved[skel.index[name]] * 100:5.1f} cm")

print("\n== reduced (96-dim) pose round trip ==")
reduced = skeleton.reduce_full(pose)
print("reduced vector length:", reduced.shape[-1])
back = skeleton.expand_reduced(reduced)
print("round-trip error:", np.abs(back - pose).max())

print("\n== partial FK over one region prefix ==")
names = skeleton.STAGE_PREFIX_JOINTS[1]
rots = np.broadcast_to(np.eye(3), (len(names), 3, 3))
chain = skeleton.subchain_fk(skel, names, rots, np.eye(3))
print("spine chain positions (pelvis ->", ", ".join(names) + "):")
print(np.round(chain, 3))
