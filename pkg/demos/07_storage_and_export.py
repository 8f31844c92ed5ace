"""Canonical motion storage, dataset splits, and pose export.

Run: python demos/07_storage_and_export.py
"""

import os
import tempfile

import numpy as np

from progip import datasets, export, skeleton
from progip.motions import scripted_motion

skel = skeleton.default_skeleton()
work = tempfile.mkdtemp(prefix="progip_demo_")

print("== canonical directory round trip ==")
motion = scripted_motion(120, framerate=120.0, seed=7, subject="demo", label="walk")
seq_dir = os.path.join(work, "walk_001")
datasets.save_canonical(motion, seq_dir)
print("wrote:", sorted(os.listdir(seq_dir)))
back = datasets.load_canonical(seq_dir)
print("bit-exact poses:", np.array_equal(back.poses, motion.poses))

print("\n== resampling 120 -> 60 Hz on the rotation manifold ==")
at60 = datasets.resample(back, 60.0)
print(f"{back.n_frames} frames @ {back.framerate:g} Hz -> {at60.n_frames} frames @ {at60.framerate:g} Hz")

print("\n== split protocol ==")
catalog = [
    {"path": "amass/cmu_01", "dataset": "amass", "subset": "CMU"},
    {"path": "amass/he_01", "dataset": "amass", "subset": "HumanEval"},
    {"path": "amass/tr_01", "dataset": "amass", "subset": "Transition"},
    {"path": "dip/s03", "dataset": "dip", "subject": "3"},
    {"path": "dip/s09", "dataset": "dip", "subject": "9"},
    {"path": "dip/s10", "dataset": "dip", "subject": "10"},
    {"path": "tc/s1", "dataset": "totalcapture", "subject": "1"},
]
splits = datasets.build_splits(catalog)
for role in ("train", "val", "test"):
    print(f"  {role:<5} {[e['path'] for e in splits[role]]}")

print("\n== export to JSONL and BVH ==")
poses = at60.local_rotations()[:50]
jsonl_path = os.path.join(work, "poses.jsonl")
bvh_path = os.path.join(work, "poses.bvh")
export.export_jsonl(poses, jsonl_path, framerate=60.0)
export.export_bvh(poses, skel, bvh_path, framerate=60.0)
print("jsonl lines:", sum(1 for _ in open(jsonl_path)))
print("bvh header:", open(bvh_path).readline().strip(), f"({os.path.getsize(bvh_path)} bytes)")
print("\nartifacts in", work)
