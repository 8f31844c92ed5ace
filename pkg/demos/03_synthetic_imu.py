"""From motion to sensor data: synthesize head/wrist IMU measurements.

Sensor rotations are FK global rotations; accelerations come from a central
second difference of the sensor positions.  The 45-dim network input packs,
per sensor: scaled acceleration (3), rotation 6D (6), angular velocity 6D
(6).  Run: python demos/03_synthetic_imu.py
"""

import numpy as np

from progip import skeleton
from progip.imusynth import acc_bias_align, build_input, synthesize_imu
from progip.motions import scripted_motion

skel = skeleton.default_skeleton()
motion = scripted_motion(600, seed=3, label="demo")
print(f"motion: {motion.n_frames} frames at {motion.framerate:g} Hz ({motion.duration_s():.0f} s)")

imu = synthesize_imu(skel, motion)
print("\n== synthesized measurements ==")
print("acc shape", imu.acc.shape, " rot shape", imu.rot.shape)
for s, name in enumerate(("Head", "L_Wrist", "R_Wrist")):
    mag = np.linalg.norm(imu.acc[:, s], axis=-1)
    print(f"  {name:<8} |acc| mean {mag.mean():5.2f} m/s^2   peak {mag.max():5.2f} m/s^2")

print("\n== 45-dim network input ==")
feats = build_input(imu)
print("features shape:", feats.shape)
print("per-sensor layout: [acc/30 (3) | rot 6D (6) | angular velocity 6D (6)]")
print("frame 100, head sensor:", np.round(feats[100, :15], 3))

print("\n== bias alignment (what real data gets) ==")
shifted = imu
shifted.acc += np.array([0.0, 9.81, 0.0])  # pretend gravity was left in
aligned = acc_bias_align(shifted, np.zeros((3, 3)))
print("mean |acc| before alignment:", f"{np.linalg.norm(shifted.acc.mean(axis=0), axis=-1).mean():.3f}")
print("mean |acc| after  alignment:", f"{np.linalg.norm(aligned.acc.mean(axis=0), axis=-1).mean():.3e}")
