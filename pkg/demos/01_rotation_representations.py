"""Rotation toolbox tour: 6D representation, angular velocity, angular error.

The networks regress rotations as the first two matrix columns (6 numbers);
decoding re-orthonormalizes with Gram-Schmidt, so any nearby 6-vector still
yields a valid rotation.  Run: python demos/01_rotation_representations.py
"""

import numpy as np

from progip import rotmath

rng = np.random.default_rng(0)

print("== encode / decode ==")
r = rotmath.axis_angle_to_rot(np.array([0.3, -0.5, 0.8]))
v = rotmath.rot_to_6d(r)
print("rotation as 6D:", np.round(v, 4))
back = rotmath.six_d_to_rot(v)
print("round-trip error:", np.abs(back - r).max())

print("\n== decoding is robust to noise ==")
noisy = v + rng.normal(size=6) * 0.05
decoded = rotmath.six_d_to_rot(noisy)
residual = np.abs(decoded.T @ decoded - np.eye(3)).max()
print("orthonormality residual of decoded noisy vector:", f"{residual:.2e}")
print("angle moved by the noise:", f"{rotmath.geodesic_angle_deg(r, decoded):.2f} deg")

print("\n== angular velocity between consecutive frames ==")
r_prev = rotmath.axis_angle_to_rot(np.array([0.0, 0.2, 0.0]))
r_cur = rotmath.axis_angle_to_rot(np.array([0.0, 0.35, 0.0]))
w = rotmath.angular_velocity(r_prev, r_cur)
print("relative step angle:", f"{rotmath.geodesic_angle_deg(np.eye(3), w):.2f} deg")
print("reconstruction r_prev @ w == r_cur:", np.abs(r_prev @ w - r_cur).max() < 1e-12)

print("\n== geodesic angle is a metric ==")
a, b, c = (rotmath.axis_angle_to_rot(rng.normal(size=3)) for _ in range(3))
dab = rotmath.geodesic_angle_deg(a, b)
dbc = rotmath.geodesic_angle_deg(b, c)
dac = rotmath.geodesic_angle_deg(a, c)
print(f"d(a,b)={dab:.1f}  d(b,c)={dbc:.1f}  d(a,c)={dac:.1f}  triangle holds: {dac <= dab + dbc}")
