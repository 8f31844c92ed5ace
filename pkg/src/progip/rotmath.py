"""Rotation algebra: matrices, 6D representation, angular velocity, angular error.

Conventions used throughout the package:

  * rotation matrices are (..., 3, 3) arrays that act on column vectors,
    i.e. ``world = R @ local``;
  * the 6D representation of a rotation is the first two *columns* of its
    matrix, concatenated column-major into a (..., 6) array;
  * axis-angle vectors are (..., 3) arrays, angle in radians times the unit
    axis.

All functions accept arbitrary leading batch dimensions and work in the dtype
of their input (float64 recommended for anything that feeds a metric).
"""

import numpy as np

from .errors import DegenerateInput

_EPS_DEGENERATE = 1e-8


def validate_rotation(r, tol=1e-6):
    """Raise ValueError unless ``r`` is orthonormal with determinant +1."""
    r = np.asarray(r)
    if r.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) matrix, got {r.shape}")
    eye = np.eye(3, dtype=r.dtype)
    ortho = np.abs(np.swapaxes(r, -1, -2) @ r - eye).max()
    if ortho > tol:
        raise ValueError(f"matrix is not orthonormal (residual {ortho:.3g})")
    det = np.linalg.det(r)
    if np.abs(det - 1.0).max() > tol:
        raise ValueError("matrix does not have determinant +1")


def rot_to_6d(r):
    """Drop the last column of a rotation matrix.

    (..., 3, 3) -> (..., 6), laid out as [col0, col1].
    """
    r = np.asarray(r)
    return np.concatenate([r[..., :, 0], r[..., :, 1]], axis=-1)


def six_d_to_rot(v):
    """Decode a 6D rotation vector by Gram-Schmidt orthonormalization.

    (..., 6) -> (..., 3, 3).  The first 3 components anchor column 0; the
    second 3 are orthogonalized against it to give column 1; column 2 is
    their cross product.

    Raises DegenerateInput when the first segment is (near) zero or the two
    segments are (near) parallel; degenerate values indicate upstream bugs
    rather than data worth rescuing.
    """
    v = np.asarray(v, dtype=np.float64) if np.asarray(v).dtype.kind != "f" else np.asarray(v)
    if v.shape[-1] != 6:
        raise ValueError(f"expected (..., 6), got {v.shape}")
    a = v[..., 0:3]
    b = v[..., 3:6]
    na = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(na < _EPS_DEGENERATE):
        raise DegenerateInput("first 6D segment has (near) zero norm")
    c0 = a / na
    b_perp = b - np.sum(b * c0, axis=-1, keepdims=True) * c0
    nb = np.linalg.norm(b_perp, axis=-1, keepdims=True)
    if np.any(nb < _EPS_DEGENERATE):
        raise DegenerateInput("second 6D segment is (near) parallel to the first")
    c1 = b_perp / nb
    c2 = np.cross(c0, c1)
    return np.stack([c0, c1, c2], axis=-1)


def angular_velocity(r_prev, r_cur):
    """Relative rotation carrying frame t-1 onto frame t: r_prev^T @ r_cur."""
    r_prev = np.asarray(r_prev)
    r_cur = np.asarray(r_cur)
    return np.swapaxes(r_prev, -1, -2) @ r_cur


def geodesic_angle_deg(r1, r2):
    """Geodesic angle between two rotations, in degrees within [0, 180]."""
    r1 = np.asarray(r1)
    r2 = np.asarray(r2)
    rel = np.swapaxes(r1, -1, -2) @ r2
    tr = np.trace(rel, axis1=-2, axis2=-1)
    cos = np.clip((tr - 1.0) / 2.0, -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def axis_angle_to_rot(aa):
    """Rodrigues formula, (..., 3) -> (..., 3, 3).  Zero vector gives identity.

    Uses the sinc-style expansion so gradients of downstream checks stay
    smooth through the zero-angle point.
    """
    aa = np.asarray(aa, dtype=np.float64) if np.asarray(aa).dtype.kind != "f" else np.asarray(aa)
    if aa.shape[-1] != 3:
        raise ValueError(f"expected (..., 3), got {aa.shape}")
    theta = np.linalg.norm(aa, axis=-1)[..., None, None]
    kx, ky, kz = aa[..., 0], aa[..., 1], aa[..., 2]
    zeros = np.zeros_like(kx)
    k_hat = np.stack(
        [
            np.stack([zeros, -kz, ky], axis=-1),
            np.stack([kz, zeros, -kx], axis=-1),
            np.stack([-ky, kx, zeros], axis=-1),
        ],
        axis=-2,
    )
    # sin(t)/t and (1-cos(t))/t^2 with series fallbacks near zero
    small = theta < 1e-8
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(small, 1.0 - theta**2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
        c = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(theta)) / np.where(small, 1.0, theta**2))
    eye = np.broadcast_to(np.eye(3, dtype=aa.dtype), k_hat.shape)
    return eye + s * k_hat + c * (k_hat @ k_hat)


def _rot_to_quat(r):
    """Matrix -> unit quaternion (w, x, y, z), picking the numerically largest
    component per sample so the conversion is stable for every rotation."""
    r = np.asarray(r, dtype=np.float64)
    m00, m01, m02 = r[..., 0, 0], r[..., 0, 1], r[..., 0, 2]
    m10, m11, m12 = r[..., 1, 0], r[..., 1, 1], r[..., 1, 2]
    m20, m21, m22 = r[..., 2, 0], r[..., 2, 1], r[..., 2, 2]

    # squared quaternion components, up to common normalization
    qw2 = np.clip(1.0 + m00 + m11 + m22, 0.0, None)
    qx2 = np.clip(1.0 + m00 - m11 - m22, 0.0, None)
    qy2 = np.clip(1.0 - m00 + m11 - m22, 0.0, None)
    qz2 = np.clip(1.0 - m00 - m11 + m22, 0.0, None)

    cand = []
    sw = np.sqrt(qw2) * 2.0
    cand.append(np.stack([sw / 4.0 * sw, m21 - m12, m02 - m20, m10 - m01], axis=-1) / np.where(sw == 0, 1.0, sw)[..., None])
    sx = np.sqrt(qx2) * 2.0
    cand.append(np.stack([m21 - m12, sx / 4.0 * sx, m01 + m10, m02 + m20], axis=-1) / np.where(sx == 0, 1.0, sx)[..., None])
    sy = np.sqrt(qy2) * 2.0
    cand.append(np.stack([m02 - m20, m01 + m10, sy / 4.0 * sy, m12 + m21], axis=-1) / np.where(sy == 0, 1.0, sy)[..., None])
    sz = np.sqrt(qz2) * 2.0
    cand.append(np.stack([m10 - m01, m02 + m20, m12 + m21, sz / 4.0 * sz], axis=-1) / np.where(sz == 0, 1.0, sz)[..., None])

    choice = np.argmax(np.stack([qw2, qx2, qy2, qz2], axis=-1), axis=-1)
    q = np.choose(choice[..., None], cand)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return q


def rot_to_axis_angle(r):
    """Matrix log map, (..., 3, 3) -> (..., 3), principal branch (angle <= pi).

    Inverse of axis_angle_to_rot for inputs within the principal range.
    """
    q = _rot_to_quat(r)
    # w >= 0 selects the representative with angle <= pi
    q = np.where(q[..., 0:1] < 0, -q, q)
    w = q[..., 0]
    vec = q[..., 1:4]
    n = np.linalg.norm(vec, axis=-1)
    small = n < 1e-9
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(
            small,
            2.0 / np.where(w == 0, 1.0, w),
            2.0 * np.arctan2(n, w) / np.where(small, 1.0, n),
        )
    return vec * scale[..., None]
