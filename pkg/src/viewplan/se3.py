"""Rigid-body poses, camera-local pose deltas, and trajectory interpolation.

Conventions used throughout the package:

* A ``Pose`` stores a world-frame position (meters) and a unit quaternion
  ``(w, x, y, z)`` giving the world-from-camera rotation.  The camera frame
  has +z along the optical axis, +x to the right and +y down in the image.
* A ``PoseDelta`` is a 6-DoF motion expressed in the camera's local frame:
  translation ``(tx, ty, tz)`` in meters and rotation ``(roll, pitch, yaw)``
  in radians.  The delta rotation matrix is ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``
  (ZYX Tait-Bryan), and every angle lives in ``(-pi, pi]``.
* Quaternions are renormalized after every composition and canonicalized to
  ``w >= 0`` so equal rotations have equal representations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_QUAT_EPS = 1e-12


def wrap_angle(a: float) -> float:
    """Wrap an angle into ``(-pi, pi]``; in-range values pass through untouched."""
    if -math.pi < a <= math.pi:
        return a
    a = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if a == -math.pi else a


def _as_vec(x, n: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64).reshape(-1)
    if v.shape != (n,):
        raise ValueError(f"{name} must have {n} components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite, got {v}")
    return v


# ---------------------------------------------------------------------------
# quaternion helpers (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Return the unit quaternion with canonical sign (w >= 0)."""
    q = np.asarray(q, dtype=np.float64)
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n < _QUAT_EPS:
        raise ValueError("zero-norm quaternion")
    if abs(n - 1.0) > 1e-12:  # skipping a no-op division keeps stored bits stable
        q = q / n
    if q[0] < 0.0:
        q = -q
    elif q[0] == 0.0:
        # w == 0 leaves the sign ambiguous; pin it by the first nonzero entry.
        for c in q[1:]:
            if c != 0.0:
                if c < 0.0:
                    q = -q
                break
    return q


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array(
        [
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a canonical unit quaternion (Shepperd)."""
    m = np.asarray(m, dtype=np.float64)
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector ``v`` by quaternion ``q``."""
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64)


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_angle(qa: np.ndarray, qb: np.ndarray) -> float:
    """Geodesic angle in radians between two unit quaternions, in [0, pi].

    Uses atan2 of the relative quaternion, which stays accurate near zero
    where acos of the dot product loses half the significant digits.
    """
    if np.array_equal(qa, qb) or np.array_equal(qa, -qb):
        return 0.0
    r = quat_mul(quat_conj(qa), qb)
    v = math.sqrt(r[1] * r[1] + r[2] * r[2] + r[3] * r[3])
    return 2.0 * math.atan2(v, abs(r[0]))


def quat_distance(qa: np.ndarray, qb: np.ndarray) -> float:
    """Sign-insensitive max component distance; float-friendly near zero."""
    return float(min(np.max(np.abs(qa - qb)), np.max(np.abs(qa + qb))))


# ---------------------------------------------------------------------------
# roll/pitch/yaw <-> rotation matrix, R = Rz(yaw) @ Ry(pitch) @ Rx(roll)
# ---------------------------------------------------------------------------

def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def matrix_to_rpy(m: np.ndarray) -> tuple[float, float, float]:
    """Extract (roll, pitch, yaw) with roll := 0 at the |pitch| = pi/2 singularity."""
    sp = -float(m[2, 0])
    sp = max(-1.0, min(1.0, sp))
    pitch = math.asin(sp)
    cp = math.sqrt(max(0.0, 1.0 - sp * sp))
    if cp < 1e-6:
        roll = 0.0
        yaw = math.atan2(-float(m[0, 1]), float(m[1, 1]))
    else:
        roll = math.atan2(float(m[2, 1]), float(m[2, 2]))
        yaw = math.atan2(float(m[1, 0]), float(m[0, 0]))
    return wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw)


def rpy_to_quat(roll: float, pitch: float, yaw: float) -> np.ndarray:
    hr, hp, hy = 0.5 * roll, 0.5 * pitch, 0.5 * yaw
    qx = np.array([math.cos(hr), math.sin(hr), 0.0, 0.0])
    qy = np.array([math.cos(hp), 0.0, math.sin(hp), 0.0])
    qz = np.array([math.cos(hy), 0.0, 0.0, math.sin(hy)])
    return quat_normalize(quat_mul(qz, quat_mul(qy, qx)))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    """World-frame camera pose: position (m) plus world-from-camera quaternion."""

    position: np.ndarray
    quat: np.ndarray

    def __post_init__(self):
        p = _as_vec(self.position, 3, "position")
        q = quat_normalize(_as_vec(self.quat, 4, "quat"))
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "quat", q)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    def optical_axis(self) -> np.ndarray:
        """World direction of the camera +z (look-at) axis."""
        return self.rotation_matrix()[:, 2]

    def to_array(self) -> np.ndarray:
        """(x, y, z, qw, qx, qy, qz) as float64."""
        return np.concatenate([self.position, self.quat])

    @classmethod
    def from_array(cls, a) -> "Pose":
        a = _as_vec(a, 7, "pose array")
        return cls(a[:3], a[3:])

    def allclose(self, other: "Pose", pos_tol: float = 1e-9, rot_tol: float = 1e-9) -> bool:
        return (
            float(np.max(np.abs(self.position - other.position))) <= pos_tol
            and quat_distance(self.quat, other.quat) <= rot_tol
        )


@dataclass(frozen=True)
class PoseDelta:
    """Camera-local 6-DoF motion: translation (m) and (roll, pitch, yaw) (rad)."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = _as_vec(self.translation, 3, "translation")
        r = _as_vec(self.rotation, 3, "rotation")
        r = np.array([wrap_angle(float(a)) for a in r])
        t.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    @classmethod
    def zero(cls) -> "PoseDelta":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, a) -> "PoseDelta":
        a = _as_vec(a, 6, "delta array")
        return cls(a[:3], a[3:])

    def to_array(self) -> np.ndarray:
        """(tx, ty, tz, roll, pitch, yaw) as float64."""
        return np.concatenate([self.translation, self.rotation])

    def rotation_matrix(self) -> np.ndarray:
        return rpy_to_matrix(*self.rotation)

    def rotation_angle(self) -> float:
        """Geodesic magnitude of the rotation part, radians."""
        q = rpy_to_quat(*self.rotation)
        return 2.0 * math.acos(min(1.0, abs(float(q[0]))))


@dataclass(frozen=True)
class Trajectory:
    """Ordered camera poses with strictly increasing timestamps (seconds)."""

    poses: tuple
    timestamps: np.ndarray = field(default=None)

    def __post_init__(self):
        poses = tuple(self.poses)
        if len(poses) < 1:
            raise ValueError("trajectory needs at least one pose")
        if self.timestamps is None:
            ts = np.arange(len(poses), dtype=np.float64)
        else:
            ts = _as_vec(self.timestamps, len(poses), "timestamps")
        if len(poses) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        ts.flags.writeable = False
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return len(self.poses)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def compose(p: Pose, d: PoseDelta) -> Pose:
    """Apply a camera-local motion to a world pose.

    The new position is ``p.position + R(p) @ d.translation`` and the new
    rotation is ``R(p) @ R(d)``; the quaternion is renormalized.
    """
    t = quat_rotate(p.quat, d.translation)
    q = quat_mul(p.quat, rpy_to_quat(*d.rotation))
    return Pose(p.position + t, q)


def delta_between(p_prev: Pose, p_curr: Pose) -> PoseDelta:
    """The camera-local delta d with compose(p_prev, d) == p_curr.

    Rotation is extracted as (roll, pitch, yaw); at the pitch = +-pi/2
    singularity roll is set to 0 and yaw absorbs the remaining rotation.
    """
    r_prev = quat_to_matrix(p_prev.quat)
    t = r_prev.T @ (p_curr.position - p_prev.position)
    r_rel = r_prev.T @ quat_to_matrix(p_curr.quat)
    roll, pitch, yaw = matrix_to_rpy(r_rel)
    return PoseDelta(t, np.array([roll, pitch, yaw]))


def interpolate(p0: Pose, p1: Pose, s: float) -> Pose:
    """Linear position blend plus shortest-arc quaternion slerp, s in [0, 1]."""
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"interpolation parameter must be in [0, 1], got {s}")
    pos = (1.0 - s) * p0.position + s * p1.position
    q0, q1 = p0.quat, p1.quat
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    dot = min(1.0, dot)
    theta = math.acos(dot)
    if theta < 1e-9:
        q = (1.0 - s) * q0 + s * q1
    else:
        st = math.sin(theta)
        q = (math.sin((1.0 - s) * theta) / st) * q0 + (math.sin(s * theta) / st) * q1
    return Pose(pos, q)


def pose_distance(p0: Pose, p1: Pose, w_rot: float) -> float:
    """``||p1 - p0||_2 + w_rot * geodesic_angle``; symmetric, zero iff equal."""
    if w_rot < 0.0:
        raise ValueError("w_rot must be >= 0")
    dp = p1.position - p0.position
    return float(math.sqrt(dp[0] ** 2 + dp[1] ** 2 + dp[2] ** 2) + w_rot * quat_angle(p0.quat, p1.quat))


def look_at(position, target, down_hint=None) -> Pose:
    """Pose at ``position`` whose optical axis points at ``target``.

    The image-down (+y) axis is regularized toward ``down_hint`` (default:
    world -z up, so image up matches world up).  A hint parallel to the view
    direction falls back to world -x.
    """
    position = _as_vec(position, 3, "position")
    target = _as_vec(target, 3, "target")
    z = target - position
    n = float(np.linalg.norm(z))
    if n < 1e-12:
        raise ValueError("look_at target coincides with position")
    z = z / n
    hint = np.array([0.0, 0.0, -1.0]) if down_hint is None else _as_vec(down_hint, 3, "down_hint")
    if abs(float(np.dot(hint, z))) > 0.999:
        hint = np.array([-1.0, 0.0, 0.0])
    x = np.cross(hint, z)
    x = x / float(np.linalg.norm(x))
    y = np.cross(z, x)
    m = np.column_stack([x, y, z])
    return Pose(position, matrix_to_quat(m))


# ---------------------------------------------------------------------------
# wire format: little-endian float32, used verbatim by the demo files
# ---------------------------------------------------------------------------

def pack_pose(p: Pose) -> np.ndarray:
    """7 little-endian float32 values (x, y, z, qw, qx, qy, qz)."""
    return p.to_array().astype("<f4")


def unpack_pose(a) -> Pose:
    return Pose.from_array(np.asarray(a, dtype="<f4").astype(np.float64))


def pack_delta(d: PoseDelta) -> np.ndarray:
    """6 little-endian float32 values (tx, ty, tz, roll, pitch, yaw)."""
    return d.to_array().astype("<f4")


def unpack_delta(a) -> PoseDelta:
    return PoseDelta.from_array(np.asarray(a, dtype="<f4").astype(np.float64))


def quantize_pose(p: Pose) -> Pose:
    """Round a pose to the float32 wire precision.

    Demo producers quantize every trajectory pose before rendering so that
    replaying a stored trajectory reproduces the stored images exactly.
    """
    return unpack_pose(pack_pose(p))
