"""Rotation and rigid-transform primitives.

Conventions used across the package:

* Quaternions are Hamilton, scalar-first ``(w, x, y, z)``, unit norm, and
  stored canonically with ``w >= 0`` (q and -q encode the same rotation).
* ``UnitQuaternion`` maps body coordinates to global coordinates:
  ``v_global = q * v_body * q^-1``.
* Euler angles are intrinsic Z-Y-X (yaw, pitch, roll):
  ``q = qz(yaw) * qy(pitch) * qx(roll)``.
  roll, yaw in (-pi, pi], pitch in [-pi/2, pi/2]. At the pitch singularity
  only roll+/-yaw is observable; the tie-break sets roll := 0.
* ``Pose6`` is a rigid transform (rotation + translation), body to global.

Scalar classes favor clarity; the ``*_arr`` helpers at the bottom operate on
(N, 4)/(N, 3) arrays for hot paths (batch residuals, visibility tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EPS = 1e-12
# Below this rotation angle the exp/log maps switch to series expansions.
_SMALL_ANGLE = 1e-8


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion, Hamilton convention, scalar first, canonical w >= 0.

    Construction normalizes and canonicalizes, so every instance observed
    by callers satisfies ``|q| == 1`` and ``w >= 0``.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if n < _EPS:
            raise ValueError("zero-norm quaternion")
        s = 1.0 / n
        if self.w < 0.0:
            s = -s
        object.__setattr__(self, "w", self.w * s)
        object.__setattr__(self, "x", self.x * s)
        object.__setattr__(self, "y", self.y * s)
        object.__setattr__(self, "z", self.z * s)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "UnitQuaternion":
        ax = np.asarray(axis, dtype=float)
        n = float(np.linalg.norm(ax))
        if n < _EPS:
            raise ValueError("zero-length rotation axis")
        h = 0.5 * angle
        s = math.sin(h) / n
        return UnitQuaternion(math.cos(h), ax[0] * s, ax[1] * s, ax[2] * s)

    @staticmethod
    def from_rotvec(rv) -> "UnitQuaternion":
        """Exponential map: rotation vector (axis * angle) to quaternion."""
        rv = np.asarray(rv, dtype=float)
        angle = float(np.linalg.norm(rv))
        if angle < _SMALL_ANGLE:
            # first-order: cos(a/2) ~ 1, sin(a/2)/a ~ 1/2
            return UnitQuaternion(1.0, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2])
        s = math.sin(0.5 * angle) / angle
        return UnitQuaternion(math.cos(0.5 * angle), rv[0] * s, rv[1] * s, rv[2] * s)

    def to_rotvec(self) -> np.ndarray:
        """Logarithm map. Canonical storage keeps the angle in [0, pi]."""
        vn = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if vn < _SMALL_ANGLE:
            return 2.0 * np.array([self.x, self.y, self.z])
        angle = 2.0 * math.atan2(vn, self.w)
        s = angle / vn
        return np.array([self.x * s, self.y * s, self.z * s])

    def multiply(self, o: "UnitQuaternion") -> "UnitQuaternion":
        """Hamilton product self * o (apply o first, then self)."""
        return UnitQuaternion(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )

    def __matmul__(self, o: "UnitQuaternion") -> "UnitQuaternion":
        return self.multiply(o)

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    inverse = conjugate

    def rotate(self, v) -> np.ndarray:
        """Rotate a 3-vector: R(q) @ v."""
        v = np.asarray(v, dtype=float)
        u = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(u, v)
        return v + self.w * t + np.cross(u, t)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    @staticmethod
    def from_matrix(m) -> "UnitQuaternion":
        """Shepperd-style extraction: branch on the largest diagonal term."""
        m = np.asarray(m, dtype=float)
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0.0:
            s = math.sqrt(tr + 1.0) * 2.0
            return UnitQuaternion(
                0.25 * s,
                (m[2, 1] - m[1, 2]) / s,
                (m[0, 2] - m[2, 0]) / s,
                (m[1, 0] - m[0, 1]) / s,
            )
        if m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            return UnitQuaternion(
                (m[2, 1] - m[1, 2]) / s,
                0.25 * s,
                (m[0, 1] + m[1, 0]) / s,
                (m[0, 2] + m[2, 0]) / s,
            )
        if m[1, 1] > m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            return UnitQuaternion(
                (m[0, 2] - m[2, 0]) / s,
                (m[0, 1] + m[1, 0]) / s,
                0.25 * s,
                (m[1, 2] + m[2, 1]) / s,
            )
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        return UnitQuaternion(
            (m[1, 0] - m[0, 1]) / s,
            (m[0, 2] + m[2, 0]) / s,
            (m[1, 2] + m[2, 1]) / s,
            0.25 * s,
        )

    def angle_to(self, o: "UnitQuaternion") -> float:
        """Geodesic angle between two rotations, in [0, pi].

        atan2 on the relative quaternion stays accurate for tiny angles
        where acos of the dot product loses half the significand.
        """
        rel = self.conjugate().multiply(o)
        vn = math.sqrt(rel.x * rel.x + rel.y * rel.y + rel.z * rel.z)
        return 2.0 * math.atan2(vn, abs(rel.w))

    def scaled(self, factor: float, lerp_threshold: float = math.radians(10.0)) -> "UnitQuaternion":
        """Interpolate identity -> self by ``factor`` in [0, 1].

        Spherical (exact axis-angle scaling) above ``lerp_threshold``,
        normalized linear below, where the two are indistinguishable and
        lerp avoids the small-angle axis instability.
        """
        vn = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        angle = 2.0 * math.atan2(vn, self.w)
        if angle < lerp_threshold or vn < _EPS:
            c = 1.0 - factor
            return UnitQuaternion(
                c + factor * self.w, factor * self.x, factor * self.y, factor * self.z
            )
        s = math.sin(0.5 * angle * factor) / vn
        return UnitQuaternion(
            math.cos(0.5 * angle * factor), self.x * s, self.y * s, self.z * s
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    # Euler bridge -------------------------------------------------------

    def to_euler(self) -> "EulerRpy":
        w, x, y, z = self.w, self.x, self.y, self.z
        sp = 2.0 * (w * y - x * z)
        if sp >= 1.0 - 1e-12:
            # gimbal: pitch +90 deg, roll := 0
            r01 = 2.0 * (x * y - w * z)
            r11 = 1.0 - 2.0 * (x * x + z * z)
            return EulerRpy(0.0, 0.5 * math.pi, math.atan2(-r01, r11))
        if sp <= -1.0 + 1e-12:
            r01 = 2.0 * (x * y - w * z)
            r11 = 1.0 - 2.0 * (x * x + z * z)
            return EulerRpy(0.0, -0.5 * math.pi, math.atan2(-r01, r11))
        roll = math.atan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y))
        pitch = math.asin(sp)
        yaw = math.atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z))
        return EulerRpy(roll, pitch, yaw)


@dataclass(frozen=True)
class EulerRpy:
    """Roll/pitch/yaw, intrinsic Z-Y-X. Radians."""

    roll: float
    pitch: float
    yaw: float

    def to_quat(self) -> UnitQuaternion:
        cr = math.cos(0.5 * self.roll)
        sr = math.sin(0.5 * self.roll)
        cp = math.cos(0.5 * self.pitch)
        sp = math.sin(0.5 * self.pitch)
        cy = math.cos(0.5 * self.yaw)
        sy = math.sin(0.5 * self.yaw)
        return UnitQuaternion(
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, self.yaw])


@dataclass(frozen=True)
class Pose6:
    """Rigid transform: ``p_global = q.rotate(p_body) + t``."""

    position: np.ndarray
    orientation: UnitQuaternion

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))

    @staticmethod
    def identity() -> "Pose6":
        return Pose6(np.zeros(3), UnitQuaternion.identity())

    @staticmethod
    def from_xyz_rpy(x, y, z, roll=0.0, pitch=0.0, yaw=0.0) -> "Pose6":
        return Pose6(np.array([x, y, z], dtype=float), EulerRpy(roll, pitch, yaw).to_quat())

    def compose(self, o: "Pose6") -> "Pose6":
        """self * o: apply o in self's frame."""
        return Pose6(
            self.position + self.orientation.rotate(o.position),
            self.orientation.multiply(o.orientation),
        )

    def inverse(self) -> "Pose6":
        qi = self.orientation.conjugate()
        return Pose6(-qi.rotate(self.position), qi)

    def relative_to(self, o: "Pose6") -> "Pose6":
        """Transform of self expressed in o's frame: o^-1 * self."""
        return o.inverse().compose(self)

    def transform(self, p) -> np.ndarray:
        return self.orientation.rotate(p) + self.position

    def translation_to(self, o: "Pose6") -> float:
        return float(np.linalg.norm(o.position - self.position))

    def rotation_to(self, o: "Pose6") -> float:
        return self.orientation.angle_to(o.orientation)

    # SE(3) exp/log ------------------------------------------------------

    @staticmethod
    def exp(xi) -> "Pose6":
        """xi = (rho[3], phi[3]) -> transform, with the usual V-matrix coupling."""
        xi = np.asarray(xi, dtype=float).reshape(6)
        rho, phi = xi[:3], xi[3:]
        theta = float(np.linalg.norm(phi))
        K = _skew(phi)
        if theta < _SMALL_ANGLE:
            V = np.eye(3) + 0.5 * K + K @ K / 6.0
        else:
            t2 = theta * theta
            V = (
                np.eye(3)
                + ((1.0 - math.cos(theta)) / t2) * K
                + ((theta - math.sin(theta)) / (t2 * theta)) * (K @ K)
            )
        return Pose6(V @ rho, UnitQuaternion.from_rotvec(phi))

    def log(self) -> np.ndarray:
        phi = self.orientation.to_rotvec()
        theta = float(np.linalg.norm(phi))
        K = _skew(phi)
        if theta < _SMALL_ANGLE:
            Vinv = np.eye(3) - 0.5 * K + K @ K / 12.0
        else:
            half = 0.5 * theta
            # V^-1 = I - K/2 + (1/theta^2)(1 - theta*cot(theta/2)/2) K^2
            coef = (1.0 - half * math.cos(half) / math.sin(half)) / (theta * theta)
            Vinv = np.eye(3) - 0.5 * K + coef * (K @ K)
        return np.concatenate([Vinv @ self.position, phi])


def _skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


# --------------------------------------------------------------------------
# Batched helpers: quaternion arrays are (N, 4) scalar-first, vectors (N, 3).
# No canonicalization here; callers normalize where it matters.
# --------------------------------------------------------------------------


def quat_mul_arr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj_arr(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def quat_rotate_arr(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    u = q[..., 1:]
    w = q[..., 0:1]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def quat_log_arr(q: np.ndarray) -> np.ndarray:
    """Rotation vectors for an array of quaternions (sign-canonicalized)."""
    q = np.where(q[..., 0:1] < 0.0, -q, q)
    vn = np.linalg.norm(q[..., 1:], axis=-1)
    angle = 2.0 * np.arctan2(vn, q[..., 0])
    scale = np.where(vn < _SMALL_ANGLE, 2.0, angle / np.where(vn < _SMALL_ANGLE, 1.0, vn))
    return q[..., 1:] * scale[..., None]


def quat_exp_arr(rotvec: np.ndarray) -> np.ndarray:
    """Quaternions for an array of rotation vectors."""
    theta = np.linalg.norm(rotvec, axis=-1)
    half = 0.5 * theta
    small = theta < _SMALL_ANGLE
    k = np.where(small, 0.5, np.sin(half) / np.where(small, 1.0, theta))
    w = np.cos(half)
    return np.concatenate([w[..., None], rotvec * k[..., None]], axis=-1)


def normalize_arr(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)
