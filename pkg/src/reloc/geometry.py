"""Rigid-body math: quaternions, world-to-camera poses, relative-pose
targets and the L1 pose loss used to supervise a relative-pose regressor.

Conventions (used consistently across the toolkit):
  * A Pose maps world points into the camera frame: x_cam = R x_world + t.
  * The camera center in world coordinates is c = -R^T t.
  * The relative pose from reference i to query q is T_q o T_i^-1.
  * Quaternions are (w, x, y, z), canonicalized to w >= 0 on construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AntipodalPair, DegenerateBaseline

_EPS = 1e-12


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3).copy()
    if not np.all(np.isfinite(a)):
        raise ValueError("vector must be finite")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Quaternion:
    """Unit-length rotation quaternion, sign-canonicalized to w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        # Canonical sign: flip so the first nonzero component of
        # (w, x, y, z) is positive. q and -q are the same rotation.
        comps = (self.w, self.x, self.y, self.z)
        for c in comps:
            if c > 0.0:
                break
            if c < 0.0:
                object.__setattr__(self, "w", -self.w)
                object.__setattr__(self, "x", -self.x)
                object.__setattr__(self, "y", -self.y)
                object.__setattr__(self, "z", -self.z)
                break

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle_rad: float) -> "Quaternion":
        a = np.asarray(axis, dtype=float).reshape(3)
        n = np.linalg.norm(a)
        if n < _EPS:
            return Quaternion.identity()
        a = a / n
        h = 0.5 * angle_rad
        s = math.sin(h)
        return Quaternion(math.cos(h), s * a[0], s * a[1], s * a[2]).normalized()

    @staticmethod
    def from_matrix(m) -> "Quaternion":
        """Rotation matrix -> quaternion (Shepperd's branch-on-trace method)."""
        m = np.asarray(m, dtype=float).reshape(3, 3)
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0.0:
            s = math.sqrt(t + 1.0) * 2.0
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] >= m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        return Quaternion(w, x, y, z).normalized()

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n < _EPS:
            raise ValueError("cannot normalize near-zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def dot(self, other: "Quaternion") -> float:
        return (
            self.w * other.w
            + self.x * other.x
            + self.y * other.y
            + self.z * other.z
        )

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product; to_matrix(a * b) == to_matrix(a) @ to_matrix(b)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotate(self, v) -> np.ndarray:
        """Apply the rotation to a 3-vector."""
        v = np.asarray(v, dtype=float).reshape(3)
        q = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(q, v)
        return v + self.w * t + np.cross(q, t)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])


@dataclass(frozen=True)
class Pose:
    """Absolute camera pose as a world-to-camera rigid transform."""

    rotation: Quaternion
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", self.rotation.normalized())
        object.__setattr__(self, "translation", _as_vec3(self.translation))

    @staticmethod
    def identity() -> "Pose":
        return Pose(Quaternion.identity(), np.zeros(3))

    def apply(self, x_world) -> np.ndarray:
        """Map world point(s) into the camera frame. Accepts (3,) or (N, 3)."""
        x = np.asarray(x_world, dtype=float)
        r = self.rotation.to_matrix()
        return x @ r.T + self.translation

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.to_matrix()
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class RelativePoseEstimate:
    """Regressor output for one reference-query pair.

    `direction` is the unit vector from the reference camera center toward
    the query center, expressed in the reference camera frame (the network
    predicts the inverse relative translation). `rotation` holds the
    transpose of the reference-to-query rotation. `scale` is the baseline
    length in meters and `uncertainty` the camera-center variance in m^2.
    """

    direction: np.ndarray
    rotation: Quaternion
    scale: float
    uncertainty: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float).reshape(3).copy()
        n = np.linalg.norm(d)
        if n < _EPS:
            raise ValueError("direction must be a nonzero vector")
        d /= n
        d.flags.writeable = False
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "rotation", self.rotation.normalized())
        if self.scale < 0.0:
            raise ValueError("scale must be >= 0")
        if self.uncertainty < 0.0:
            raise ValueError("uncertainty must be >= 0")


@dataclass(frozen=True)
class PoseLossTerms:
    """Decomposed L1 pose loss; total = t + mu*r + beta*s."""

    translation_term: float
    rotation_term: float
    scale_term: float
    mu: float = 1.0
    beta: float = 1.0

    @property
    def total(self) -> float:
        return (
            self.translation_term
            + self.mu * self.rotation_term
            + self.beta * self.scale_term
        )


def compose(a: Pose, b: Pose) -> Pose:
    """Compose two world-to-camera maps: result applies b first, then a."""
    rot = (a.rotation * b.rotation).normalized()
    t = a.rotation.rotate(b.translation) + a.translation
    return Pose(rot, t)


def invert(p: Pose) -> Pose:
    rot = p.rotation.conjugate()
    return Pose(rot, -rot.rotate(p.translation))


def camera_center(p: Pose) -> np.ndarray:
    """World-frame camera center c = -R^T t."""
    return -p.rotation.conjugate().rotate(p.translation)


def relative_pose(ref: Pose, query: Pose) -> Pose:
    """Transform from the reference camera frame to the query camera frame."""
    return compose(query, invert(ref))


def ground_truth_targets(rel: Pose) -> tuple[np.ndarray, Quaternion, float]:
    """Supervision targets (direction, rotation, scale) for a relative pose.

    direction = -R^T t / ||t||  (query center seen from the reference frame),
    rotation  = conjugate of the relative rotation,
    scale     = ||t||, the camera-center baseline in meters.
    """
    t = rel.translation
    scale = float(np.linalg.norm(t))
    if scale <= _EPS:
        raise DegenerateBaseline("camera centers coincide; direction undefined")
    direction = -rel.rotation.conjugate().rotate(t) / scale
    return direction, rel.rotation.conjugate(), scale


def pose_loss(
    pred: RelativePoseEstimate,
    target: tuple[np.ndarray, Quaternion, float],
    mu: float = 1.0,
    beta: float = 1.0,
) -> PoseLossTerms:
    """Element-wise L1 loss between a prediction and its targets.

    The target quaternion is sign-aligned to the prediction before the
    rotation term so the loss is continuous across the double cover.
    """
    t_dir, t_rot, t_scale = target
    t_dir = np.asarray(t_dir, dtype=float).reshape(3)
    q_pred = pred.rotation.as_array()
    q_tgt = t_rot.as_array()
    if float(q_pred @ q_tgt) < 0.0:
        q_tgt = -q_tgt
    return PoseLossTerms(
        translation_term=float(np.abs(pred.direction - t_dir).sum()),
        rotation_term=float(np.abs(q_pred - q_tgt).sum()),
        scale_term=abs(pred.scale - t_scale),
        mu=mu,
        beta=beta,
    )


def average_rotation(a: Quaternion, b: Quaternion) -> Quaternion:
    """Geodesic midpoint of two rotations (normalized chord midpoint)."""
    a = a.normalized()
    b = b.normalized()
    d = a.dot(b)
    if abs(d) < 1e-9:
        raise AntipodalPair("rotations are 180 degrees apart; midpoint undefined")
    bb = b.as_array() if d >= 0.0 else -b.as_array()
    m = a.as_array() + bb
    return Quaternion(*m).normalized()


def rotation_angle(a: Quaternion, b: Quaternion) -> float:
    """Geodesic angle between two rotations, in degrees in [0, 180]."""
    d = min(1.0, abs(a.normalized().dot(b.normalized())))
    return math.degrees(2.0 * math.acos(d))


def format_pose_record(image_id: str, pose: Pose) -> str:
    """One-line text record: `image_id tx ty tz qw qx qy qz`."""
    t = pose.translation
    q = pose.rotation
    fields = [image_id] + [repr(float(v)) for v in (t[0], t[1], t[2], q.w, q.x, q.y, q.z)]
    return " ".join(fields)


def parse_pose_record(line: str) -> tuple[str, Pose]:
    parts = line.split()
    if len(parts) != 8:
        raise ValueError(f"pose record needs 8 fields, got {len(parts)}: {line!r}")
    image_id = parts[0]
    tx, ty, tz, qw, qx, qy, qz = (float(p) for p in parts[1:])
    return image_id, Pose(Quaternion(qw, qx, qy, qz), np.array([tx, ty, tz]))
