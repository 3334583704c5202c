"""Synthetic scenes standing in for mesh-based indoor environments.

A scene is a seeded random point cloud in an axis-aligned box, each point
carrying an integer feature tag. The module samples camera poses (full
6-DoF or planar x/y/yaw), renders splat-based depth maps, measures the
scene-coordinate overlap between views, rejection-samples constrained
training pairs, and provides a noise-model regressor that perturbs
ground-truth relative poses so the triangulation stage can be driven
without a trained network.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .camera import Intrinsics, default_intrinsics
from .errors import BudgetExhausted, EmptyScene, NoValidDepth
from .geometry import (
    Pose,
    Quaternion,
    RelativePoseEstimate,
    camera_center,
    ground_truth_targets,
    relative_pose,
    rotation_angle,
)

WORLD_UP = np.array([0.0, 0.0, 1.0])
NEAR_PLANE = 0.05  # meters; points closer than this are never splatted
SPLAT_RADIUS = 2.0  # pixels


def _stable_key(*parts: str) -> int:
    digest = hashlib.sha256("|".join(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class SyntheticScene:
    """Seeded random point cloud with per-point feature tags."""

    points: np.ndarray  # (n, 3) meters
    tags: np.ndarray  # (n,) int
    bounds: tuple[np.ndarray, np.ndarray]  # (lo, hi), meters
    seed: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3).copy()
        tags = np.asarray(self.tags, dtype=np.int64).reshape(-1).copy()
        if pts.shape[0] != tags.shape[0]:
            raise ValueError("points and tags must align")
        lo = np.asarray(self.bounds[0], dtype=float).reshape(3).copy()
        hi = np.asarray(self.bounds[1], dtype=float).reshape(3).copy()
        if np.any(hi <= lo):
            raise ValueError("bounds box must have positive extent")
        for a in (pts, tags, lo, hi):
            a.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "bounds", (lo, hi))

    @property
    def centroid(self) -> np.ndarray:
        lo, hi = self.bounds
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PairConstraints:
    """Acceptance thresholds for training-pair rejection sampling.

    d_max / gamma_max are None when only the overlap condition applies
    (the sparse regime).
    """

    overlap_min: float
    d_max: float | None = None
    gamma_max: float | None = None
    p_max: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.overlap_min <= 1.0:
            raise ValueError("overlap_min must be in [0, 1]")
        for name, v in (("d_max", self.d_max), ("gamma_max", self.gamma_max), ("p_max", self.p_max)):
            if v is not None and v <= 0.0:
                raise ValueError(f"{name} must be > 0")

    @staticmethod
    def dense() -> "PairConstraints":
        return PairConstraints(overlap_min=0.30, d_max=0.6, gamma_max=30.0, p_max=0.2)

    @staticmethod
    def sparse() -> "PairConstraints":
        return PairConstraints(overlap_min=0.10, d_max=None, gamma_max=None, p_max=0.2)


@dataclass(frozen=True)
class NoiseModel:
    """Perturbation model of the stand-in relative-pose regressor."""

    dir_sigma: float = 0.0  # degrees
    rot_sigma: float = 0.0  # degrees
    scale_rel_sigma: float = 0.0  # log-normal sigma
    outlier_prob: float = 0.0
    mc_samples: int = 100
    seed: int = 0
    outlier_per_sample: bool = False

    def __post_init__(self):
        if min(self.dir_sigma, self.rot_sigma, self.scale_rel_sigma) < 0.0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier_prob must be in [0, 1]")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")


def make_scene(
    seed: int,
    n_points: int = 2000,
    bounds: tuple = ((-3.0, -3.0, 0.0), (3.0, 3.0, 2.5)),
) -> SyntheticScene:
    """Uniform random point cloud; tags are point indices."""
    if n_points < 1:
        raise EmptyScene("a scene needs at least one point")
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    pts = rng.uniform(lo, hi, size=(n_points, 3))
    return SyntheticScene(points=pts, tags=np.arange(n_points), bounds=(lo, hi), seed=seed)


def look_at(eye, target, up=WORLD_UP) -> Pose:
    """World-to-camera pose with the optical axis toward `target`."""
    eye = np.asarray(eye, dtype=float).reshape(3)
    forward = np.asarray(target, dtype=float).reshape(3) - eye
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("look_at target coincides with eye")
    forward /= n
    right = np.cross(forward, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        # Optical axis parallel to `up`: fall back to an arbitrary right.
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
        rn = np.linalg.norm(right)
    right /= rn
    down = np.cross(forward, right)
    r = np.stack([right, down, forward])
    return Pose(Quaternion.from_matrix(r), -r @ eye)


def pose_from_yaw(position, yaw_rad: float, pitch_rad: float = 0.0, roll_rad: float = 0.0) -> Pose:
    """Planar camera: horizontal optical axis at the given yaw, z-up world."""
    position = np.asarray(position, dtype=float).reshape(3)
    q_yaw = Quaternion.from_matrix(
        np.array(
            [
                [math.sin(yaw_rad), -math.cos(yaw_rad), 0.0],
                [0.0, 0.0, -1.0],
                [math.cos(yaw_rad), math.sin(yaw_rad), 0.0],
            ]
        )
    )
    q = (
        Quaternion.from_axis_angle([0.0, 0.0, 1.0], roll_rad)
        * Quaternion.from_axis_angle([1.0, 0.0, 0.0], pitch_rad)
        * q_yaw
    )
    return Pose(q, -q.rotate(position))


def yaw_pitch_roll(pose: Pose) -> tuple[float, float, float]:
    """Degrees; pitch/roll are 0 for planar cameras built by pose_from_yaw."""
    r = pose.rotation.to_matrix()
    right, down, forward = r[0], r[1], r[2]
    yaw = math.degrees(math.atan2(forward[1], forward[0]))
    pitch = math.degrees(math.asin(np.clip(forward[2], -1.0, 1.0)))
    roll = math.degrees(math.atan2(right[2], -down[2]))
    return yaw, pitch, roll


def _sees_points(scene: SyntheticScene, pose: Pose, k: Intrinsics) -> bool:
    cam = pose.apply(scene.points)
    z = cam[:, 2]
    front = z > NEAR_PLANE
    if not front.any():
        return False
    u, v, _ = k.project(cam[front])
    return bool(np.any(k.contains(u, v)))


def sample_poses(
    scene: SyntheticScene,
    n: int,
    mode: str = "dense",
    seed: int | None = None,
    intrinsics: Intrinsics | None = None,
    height: float | None = None,
    pitch_roll_jitter: float = 0.0,
) -> list[Pose]:
    """Sample camera poses that each see at least one scene point.

    dense: uniform position inside the bounds, uniform random rotation.
    sparse: uniform x/y at a fixed height with uniform yaw; pitch and roll
    are zero unless `pitch_roll_jitter` (degrees) is set.
    """
    if scene.points.shape[0] == 0:
        raise EmptyScene("scene has no points")
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode not in ("dense", "sparse"):
        raise ValueError(f"unknown mode {mode!r}")
    k = intrinsics or default_intrinsics()
    lo, hi = scene.bounds
    if height is None:
        height = 0.5 * (lo[2] + hi[2])
    rng = np.random.default_rng(
        np.random.SeedSequence([scene.seed if seed is None else seed])
    )
    poses: list[Pose] = []
    attempts = 0
    budget = 1000 * n
    while len(poses) < n:
        if attempts >= budget:
            raise EmptyScene(
                f"could not sample {n} valid poses in {budget} attempts"
            )
        attempts += 1
        if mode == "dense":
            pos = rng.uniform(lo, hi)
            q = rng.standard_normal(4)
            pose = Pose(Quaternion(*q), np.zeros(3))
            pose = Pose(pose.rotation, -pose.rotation.rotate(pos))
        else:
            pos = np.array(
                [rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]), height]
            )
            yaw = rng.uniform(0.0, 2.0 * math.pi)
            jitter = math.radians(pitch_roll_jitter)
            pitch = rng.uniform(-jitter, jitter) if jitter > 0.0 else 0.0
            roll = rng.uniform(-jitter, jitter) if jitter > 0.0 else 0.0
            pose = pose_from_yaw(pos, yaw, pitch, roll)
        if _sees_points(scene, pose, k):
            poses.append(pose)
    return poses


def corner_poses(scene: SyntheticScene, height: float | None = None) -> list[Pose]:
    """Four cameras at the x/y corners of the bounds, aimed at the centroid."""
    lo, hi = scene.bounds
    if height is None:
        height = 0.5 * (lo[2] + hi[2])
    target = scene.centroid
    corners = [
        (lo[0], lo[1]),
        (lo[0], hi[1]),
        (hi[0], lo[1]),
        (hi[0], hi[1]),
    ]
    return [look_at(np.array([x, y, height]), target) for x, y in corners]


def _splat_buffers(
    scene: SyntheticScene,
    pose: Pose,
    k: Intrinsics,
    resolution: int,
    splat_radius: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Z-buffer depth and winning point index per pixel (-1 where empty)."""
    ks = k.scaled(resolution)
    cam = pose.apply(scene.points)
    z = cam[:, 2]
    front = z > NEAR_PLANE
    depth = np.full((resolution, resolution), np.inf)
    winner = np.full((resolution, resolution), -1, dtype=np.int64)
    if not front.any():
        return np.zeros((resolution, resolution)), winner
    idx = np.nonzero(front)[0]
    u, v, z = ks.project(cam[front])

    reach = int(math.ceil(splat_radius + 0.5))
    off_x, off_y = np.meshgrid(
        np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij"
    )
    cols = np.floor(u).astype(int)[:, None, None] + off_x[None]
    rows = np.floor(v).astype(int)[:, None, None] + off_y[None]
    du = cols + 0.5 - u[:, None, None]
    dv = rows + 0.5 - v[:, None, None]
    hit = (du * du + dv * dv <= splat_radius**2) & (
        (cols >= 0) & (cols < resolution) & (rows >= 0) & (rows < resolution)
    )
    p_sel, oc, orr = np.nonzero(hit)
    flat = rows[p_sel, oc, orr] * resolution + cols[p_sel, oc, orr]
    zs = z[p_sel]
    np.minimum.at(depth.reshape(-1), flat, zs)
    # Claim pixels whose z-buffer value this point produced; ties go to the
    # smallest point index for determinism.
    won = zs == depth.reshape(-1)[flat]
    claim = np.full(resolution * resolution, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(claim, flat[won], idx[p_sel[won]])
    winner = np.where(np.isinf(depth.reshape(-1)), -1, claim).reshape(
        resolution, resolution
    )
    depth = np.where(np.isinf(depth), 0.0, depth)
    return depth, winner


def render_depth(
    scene: SyntheticScene,
    pose: Pose,
    intrinsics: Intrinsics,
    resolution: int,
    splat_radius: float = SPLAT_RADIUS,
) -> np.ndarray:
    """Nearest-point splat depth map; 0 marks pixels no point covers."""
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    depth, _ = _splat_buffers(scene, pose, intrinsics, resolution, splat_radius)
    return depth


def render_features(
    scene: SyntheticScene,
    pose: Pose,
    intrinsics: Intrinsics,
    side: int,
    channels: int,
    feature_seed: int = 0,
    splat_radius: float = SPLAT_RADIUS,
) -> np.ndarray:
    """(side, side, channels) map of per-tag embeddings; empty cells are 0.

    Embeddings are unit Gaussian vectors drawn once per tag from
    `feature_seed`, so the same surface point produces the same feature in
    every view.
    """
    _, winner = _splat_buffers(scene, pose, intrinsics, side, splat_radius)
    n_tags = int(scene.tags.max()) + 1 if scene.tags.size else 1
    rng = np.random.default_rng(np.random.SeedSequence([feature_seed]))
    table = rng.standard_normal((n_tags, channels))
    table /= np.linalg.norm(table, axis=1, keepdims=True)
    out = np.zeros((side, side, channels))
    filled = winner >= 0
    out[filled] = table[scene.tags[winner[filled]]]
    return out


def backproject_depth(depth: np.ndarray, pose: Pose, intrinsics: Intrinsics) -> np.ndarray:
    """World-frame scene coordinates of the valid pixels of a depth map."""
    depth = np.asarray(depth, dtype=float)
    res = depth.shape[0]
    ks = intrinsics.scaled(res)
    rows, cols = np.nonzero(depth > 0.0)
    cam = ks.backproject_pixels(rows, cols, depth[rows, cols])
    r_inv = pose.rotation.conjugate().to_matrix()
    return cam @ r_inv.T + camera_center(pose)


def overlap_factor(
    scene: SyntheticScene,
    pose_i: Pose,
    pose_j: Pose,
    intrinsics: Intrinsics,
    resolution: int,
    p_max: float = 0.2,
) -> float:
    """Symmetric fraction of scene coordinates shared by two views.

    Each view's valid depth pixels are lifted to world coordinates; the
    directed ratio is the fraction of one view's coordinates lying within
    p_max of some coordinate of the other view, and the overlap is the mean
    of the two directions.
    """
    d_i = render_depth(scene, pose_i, intrinsics, resolution)
    d_j = render_depth(scene, pose_j, intrinsics, resolution)
    pts_i = backproject_depth(d_i, pose_i, intrinsics)
    pts_j = backproject_depth(d_j, pose_j, intrinsics)
    if len(pts_i) == 0 or len(pts_j) == 0:
        raise NoValidDepth("a view sees no scene points")
    return _overlap_from_coords(pts_i, pts_j, p_max)


def _overlap_from_coords(pts_i: np.ndarray, pts_j: np.ndarray, p_max: float) -> float:
    near_ij = cKDTree(pts_j).query(pts_i, k=1)[0] <= p_max
    near_ji = cKDTree(pts_i).query(pts_j, k=1)[0] <= p_max
    return 0.5 * (near_ij.mean() + near_ji.mean())


def sample_training_pairs(
    scene: SyntheticScene,
    poses: list[Pose],
    constraints: PairConstraints,
    m: int,
    seed: int = 0,
    intrinsics: Intrinsics | None = None,
    resolution: int = 32,
    max_attempts: int | None = None,
) -> list[tuple[int, int]]:
    """Rejection-sample `m` pose-index pairs satisfying the constraints.

    Pairs are drawn uniformly (with replacement across draws); a pair is
    kept when the camera-center distance and rotation difference pass the
    configured bounds (when set) and the view overlap exceeds
    constraints.overlap_min. Raises BudgetExhausted carrying the partial
    result when the attempt budget runs out.
    """
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    k = intrinsics or default_intrinsics()
    budget = max_attempts if max_attempts is not None else 200 * m
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    coords: dict[int, np.ndarray | None] = {}
    trees: dict[int, cKDTree] = {}

    def view_coords(idx: int):
        if idx not in coords:
            pts = backproject_depth(render_depth(scene, poses[idx], k, resolution), poses[idx], k)
            coords[idx] = pts if len(pts) else None
            if len(pts):
                trees[idx] = cKDTree(pts)
        return coords[idx]

    pairs: list[tuple[int, int]] = []
    centers = [camera_center(p) for p in poses]
    for _ in range(budget):
        if len(pairs) >= m:
            return pairs
        i = int(rng.integers(len(poses)))
        j = int(rng.integers(len(poses) - 1))
        if j >= i:
            j += 1
        if constraints.d_max is not None:
            if np.linalg.norm(centers[i] - centers[j]) >= constraints.d_max:
                continue
        if constraints.gamma_max is not None:
            if rotation_angle(poses[i].rotation, poses[j].rotation) >= constraints.gamma_max:
                continue
        pts_i, pts_j = view_coords(i), view_coords(j)
        if pts_i is None or pts_j is None:
            continue
        near_ij = trees[j].query(pts_i, k=1)[0] <= constraints.p_max
        near_ji = trees[i].query(pts_j, k=1)[0] <= constraints.p_max
        overlap = 0.5 * (near_ij.mean() + near_ji.mean())
        if overlap > constraints.overlap_min:
            pairs.append((i, j))
    if len(pairs) >= m:
        return pairs
    raise BudgetExhausted(
        f"accepted {len(pairs)}/{m} pairs in {budget} attempts", pairs=pairs
    )


def _perpendicular_axes(directions: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Project random vectors onto the plane orthogonal to each direction."""
    proj = raw - (np.sum(raw * directions, axis=1, keepdims=True)) * directions
    norms = np.linalg.norm(proj, axis=1, keepdims=True)
    # A raw draw parallel to the direction is measure-zero; fall back to a
    # deterministic perpendicular built from the least-aligned basis axis.
    bad = norms[:, 0] < 1e-12
    if bad.any():
        basis = np.eye(3)[np.argmin(np.abs(directions[bad]), axis=1)]
        alt = np.cross(directions[bad], basis)
        proj[bad] = alt
        norms[bad] = np.linalg.norm(alt, axis=1, keepdims=True)
    return proj / norms


def _quat_batch_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = q1[:, 0], q1[:, 1], q1[:, 2], q1[:, 3]
    w2, x2, y2, z2 = q2[:, 0], q2[:, 1], q2[:, 2], q2[:, 3]
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=1,
    )


def oracle_regressor(
    ref: Pose,
    query: Pose,
    nm: NoiseModel,
    ref_id: str = "ref",
    query_id: str = "query",
) -> list[RelativePoseEstimate]:
    """Stand-in network inference: ground truth plus configured noise.

    Returns nm.mc_samples estimates. Each sample tilts the true direction
    by a Gaussian angle about a random perpendicular axis, perturbs the
    rotation by random-axis Gaussian-angle noise and scales by a log-normal
    factor. With probability outlier_prob (decided once per pair) every
    sample is replaced by a single random draw unrelated to the ground
    truth; `outlier_per_sample` instead draws each sample independently,
    which makes outliers visible to the uncertainty estimate. Deterministic
    given (nm.seed, ref_id, query_id).
    """
    rng = np.random.default_rng(
        np.random.SeedSequence([nm.seed, _stable_key(ref_id, query_id)])
    )
    direction, rotation, scale = ground_truth_targets(relative_pose(ref, query))
    n = nm.mc_samples

    is_outlier = rng.random() < nm.outlier_prob
    if is_outlier:
        draws = 1 if not nm.outlier_per_sample else n
        dirs = rng.standard_normal((draws, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        quats = rng.standard_normal((draws, 4))
        quats /= np.linalg.norm(quats, axis=1, keepdims=True)
        scales = np.exp(rng.standard_normal(draws))
        if draws == 1:
            dirs = np.repeat(dirs, n, axis=0)
            quats = np.repeat(quats, n, axis=0)
            scales = np.repeat(scales, n)
    else:
        axes = _perpendicular_axes(
            np.repeat(direction[None, :], n, axis=0), rng.standard_normal((n, 3))
        )
        angles = rng.normal(0.0, math.radians(nm.dir_sigma), n)
        # axis is perpendicular to the direction, so Rodrigues reduces to
        # d' = d cos(t) + (axis x d) sin(t).
        dirs = (
            direction[None, :] * np.cos(angles)[:, None]
            + np.cross(axes, direction[None, :]) * np.sin(angles)[:, None]
        )
        rot_axes = rng.standard_normal((n, 3))
        rot_norms = np.linalg.norm(rot_axes, axis=1, keepdims=True)
        rot_norms[rot_norms < 1e-12] = 1.0
        rot_axes /= rot_norms
        rot_angles = rng.normal(0.0, math.radians(nm.rot_sigma), n)
        half = 0.5 * rot_angles
        noise_q = np.concatenate(
            [np.cos(half)[:, None], np.sin(half)[:, None] * rot_axes], axis=1
        )
        quats = _quat_batch_mul(noise_q, np.repeat(rotation.as_array()[None, :], n, axis=0))
        scales = scale * np.exp(rng.normal(0.0, nm.scale_rel_sigma, n))

    return [
        RelativePoseEstimate(
            direction=dirs[s],
            rotation=Quaternion(*quats[s]).normalized(),
            scale=float(scales[s]),
        )
        for s in range(n)
    ]
