"""Absolute query pose from pairwise relative estimates.

Each reference contributes a world-frame ray from its camera center toward
the predicted query center. Every reference pair yields one hypothesis by
two-ray midpoint triangulation plus rotation averaging; an exhaustive
RANSAC over the (at most C(5,2) = 10) pairs scores hypotheses by an
angle-plus-scale-ratio inlier test and breaks ties with the estimates'
Monte-Carlo uncertainty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AllHypothesesDegenerate,
    DegenerateMean,
    DegenerateRays,
    NegativeRange,
    NotEnoughReferences,
    RelocError,
)
from .geometry import (
    Pose,
    Quaternion,
    RelativePoseEstimate,
    average_rotation,
    camera_center,
)

_PARALLEL_EPS = 1e-6
_CENTER_EPS = 1e-12


@dataclass(frozen=True)
class Ray:
    """World-frame ray (origin + non-negative multiples of a unit direction)."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3).copy()
        d = np.asarray(self.direction, dtype=float).reshape(3).copy()
        n = np.linalg.norm(d)
        if n < _CENTER_EPS:
            raise ValueError("ray direction must be nonzero")
        d /= n
        o.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Hypothesis:
    """Candidate absolute query pose built from one reference pair."""

    pose: Pose
    pair: tuple[int, int]
    inliers: int
    mean_uncertainty: float

    def __post_init__(self):
        if self.pair[0] == self.pair[1]:
            raise ValueError("hypothesis pair must use two distinct references")


@dataclass(frozen=True)
class RansacParams:
    alpha_max: float = 15.0  # degrees
    s_min: float = 0.5
    s_max: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.alpha_max < 90.0:
            raise ValueError("alpha_max must be in (0, 90) degrees")
        if not 0.0 < self.s_min < 1.0 < self.s_max:
            raise ValueError("need 0 < s_min < 1 < s_max")


@dataclass(frozen=True)
class PairDiagnostics:
    pair: tuple[int, int]
    inliers: int | None
    mean_uncertainty: float | None
    failure: str | None = None


@dataclass(frozen=True)
class RansacDiagnostics:
    hypotheses: tuple[PairDiagnostics, ...]
    chosen_pair: tuple[int, int]
    inliers: int
    mean_uncertainty: float


def ray_from_estimate(ref_pose: Pose, est: RelativePoseEstimate) -> Ray:
    """Ray from the reference center toward the predicted query center.

    The estimate's direction already lives in the reference camera frame
    and points at the query, so rotating it to world coordinates with the
    inverse reference rotation is all that is needed.
    """
    return Ray(
        origin=camera_center(ref_pose),
        direction=ref_pose.rotation.conjugate().rotate(est.direction),
    )


def triangulate_rays(a: Ray, b: Ray) -> np.ndarray:
    """Midpoint of the shortest segment between two rays.

    Raises DegenerateRays for near-parallel rays and NegativeRange when the
    closest approach lies behind either ray origin.
    """
    d1, d2 = a.direction, b.direction
    if np.linalg.norm(np.cross(d1, d2)) <= _PARALLEL_EPS:
        raise DegenerateRays("rays are near-parallel")
    r = b.origin - a.origin
    bdot = float(d1 @ d2)
    denom = 1.0 - bdot * bdot
    lam_a = (float(d1 @ r) - bdot * float(d2 @ r)) / denom
    lam_b = (bdot * float(d1 @ r) - float(d2 @ r)) / denom
    if lam_a < 0.0 or lam_b < 0.0:
        raise NegativeRange(
            f"closest approach behind a ray origin (lambdas {lam_a:.3g}, {lam_b:.3g})"
        )
    p1 = a.origin + lam_a * d1
    p2 = b.origin + lam_b * d2
    return 0.5 * (p1 + p2)


def make_hypothesis(
    ref_i: Pose,
    est_i: RelativePoseEstimate,
    ref_j: Pose,
    est_j: RelativePoseEstimate,
    pair: tuple[int, int] = (0, 1),
) -> Hypothesis:
    """Triangulate a query-pose hypothesis from two reference estimates.

    The query rotation is the average of the two chained rotations; each
    estimate stores the inverse relative rotation, so it is conjugated
    before being composed with its reference's absolute rotation.
    """
    center = triangulate_rays(
        ray_from_estimate(ref_i, est_i), ray_from_estimate(ref_j, est_j)
    )
    rot = average_rotation(
        est_i.rotation.conjugate() * ref_i.rotation,
        est_j.rotation.conjugate() * ref_j.rotation,
    )
    pose = Pose(rot, -rot.rotate(center))
    return Hypothesis(
        pose=pose,
        pair=pair,
        inliers=0,
        mean_uncertainty=0.5 * (est_i.uncertainty + est_j.uncertainty),
    )


def is_inlier(
    h: Hypothesis,
    ref_k: Pose,
    est_k: RelativePoseEstimate,
    p: RansacParams,
    use_scale: bool = True,
) -> bool:
    """Angle + scale-ratio consistency of one reference with a hypothesis.

    The angle between the reference's predicted ray and the direction from
    its center to the hypothesis center must stay below alpha_max, and the
    ratio of the actual baseline to the predicted scale must fall strictly
    inside (s_min, s_max). A reference coincident with the hypothesis
    center carries no direction information: it passes the angle test but
    is assigned ratio 0, which the scale test rejects.
    """
    ray = ray_from_estimate(ref_k, est_k)
    to_h = camera_center(h.pose) - ray.origin
    baseline = float(np.linalg.norm(to_h))
    if baseline < _CENTER_EPS:
        ratio = 0.0
        angle_ok = True
    else:
        cos_a = float(np.clip(ray.direction @ (to_h / baseline), -1.0, 1.0))
        angle_ok = math.degrees(math.acos(cos_a)) < p.alpha_max
        ratio = baseline / est_k.scale if est_k.scale > 0.0 else math.inf
    if not angle_ok:
        return False
    if use_scale and not (p.s_min < ratio < p.s_max):
        return False
    return True


def ransac_absolute_pose(
    refs: list[tuple[Pose, RelativePoseEstimate]],
    p: RansacParams = RansacParams(),
    use_scale: bool = True,
    use_uncertainty: bool = True,
) -> tuple[Pose, RansacDiagnostics]:
    """Exhaustive pair RANSAC over the retrieved references.

    Builds a hypothesis from every unordered reference pair, counts inliers
    over all references (the generating pair included), and returns the
    hypothesis with the most inliers. Equal counts are resolved by the
    smallest mean uncertainty (when enabled), then by lexicographic pair
    index via the scan order.
    """
    if len(refs) < 2:
        raise NotEnoughReferences(f"need >= 2 references, got {len(refs)}")
    diagnostics: list[PairDiagnostics] = []
    best: Hypothesis | None = None
    for i in range(len(refs)):
        for j in range(i + 1, len(refs)):
            try:
                hyp = make_hypothesis(refs[i][0], refs[i][1], refs[j][0], refs[j][1], pair=(i, j))
            except RelocError as exc:
                diagnostics.append(PairDiagnostics((i, j), None, None, failure=str(exc)))
                continue
            inliers = sum(
                1
                for ref_k, est_k in refs
                if is_inlier(hyp, ref_k, est_k, p, use_scale=use_scale)
            )
            hyp = Hypothesis(hyp.pose, hyp.pair, inliers, hyp.mean_uncertainty)
            diagnostics.append(
                PairDiagnostics((i, j), inliers, hyp.mean_uncertainty)
            )
            if best is None or hyp.inliers > best.inliers:
                best = hyp
            elif (
                use_uncertainty
                and hyp.inliers == best.inliers
                and hyp.mean_uncertainty < best.mean_uncertainty
            ):
                best = hyp
    if best is None:
        raise AllHypothesesDegenerate("no reference pair produced a valid hypothesis")
    return best.pose, RansacDiagnostics(
        hypotheses=tuple(diagnostics),
        chosen_pair=best.pair,
        inliers=best.inliers,
        mean_uncertainty=best.mean_uncertainty,
    )


def aggregate_mc_samples(samples: list[RelativePoseEstimate]) -> RelativePoseEstimate:
    """Fuse Monte-Carlo forward samples into one estimate with uncertainty.

    Direction, rotation (sign-aligned) and scale are averaged; the
    uncertainty is the trace of the unbiased sample covariance of the
    implied relative camera-center vectors scale * direction, in m^2.
    """
    if len(samples) < 2:
        raise ValueError("need >= 2 samples to aggregate")
    dirs = np.stack([s.direction for s in samples])
    mean_dir = dirs.mean(axis=0)
    if np.linalg.norm(mean_dir) < 1e-9:
        raise DegenerateMean("mean direction collapsed to zero")
    quats = np.stack([s.rotation.as_array() for s in samples])
    signs = np.where(quats @ quats[0] >= 0.0, 1.0, -1.0)
    mean_q = (quats * signs[:, None]).mean(axis=0)
    if np.linalg.norm(mean_q) < 1e-9:
        raise DegenerateMean("mean rotation collapsed to zero")
    scales = np.array([s.scale for s in samples])
    centers = dirs * scales[:, None]
    uncertainty = float(centers.var(axis=0, ddof=1).sum())
    return RelativePoseEstimate(
        direction=mean_dir,
        rotation=Quaternion(*mean_q).normalized(),
        scale=float(scales.mean()),
        uncertainty=uncertainty,
    )
