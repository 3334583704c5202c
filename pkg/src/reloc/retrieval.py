"""Reference-image retrieval: descriptor distance with a camera-center
spacing window.

Descriptors are plain 1-D float arrays. The toolkit ships a tiny-image
baseline descriptor; anything producing fixed-dimension vectors (one per
database) can be plugged in instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import Intrinsics
from .errors import EmptyDatabase
from .geometry import Pose, camera_center

TINY_SIDE = 16


@dataclass(frozen=True)
class SceneEntry:
    """One reference image: id, absolute pose, descriptor, optional assets."""

    image_id: str
    pose: Pose
    descriptor: np.ndarray
    depth_path: str | None = None
    features_path: str | None = None

    def __post_init__(self):
        d = np.asarray(self.descriptor, dtype=float).reshape(-1).copy()
        if not np.all(np.isfinite(d)):
            raise ValueError(f"descriptor of {self.image_id!r} must be finite")
        d.flags.writeable = False
        object.__setattr__(self, "descriptor", d)


@dataclass
class SceneDB:
    """Immutable-after-load reference database for one scene."""

    entries: list[SceneEntry]
    intrinsics: Intrinsics
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("image ids must be unique")
        dims = {e.descriptor.shape[0] for e in self.entries}
        if len(dims) > 1:
            raise ValueError(f"descriptors have mixed dimensions: {sorted(dims)}")
        self._index = {e.image_id: e for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, image_id: str) -> SceneEntry:
        return self._index[image_id]


def _area_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) weights for exact area-average 1-D resampling."""
    step = src / dst
    lo = np.arange(dst)[:, None] * step
    hi = lo + step
    cells = np.arange(src)[None, :]
    overlap = np.minimum(hi, cells + 1.0) - np.maximum(lo, cells)
    return np.clip(overlap, 0.0, None) / step


def tiny_image_descriptor(image: np.ndarray) -> np.ndarray:
    """Baseline appearance descriptor from a grayscale grid.

    Area-averages the image down to 16x16, removes the mean (brightness
    invariance) and L2-normalizes. An all-constant image maps to the zero
    vector.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-D grayscale grid")
    h, w = img.shape
    small = _area_weights(h, TINY_SIDE) @ img @ _area_weights(w, TINY_SIDE).T
    flat = small.reshape(-1)
    flat = flat - flat.mean()
    norm = np.linalg.norm(flat)
    if norm < 1e-12:
        return np.zeros(TINY_SIDE * TINY_SIDE)
    return flat / norm


def retrieve_references(
    db: SceneDB,
    query: np.ndarray,
    k: int = 5,
    d_lo: float = 0.05,
    d_hi: float = 10.0,
) -> list[str]:
    """Greedy top-k by descriptor distance with a spacing window.

    Candidates are scanned in ascending Euclidean descriptor distance
    (ties broken by image id). A candidate is accepted only if its camera
    center lies within [d_lo, d_hi] meters of every already-accepted
    reference; the closest candidate is therefore always accepted. Stops
    after k acceptances or when candidates run out.
    """
    if len(db) == 0:
        raise EmptyDatabase("reference database is empty")
    q = np.asarray(query, dtype=float).reshape(-1)
    order = sorted(
        db.entries,
        key=lambda e: (float(np.linalg.norm(e.descriptor - q)), e.image_id),
    )
    chosen: list[SceneEntry] = []
    centers: list[np.ndarray] = []
    for entry in order:
        if len(chosen) >= k:
            break
        c = camera_center(entry.pose)
        spaced = all(d_lo <= float(np.linalg.norm(c - other)) <= d_hi for other in centers)
        if spaced:
            chosen.append(entry)
            centers.append(c)
    return [e.image_id for e in chosen]
