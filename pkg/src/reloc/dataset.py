"""On-disk formats and synthetic dataset generation.

A dataset directory holds one image collection:

    poses.txt          one `image_id tx ty tz qw qx qy qz` per line
    descriptors.txt    one `image_id v1 v2 ... vD` per line
    depth/<id>.bin     binary grid: u32 side, u32 channels=1, f32 row-major
    features/<id>.bin  binary grid: u32 side, u32 channels, f32 row-major
    intrinsics.json    fx, fy, cx, cy, width, height

`simulate` produces a root directory with scene.json plus refs/ and
queries/ subdirectories in this layout.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .camera import Intrinsics
from .geometry import Pose, format_pose_record, parse_pose_record
from .retrieval import SceneDB, SceneEntry, tiny_image_descriptor
from .scene_sim import (
    SyntheticScene,
    corner_poses,
    make_scene,
    render_depth,
    render_features,
    sample_poses,
)

DEPTH_RESOLUTION = 32
FEATURE_SIDE = 8
FEATURE_CHANNELS = 8

_HEADER = struct.Struct("<II")


def save_grid(path: str | Path, data: np.ndarray) -> None:
    """Write a (side, side) or (side, side, channels) float grid."""
    a = np.asarray(data, dtype=float)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[0] != a.shape[1]:
        raise ValueError(f"grid must be square, got {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(a.shape[0], a.shape[2]))
        fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_grid(path: str | Path) -> np.ndarray:
    """Read a binary grid; 2-D when channels == 1, else (s, s, c)."""
    raw = Path(path).read_bytes()
    side, channels = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if body.size != side * side * channels:
        raise ValueError(f"grid file {path} is truncated")
    a = body.astype(float).reshape(side, side, channels)
    return a[:, :, 0] if channels == 1 else a


def save_poses(path: str | Path, poses: list[tuple[str, Pose]]) -> None:
    lines = [format_pose_record(image_id, pose) for image_id, pose in poses]
    Path(path).write_text("\n".join(lines) + "\n")


def load_poses(path: str | Path) -> list[tuple[str, Pose]]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(parse_pose_record(line))
    return out


def save_descriptors(path: str | Path, descriptors: list[tuple[str, np.ndarray]]) -> None:
    lines = []
    for image_id, vec in descriptors:
        values = " ".join(repr(float(v)) for v in np.asarray(vec).reshape(-1))
        lines.append(f"{image_id} {values}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_descriptors(path: str | Path) -> list[tuple[str, np.ndarray]]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        parts = line.split()
        out.append((parts[0], np.array([float(v) for v in parts[1:]])))
    return out


def save_intrinsics(path: str | Path, k: Intrinsics) -> None:
    Path(path).write_text(
        json.dumps(
            {
                "fx": k.fx,
                "fy": k.fy,
                "cx": k.cx,
                "cy": k.cy,
                "width": k.width,
                "height": k.height,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )


def load_intrinsics(path: str | Path) -> Intrinsics:
    d = json.loads(Path(path).read_text())
    return Intrinsics(
        fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"],
        width=int(d["width"]), height=int(d["height"]),
    )


def save_scene(path: str | Path, scene: SyntheticScene) -> None:
    lo, hi = scene.bounds
    payload = {
        "seed": scene.seed,
        "bounds": {"lo": [float(v) for v in lo], "hi": [float(v) for v in hi]},
        "points": [
            [float(p[0]), float(p[1]), float(p[2]), int(t)]
            for p, t in zip(scene.points, scene.tags)
        ],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_scene(path: str | Path) -> SyntheticScene:
    d = json.loads(Path(path).read_text())
    rows = np.array(d["points"], dtype=float).reshape(-1, 4)
    return SyntheticScene(
        points=rows[:, :3],
        tags=rows[:, 3].astype(np.int64),
        bounds=(np.array(d["bounds"]["lo"]), np.array(d["bounds"]["hi"])),
        seed=int(d["seed"]),
    )


def write_image_set(
    out_dir: str | Path,
    scene: SyntheticScene,
    poses: list[tuple[str, Pose]],
    intrinsics: Intrinsics,
    depth_resolution: int = DEPTH_RESOLUTION,
    feature_seed: int = 0,
) -> None:
    """Render and write one dataset directory for the given posed images."""
    out = Path(out_dir)
    (out / "depth").mkdir(parents=True, exist_ok=True)
    (out / "features").mkdir(parents=True, exist_ok=True)
    descriptors = []
    for image_id, pose in poses:
        depth = render_depth(scene, pose, intrinsics, depth_resolution)
        save_grid(out / "depth" / f"{image_id}.bin", depth)
        feats = render_features(
            scene, pose, intrinsics, FEATURE_SIDE, FEATURE_CHANNELS, feature_seed
        )
        save_grid(out / "features" / f"{image_id}.bin", feats)
        descriptors.append((image_id, tiny_image_descriptor(depth)))
    save_poses(out / "poses.txt", poses)
    save_descriptors(out / "descriptors.txt", descriptors)
    save_intrinsics(out / "intrinsics.json", intrinsics)


def load_entries(dataset_dir: str | Path) -> tuple[list[SceneEntry], Intrinsics]:
    d = Path(dataset_dir)
    poses = dict(load_poses(d / "poses.txt"))
    intrinsics = load_intrinsics(d / "intrinsics.json")
    entries = []
    for image_id, vec in load_descriptors(d / "descriptors.txt"):
        depth_path = d / "depth" / f"{image_id}.bin"
        feat_path = d / "features" / f"{image_id}.bin"
        entries.append(
            SceneEntry(
                image_id=image_id,
                pose=poses[image_id],
                descriptor=vec,
                depth_path=str(depth_path) if depth_path.exists() else None,
                features_path=str(feat_path) if feat_path.exists() else None,
            )
        )
    return entries, intrinsics


def load_scene_db(dataset_dir: str | Path) -> SceneDB:
    entries, intrinsics = load_entries(dataset_dir)
    return SceneDB(entries=entries, intrinsics=intrinsics)


def generate_dataset(
    out_dir: str | Path,
    scene_seed: int,
    n_refs: int,
    n_queries: int,
    mode: str = "dense",
    preset: str | None = None,
    intrinsics: Intrinsics | None = None,
    n_points: int = 2000,
) -> Path:
    """Simulate a scene and write refs/ and queries/ dataset directories.

    With preset "corners4" the first four references sit at the scene's
    x/y corners looking at the centroid (n_refs must be >= 4); remaining
    references and all queries are sampled in the requested mode.
    """
    from .camera import default_intrinsics

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = intrinsics or default_intrinsics()
    scene = make_scene(scene_seed, n_points=n_points)
    save_scene(out / "scene.json", scene)

    if preset == "corners4":
        if n_refs < 4:
            raise ValueError("corners4 preset needs n_refs >= 4")
        ref_poses = corner_poses(scene)
        extra = n_refs - 4
        if extra:
            ref_poses += sample_poses(scene, extra, mode, seed=scene_seed + 1, intrinsics=k)
    elif preset is None:
        ref_poses = sample_poses(scene, n_refs, mode, seed=scene_seed + 1, intrinsics=k)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    query_poses = sample_poses(scene, n_queries, mode, seed=scene_seed + 2, intrinsics=k)

    refs = [(f"ref{i:04d}", p) for i, p in enumerate(ref_poses)]
    queries = [(f"query{i:04d}", p) for i, p in enumerate(query_poses)]
    write_image_set(out / "refs", scene, refs, k)
    write_image_set(out / "queries", scene, queries, k)
    return out
