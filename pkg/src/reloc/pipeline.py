"""End-to-end localization pipeline and benchmark evaluation.

localize() chains retrieval, the stand-in relative-pose regressor with
Monte-Carlo aggregation, and RANSAC triangulation. evaluate() turns a
query set into median translation/rotation errors; sweep_references()
repeats the evaluation over reference subsets of growing size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import NotEnoughReferences, RelocError
from .geometry import Pose, camera_center, rotation_angle
from .retrieval import SceneDB, retrieve_references
from .scene_sim import NoiseModel, oracle_regressor
from .triangulate import RansacParams, aggregate_mc_samples, ransac_absolute_pose


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs of the full pipeline; defaults follow the reference
    operating point (5 retrieved images spaced within [0.05 m, 10 m],
    15-degree / [0.5, 2.0] inlier thresholds, 100 Monte-Carlo samples)."""

    k: int = 5
    d_lo: float = 0.05
    d_hi: float = 10.0
    alpha_max: float = 15.0
    s_min: float = 0.5
    s_max: float = 2.0
    dir_sigma: float = 0.0
    rot_sigma: float = 0.0
    scale_rel_sigma: float = 0.0
    outlier_prob: float = 0.0
    outlier_per_sample: bool = False
    mc_samples: int = 100
    use_scale: bool = True
    use_uncertainty: bool = True
    seed: int = 0

    def noise_model(self) -> NoiseModel:
        return NoiseModel(
            dir_sigma=self.dir_sigma,
            rot_sigma=self.rot_sigma,
            scale_rel_sigma=self.scale_rel_sigma,
            outlier_prob=self.outlier_prob,
            mc_samples=self.mc_samples,
            seed=self.seed,
            outlier_per_sample=self.outlier_per_sample,
        )

    def ransac_params(self) -> RansacParams:
        return RansacParams(alpha_max=self.alpha_max, s_min=self.s_min, s_max=self.s_max)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "PipelineConfig":
        types = {f.name: f.type for f in fields(PipelineConfig)}
        kwargs = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            t = types[key]
            if t == "bool":
                if value not in ("true", "false"):
                    raise ValueError(f"bad boolean for {key}: {value!r}")
                kwargs[key] = value == "true"
            elif t == "int":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return PipelineConfig(**kwargs)

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        return PipelineConfig.from_text(Path(path).read_text())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True)
class LocalizationResult:
    query_id: str
    pose: Pose | None
    retrieved: tuple[str, ...]
    chosen_pair: tuple[str, str] | None
    inliers: int | None
    mean_uncertainty: float | None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def to_record(self) -> dict:
        """JSON-serializable localization record (one line per query)."""
        rec: dict = {"query_id": self.query_id}
        if self.ok:
            t = self.pose.translation
            q = self.pose.rotation
            rec.update(
                tx=float(t[0]), ty=float(t[1]), tz=float(t[2]),
                qw=float(q.w), qx=float(q.x), qy=float(q.y), qz=float(q.z),
                chosen_pair=list(self.chosen_pair),
                inliers=self.inliers,
                mean_uncertainty=self.mean_uncertainty,
            )
        else:
            rec["failure"] = self.failure
        return rec


def localize(db: SceneDB, query, cfg: PipelineConfig) -> LocalizationResult:
    """Localize one query entry against the reference database.

    Expected degeneracies (too few usable references, collapsed estimates,
    untriangulatable geometry) come back as a failure record, never as an
    exception.
    """

    def failed(reason: str, retrieved=()) -> LocalizationResult:
        return LocalizationResult(
            query_id=query.image_id,
            pose=None,
            retrieved=tuple(retrieved),
            chosen_pair=None,
            inliers=None,
            mean_uncertainty=None,
            failure=reason,
        )

    try:
        ids = retrieve_references(db, query.descriptor, k=cfg.k, d_lo=cfg.d_lo, d_hi=cfg.d_hi)
    except RelocError as exc:
        return failed(f"retrieval: {exc}")

    nm = cfg.noise_model()
    refs = []
    usable_ids = []
    for rid in ids:
        entry = db.get(rid)
        try:
            samples = oracle_regressor(
                entry.pose, query.pose, nm, ref_id=rid, query_id=query.image_id
            )
            est = samples[0] if nm.mc_samples == 1 else aggregate_mc_samples(samples)
        except RelocError:
            continue  # reference carries no usable signal for this query
        refs.append((entry.pose, est))
        usable_ids.append(rid)

    if len(refs) < 2:
        return failed(
            f"{NotEnoughReferences.__name__}: {len(refs)} usable of {len(ids)} retrieved",
            retrieved=ids,
        )
    try:
        pose, diag = ransac_absolute_pose(
            refs,
            cfg.ransac_params(),
            use_scale=cfg.use_scale,
            use_uncertainty=cfg.use_uncertainty,
        )
    except RelocError as exc:
        return failed(f"{type(exc).__name__}: {exc}", retrieved=ids)

    i, j = diag.chosen_pair
    return LocalizationResult(
        query_id=query.image_id,
        pose=pose,
        retrieved=tuple(ids),
        chosen_pair=(usable_ids[i], usable_ids[j]),
        inliers=diag.inliers,
        mean_uncertainty=diag.mean_uncertainty,
    )


@dataclass(frozen=True)
class EvalReport:
    per_query: tuple[dict, ...]
    median_translation: float | None
    median_rotation: float | None
    failure_count: int

    def to_json(self) -> str:
        payload = {
            "per_query": list(self.per_query),
            "median_translation_m": self.median_translation,
            "median_rotation_deg": self.median_rotation,
            "failure_count": self.failure_count,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def lower_median(values: list[float]) -> float | None:
    """Median with the lower of the two middles on even counts."""
    if not values:
        return None
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def evaluate(db: SceneDB, queries, cfg: PipelineConfig) -> EvalReport:
    """Run localize() over all queries and summarize median errors.

    Medians cover successful queries only; failures are counted, recorded
    per query, and never abort the batch.
    """
    if len(queries) == 0:
        raise ValueError("need at least one query")
    per_query = []
    t_errors, r_errors = [], []
    failures = 0
    for query in queries:
        result = localize(db, query, cfg)
        if not result.ok:
            failures += 1
            per_query.append({"query_id": query.image_id, "failure": result.failure})
            continue
        t_err = float(np.linalg.norm(camera_center(result.pose) - camera_center(query.pose)))
        r_err = rotation_angle(result.pose.rotation, query.pose.rotation)
        t_errors.append(t_err)
        r_errors.append(r_err)
        per_query.append(
            {
                "query_id": query.image_id,
                "translation_error_m": t_err,
                "rotation_error_deg": r_err,
                "inliers": result.inliers,
                "chosen_pair": list(result.chosen_pair),
            }
        )
    return EvalReport(
        per_query=tuple(per_query),
        median_translation=lower_median(t_errors),
        median_rotation=lower_median(r_errors),
        failure_count=failures,
    )


def sweep_references(
    db: SceneDB,
    queries,
    cfg: PipelineConfig,
    counts: list[int],
    pinned_ids: tuple[str, ...] = (),
) -> str:
    """Evaluate on seeded random reference subsets of the given sizes.

    `pinned_ids` are always part of the subset (e.g. the four corner
    references), mirroring the add-references-to-a-fixed-core protocol.
    Returns CSV with header count,median_t_m,median_r_deg,failures.
    """
    all_ids = [e.image_id for e in db.entries]
    for pid in pinned_ids:
        if pid not in all_ids:
            raise ValueError(f"pinned id {pid!r} not in database")
    rows = ["count,median_t_m,median_r_deg,failures"]
    for count in counts:
        if count > len(db) or count < len(pinned_ids):
            raise ValueError(f"count {count} out of range for db of {len(db)}")
        free = [i for i in all_ids if i not in pinned_ids]
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, count]))
        extra = rng.choice(len(free), size=count - len(pinned_ids), replace=False)
        keep = set(pinned_ids) | {free[i] for i in extra}
        sub = SceneDB(
            entries=[e for e in db.entries if e.image_id in keep],
            intrinsics=db.intrinsics,
        )
        report = evaluate(sub, queries, cfg)
        mt = report.median_translation
        mr = report.median_rotation
        rows.append(
            f"{count},{repr(mt) if mt is not None else 'nan'},"
            f"{repr(mr) if mr is not None else 'nan'},{report.failure_count}"
        )
    return "\n".join(rows) + "\n"
