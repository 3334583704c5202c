"""Command-line entry points.

    reloc simulate     --scene-seed S --n-refs N --n-queries Q --out DIR
    reloc sample-pairs --db DIR --constraints dense|sparse --m M
    reloc localize     --db DIR/refs --queries DIR/queries --query ID --config FILE
    reloc evaluate     --db DIR/refs --queries DIR/queries --config FILE --out report.json
    reloc sweep        --db DIR/refs --queries DIR/queries --counts 4,8,16 --out sweep.csv
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset as ds
from .pipeline import PipelineConfig, evaluate, localize, sweep_references
from .scene_sim import PairConstraints, sample_training_pairs


def _load_config(path: str | None, args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(path) if path else PipelineConfig()
    overrides = {}
    for name in ("k", "min_spacing", "max_spacing"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[{"min_spacing": "d_lo", "max_spacing": "d_hi"}.get(name, name)] = value
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def _add_retrieval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None, help="references to retrieve")
    p.add_argument("--min-spacing", type=float, default=None, dest="min_spacing",
                   help="minimum camera-center spacing in meters")
    p.add_argument("--max-spacing", type=float, default=None, dest="max_spacing",
                   help="maximum camera-center spacing in meters")


def cmd_simulate(args) -> int:
    ds.generate_dataset(
        args.out,
        scene_seed=args.scene_seed,
        n_refs=args.n_refs,
        n_queries=args.n_queries,
        mode=args.mode,
        preset=args.preset,
    )
    print(f"wrote dataset to {args.out}")
    return 0


def cmd_sample_pairs(args) -> int:
    root = Path(args.db)
    scene = ds.load_scene(root / "scene.json")
    refs_dir = root / "refs" if (root / "refs").exists() else root
    poses = [p for _, p in ds.load_poses(refs_dir / "poses.txt")]
    constraints = (
        PairConstraints.dense() if args.constraints == "dense" else PairConstraints.sparse()
    )
    pairs = sample_training_pairs(scene, poses, constraints, args.m, seed=args.seed)
    lines = [f"{i} {j}" for i, j in pairs]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(pairs)} pairs to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_localize(args) -> int:
    db = ds.load_scene_db(args.db)
    queries, _ = ds.load_entries(args.queries)
    matches = [q for q in queries if q.image_id == args.query]
    if not matches:
        print(f"query {args.query!r} not found in {args.queries}", file=sys.stderr)
        return 2
    cfg = _load_config(args.config, args)
    result = localize(db, matches[0], cfg)
    print(json.dumps(result.to_record(), sort_keys=True))
    return 0 if result.ok else 1


def cmd_evaluate(args) -> int:
    db = ds.load_scene_db(args.db)
    queries, _ = ds.load_entries(args.queries)
    cfg = _load_config(args.config, args)
    report = evaluate(db, queries, cfg)
    if args.out:
        Path(args.out).write_text(report.to_json())
        print(f"wrote report to {args.out}")
    else:
        sys.stdout.write(report.to_json())
    return 0


def cmd_sweep(args) -> int:
    db = ds.load_scene_db(args.db)
    queries, _ = ds.load_entries(args.queries)
    cfg = _load_config(args.config, args)
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    pinned = tuple(p for p in (args.pin or "").split(",") if p)
    csv = sweep_references(db, queries, cfg, counts, pinned_ids=pinned)
    if args.out:
        Path(args.out).write_text(csv)
        print(f"wrote sweep to {args.out}")
    else:
        sys.stdout.write(csv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scene dataset")
    p.add_argument("--scene-seed", type=int, required=True)
    p.add_argument("--n-refs", type=int, required=True)
    p.add_argument("--n-queries", type=int, required=True)
    p.add_argument("--mode", choices=("dense", "sparse"), default="dense")
    p.add_argument("--preset", choices=("corners4",), default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample-pairs", help="sample constrained training pairs")
    p.add_argument("--db", required=True, help="dataset root (with scene.json)")
    p.add_argument("--constraints", choices=("dense", "sparse"), required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sample_pairs)

    p = sub.add_parser("localize", help="localize a single query")
    p.add_argument("--db", required=True, help="reference dataset directory")
    p.add_argument("--queries", required=True, help="query dataset directory")
    p.add_argument("--query", required=True, help="query image id")
    p.add_argument("--config", default=None)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="evaluate a query set")
    p.add_argument("--db", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate over reference subset sizes")
    p.add_argument("--db", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--counts", required=True, help="comma-separated sizes")
    p.add_argument("--pin", default=None, help="comma-separated ids always kept")
    p.add_argument("--out", default=None)
    _add_retrieval_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
