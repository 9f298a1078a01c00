"""``sdrforge`` command line: generate, augment, evaluate, aggregate, preview."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import ConfigError, IoError, SdrError

SEED_ENV = "SDRFORGE_SEED"


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdrforge", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render a synthetic dataset")
    g.add_argument("--config", required=True, help="GenerationConfig JSON (or a {'concat': [...]} file)")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--seed", type=_u64, help=f"master seed (falls back to ${SEED_ENV}, then the config)")
    g.add_argument("--frames", type=_positive, help="number of frames (overrides dataset_size)")
    g.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    g.add_argument("--include-birds", action="store_true", help="emit bird annotations")
    g.add_argument("--include-distractors", action="store_true", help="emit distractor annotations")
    g.add_argument("--min-pixels", type=int, default=3, help="smallest annotated instance, in mask pixels")
    g.add_argument("--backend", choices=["cython", "numpy"], help="force a raster backend")

    a = sub.add_parser("augment", help="JPEG/noise augmentation of a generated dataset")
    a.add_argument("--dataset", required=True)
    a.add_argument("--plan", help="AugmentationPlan JSON (default: JPEG + noise on half the images)")

    e = sub.add_parser("evaluate", help="COCO box metrics for a results file")
    e.add_argument("--gt", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--lenient", action="store_true", help="tolerate unknown keys in the input files")
    e.add_argument("--label", default="", help="row label for the printed table")

    s = sub.add_parser("aggregate", help="mean and 95%% CI over repeated runs")
    s.add_argument("--runs", required=True, help="directory laid out as <group>/<run>.json")
    s.add_argument("--out", required=True, help="CSV output path (a .json twin is written alongside)")
    s.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("preview", help="contact sheet with ground-truth boxes")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cells", type=_positive, default=3)
    return ap


def cmd_generate(args) -> int:
    from .generate import generate_dataset, load_config_parts

    if not os.path.isfile(args.config):
        raise IoError(f"config not found: {args.config}")
    parts = load_config_parts(args.config)
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = _u64(os.environ[SEED_ENV])
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(SEED_ENV, "must be an unsigned 64-bit integer") from None
    if seed is not None:
        parts = [p.replace(master_seed=seed) for p in parts]
    frames = args.frames
    if frames is not None and len(parts) == 1:
        parts = [parts[0].replace(dataset_size=frames)]
    manifest = generate_dataset(parts, args.out, frames=frames, jobs=args.jobs, include_birds=args.include_birds,
                                include_distractors=args.include_distractors, min_pixels=args.min_pixels,
                                backend=args.backend)
    print(f"wrote {len(manifest.images)} images, {len(manifest.annotations)} annotations to {args.out}")
    return 0


def cmd_augment(args) -> int:
    from .augmentor import AugmentationPlan, apply_plan, load_plan

    if not os.path.isdir(args.dataset):
        raise IoError(f"dataset directory not found: {args.dataset}")
    plan = load_plan(args.plan) if args.plan else AugmentationPlan()
    report = apply_plan(plan, args.dataset)
    print(f"augmented {report['n_modified']} of {report['n_images']} images")
    return 0


def cmd_evaluate(args) -> int:
    from .cocoio import read_ground_truth, read_results
    from .metrics import evaluate, format_header, format_row

    manifest = read_ground_truth(args.gt, strict=not args.lenient)
    dets = read_results(args.pred, strict=not args.lenient)
    result = evaluate(manifest, dets)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=1)
        fh.write("\n")
    print(format_header(args.label and "dataset"))
    print(format_row(result, args.label))
    return 0


def cmd_aggregate(args) -> int:
    from .stats import aggregate_runs, format_table, load_runs, table_to_json, write_csv

    table = aggregate_runs(load_runs(args.runs), args.level)
    write_csv(table, args.out)
    with open(os.path.splitext(args.out)[0] + ".json", "w", encoding="utf-8") as fh:
        json.dump(table_to_json(table), fh, indent=1)
        fh.write("\n")
    print(format_table(table))
    return 0


def cmd_preview(args) -> int:
    from .generate import contact_sheet

    if not os.path.isdir(args.dataset):
        raise IoError(f"dataset directory not found: {args.dataset}")
    contact_sheet(args.dataset, args.out, args.cells)
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "augment": cmd_augment,
    "evaluate": cmd_evaluate,
    "aggregate": cmd_aggregate,
    "preview": cmd_preview,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SdrError as exc:
        print(f"sdrforge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"sdrforge: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
