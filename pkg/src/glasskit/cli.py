"""Command-line front-end: annotate / stats / eval / synth subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .losses import DEFAULT_DELTA
from .manifest import load_manifest
from .projection import CameraIntrinsics
from .synth import DEFAULT_DEPTH_RANGE, DEFAULT_INTRINSICS


def _find_manifest(path: Path) -> Path:
    return path / "manifest.yaml" if path.is_dir() else path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glasskit",
        description="Geometry and evaluation toolkit for monocular 3D glass detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="transform, fit and project a manifest")
    p.add_argument("--input", required=True, help="manifest file or dataset dir")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--parallel", type=int, default=1, metavar="N")

    p = sub.add_parser("stats", help="dataset statistics and histograms")
    p.add_argument("--input", required=True, help="manifest file or dataset dir")
    p.add_argument("--output", help="CSV output path")

    p = sub.add_parser("eval", help="metric or loss evaluation")
    p.add_argument("--input", required=True, help="prediction directory")
    p.add_argument("--gt", required=True, help="ground-truth manifest or dataset dir")
    p.add_argument("--mode", choices=("seg", "depth", "losses"), required=True)
    p.add_argument("--output", help="CSV output path")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                   help="plane-distance loss point offset (m)")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="binarization threshold for segmentation metrics")
    p.add_argument("--ber-convention", choices=("standard", "as-printed"),
                   default="standard")

    p = sub.add_parser("synth", help="generate a synthetic glass dataset")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1, help="number of scenes")
    p.add_argument("--category", choices=("coplanar", "multi_angle", "multi_occluded"),
                   default="multi_angle")
    p.add_argument("--plane-count", type=int, default=3)
    p.add_argument("--depth-min", type=float, default=DEFAULT_DEPTH_RANGE[0])
    p.add_argument("--depth-max", type=float, default=DEFAULT_DEPTH_RANGE[1])
    p.add_argument("--width", type=int, default=DEFAULT_INTRINSICS.width)
    p.add_argument("--height", type=int, default=DEFAULT_INTRINSICS.height)
    p.add_argument("--focal", type=float, default=DEFAULT_INTRINSICS.fx)
    p.add_argument("--parallel", type=int, default=1, metavar="N")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "annotate":
        manifest = load_manifest(_find_manifest(Path(args.input)))
        result = pipeline.annotate(manifest, args.output, parallel=args.parallel)
        for d in result.diagnostics:
            print(f"DIAGNOSTIC frame={d.frame} instance={d.instance} "
                  f"{d.error}: {d.message}", file=sys.stderr)
        print(f"annotated {len(manifest.frames)} frames -> {result.manifest_path}")
        return 1 if result.diagnostics else 0

    if args.command == "stats":
        manifest = load_manifest(_find_manifest(Path(args.input)))
        st = pipeline.stats(manifest)
        print(st.text())
        if args.output:
            Path(args.output).write_text(st.csv())
        return 0

    if args.command == "eval":
        gt = load_manifest(_find_manifest(Path(args.gt)))
        if args.mode == "seg":
            report = pipeline.eval_seg(args.input, gt, threshold=args.threshold,
                                       ber_convention=args.ber_convention)
        elif args.mode == "depth":
            report = pipeline.eval_depth(args.input, gt)
        else:
            report = pipeline.eval_losses(args.input, gt, delta=args.delta)
        print(report.text())
        if args.output:
            Path(args.output).write_text(report.csv())
        return 0

    if args.command == "synth":
        intr = CameraIntrinsics(fx=args.focal, fy=args.focal,
                                cx=args.width / 2.0, cy=args.height / 2.0,
                                width=args.width, height=args.height)
        path = pipeline.write_synth_dataset(
            args.output, seed=args.seed, count=args.count, category=args.category,
            plane_count=args.plane_count, depth_range=(args.depth_min, args.depth_max),
            intrinsics=intr, parallel=args.parallel)
        print(f"wrote {args.count} scenes -> {path}")
        return 0
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
