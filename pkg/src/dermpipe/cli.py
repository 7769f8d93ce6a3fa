"""Command-line front end: run experiment files, generate the synthetic
fixture dataset, and score mask directories."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .runner import RunConfig, make_synthetic_dataset, run_experiments
from .segment import evaluate_mask_dirs

DATA_ROOT_ENV = "DERM_DATA_ROOT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dermpipe",
        description="Spreadsheet-driven experiment pipeline for skin-lesion image classification.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run every row of an experiment CSV")
    run_p.add_argument("experiment_file", type=Path, help="experiment spreadsheet (CSV)")
    run_p.add_argument("--out", type=Path, required=True, help="output directory")
    run_p.add_argument(
        "--data-root",
        type=Path,
        default=None,
        help=f"directory holding dataset CSVs and images (default: ${DATA_ROOT_ENV})",
    )
    run_p.add_argument("--workers", type=int, default=1, help="augmentation worker threads")
    run_p.add_argument("--seed", type=int, default=0, help="seed for splits and shuffling")
    run_p.add_argument(
        "--positive-class",
        default=None,
        help="class counted as positive for sensitivity/specificity/AUC "
        "(default: second class in sorted label order)",
    )
    run_p.add_argument("--threshold", type=float, default=0.5, help="operating threshold for positive calls")
    run_p.add_argument(
        "--header",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="dataset CSVs start with a header line",
    )
    run_p.add_argument("--no-timing", action="store_true", help="leave the train_time column empty")
    run_p.add_argument(
        "--mask-dir",
        type=Path,
        default=None,
        help="directory of <image_stem>_mask.png files (default: <data-root>/masks)",
    )

    synth_p = sub.add_parser("synth", help="generate the two-class synthetic fixture dataset")
    synth_p.add_argument("out_dir", type=Path)
    synth_p.add_argument("--n", type=int, default=50, help="images per class")
    synth_p.add_argument("--size", type=int, default=32, help="square image side in pixels")
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--name", default="synthetic", help="dataset name (CSV file stem)")

    eval_p = sub.add_parser("eval-masks", help="Jaccard and pixel sensitivity/specificity per mask pair")
    eval_p.add_argument("pred_dir", type=Path)
    eval_p.add_argument("truth_dir", type=Path)
    return parser


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def _cmd_run(args) -> int:
    data_root = args.data_root
    if data_root is None:
        env = os.environ.get(DATA_ROOT_ENV)
        if not env:
            print(f"error: --data-root not given and ${DATA_ROOT_ENV} not set", file=sys.stderr)
            return 2
        data_root = Path(env)
    cfg = RunConfig(
        experiment_file=args.experiment_file,
        output_dir=args.out,
        data_root=data_root,
        workers=args.workers,
        seed=args.seed,
        positive_class=args.positive_class,
        operating_threshold=args.threshold,
        mask_dir=args.mask_dir,
        header=args.header,
        include_timing=not args.no_timing,
    )
    return run_experiments(cfg)


def _cmd_synth(args) -> int:
    index = make_synthetic_dataset(args.out_dir, args.n, args.size, args.seed, name=args.name)
    print(f"wrote {len(index.records)} images and {args.name}.csv to {args.out_dir}")
    return 0


def _cmd_eval_masks(args) -> int:
    results = evaluate_mask_dirs(args.pred_dir, args.truth_dir)
    print("name,jaccard,sensitivity,specificity")
    sums = {"jaccard": [], "sensitivity": [], "specificity": []}
    for entry in results:
        print(f"{entry['name']},{_fmt(entry['jaccard'])},{_fmt(entry['sensitivity'])},{_fmt(entry['specificity'])}")
        for key, bucket in sums.items():
            if entry[key] is not None:
                bucket.append(entry[key])
    means = {key: (sum(vals) / len(vals) if vals else None) for key, vals in sums.items()}
    print(f"mean,{_fmt(means['jaccard'])},{_fmt(means['sensitivity'])},{_fmt(means['specificity'])}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_eval_masks(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
