"""Experiment orchestration: run every spreadsheet row through the full
pipeline, capture per-row failures in the report, and write the output
directory (train_output.csv plus per-row loss/ROC artifacts)."""
from __future__ import annotations

import csv
import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import metrics
from .augment import DiskImageProvider, make_preset
from .dataset import DataSplit, DatasetIndex, class_proportions, compute_class_weights, load_dataset_index, resolve_split
from .exp_config import (
    ComputedWeights,
    ExperimentRow,
    ExplicitWeights,
    ParsedLine,
    read_experiment_file,
)
from .imaging import RasterImage, save_image
from .plots import emit_plots
from .segment import SegmentConfig
from .trainer import TrainConfig, TrainingError, build_classifier, predict_scores, train

__all__ = [
    "OUTPUT_COLUMNS",
    "RunConfig",
    "TrainReport",
    "run_experiments",
    "write_train_output",
    "make_synthetic_dataset",
]

logger = logging.getLogger(__name__)

# Appended after the echoed input columns, in this order.
OUTPUT_COLUMNS = (
    "val_size",
    "test_size",
    "class_proportions",
    "train_time",
    "val_accuracy",
    "val_sensitivity",
    "val_specificity",
    "test_accuracy",
    "test_sensitivity",
    "test_specificity",
    "test_roc_auc",
    "error",
)


@dataclass(frozen=True)
class RunConfig:
    experiment_file: Path
    output_dir: Path
    data_root: Path
    workers: int = 1
    seed: int = 0
    positive_class: str | None = None
    operating_threshold: float = 0.5
    mask_dir: Path | None = None
    header: bool = True
    include_timing: bool = True

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class TrainReport:
    """One output row: the input columns echoed verbatim plus metrics,
    timings, and the error message (empty on success)."""

    row_number: int
    inputs: tuple[tuple[str, str], ...]
    val_size: int | None = None
    test_size: int | None = None
    class_proportions: tuple[float, ...] | None = None
    train_time: float | None = None
    val_accuracy: float | None = None
    val_sensitivity: float | None = None
    val_specificity: float | None = None
    test_accuracy: float | None = None
    test_sensitivity: float | None = None
    test_specificity: float | None = None
    test_roc_auc: float | None = None
    error: str = ""


def _fmt_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        # coerce numpy scalars so the cell reads back as the same number
        return repr(float(value))
    if isinstance(value, tuple):
        return "[" + ",".join(repr(float(v)) for v in value) + "]"
    return str(value)


def write_train_output(reports: list[TrainReport], path, input_header=None) -> None:
    """Write the report CSV: input columns first (original order), then the
    fixed output columns. Values survive a CSV reparse unchanged."""
    if input_header is None:
        input_header = [name for name, _ in reports[0].inputs] if reports else []
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(input_header) + list(OUTPUT_COLUMNS))
        for report in reports:
            row = [value for _, value in report.inputs]
            row.extend(
                _fmt_value(getattr(report, column)) for column in OUTPUT_COLUMNS
            )
            writer.writerow(row)


def _safe_dirname(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


def _resolve_weights(row: ExperimentRow, split: DataSplit) -> tuple[float, ...]:
    classes = split.train.classes
    if isinstance(row.class_weights, ComputedWeights):
        return tuple(compute_class_weights(split.train))
    weights = row.class_weights.weights
    if len(weights) != len(classes):
        raise ValueError(
            f"{len(weights)} class weights given but dataset has {len(classes)} classes {classes}"
        )
    return weights


def _execute_row(cfg: RunConfig, row: ExperimentRow, report: TrainReport, row_dir: Path) -> None:
    index = load_dataset_index(row.dataset, cfg.data_root, header=cfg.header)
    split = resolve_split(index, row.split, cfg.seed, cfg.data_root, header=cfg.header)
    classes = split.train.classes
    if len({label for _, label in split.train.records}) < 2:
        raise TrainingError("single-class training data")
    weights = _resolve_weights(row, split)

    segment_cfg = None
    if row.segmentation_enabled:
        mask_dir = cfg.mask_dir if cfg.mask_dir is not None else Path(cfg.data_root) / "masks"
        segment_cfg = SegmentConfig(row.segment, Path(mask_dir))

    provider_kwargs = dict(
        data_root=cfg.data_root,
        img_size=row.img_size,
        resize_filter=row.resize_filter,
        color_space=row.color_space,
        segment_cfg=segment_cfg,
    )
    chain = make_preset(row.imgaug, DiskImageProvider(split.train, **provider_kwargs))
    val_provider = DiskImageProvider(split.validation, **provider_kwargs)
    test_provider = DiskImageProvider(split.test, **provider_kwargs)

    classifier = build_classifier(row.method)
    train_cfg = TrainConfig(
        epochs=row.epochs,
        batch_size=row.batch_size,
        class_weights=weights,
        classes=classes,
        seed=cfg.seed,
        operating_threshold=cfg.operating_threshold,
    )
    started = time.perf_counter()
    model, logs = train(classifier, chain, val_provider, train_cfg, workers=cfg.workers)
    train_time = time.perf_counter() - started

    val_scored = [(s, lbl) for s, lbl in predict_scores(model, val_provider, workers=cfg.workers) if s is not None]
    test_scored = [(s, lbl) for s, lbl in predict_scores(model, test_provider, workers=cfg.workers) if s is not None]
    if not val_scored or not test_scored:
        raise TrainingError("no scorable validation/test items")

    report.val_size = len(split.validation.records)
    report.test_size = len(split.test.records)
    report.class_proportions = tuple(class_proportions(split.train))
    report.train_time = train_time if cfg.include_timing else None

    val_roc = test_roc = None
    if len(classes) == 2:
        positive = cfg.positive_class if cfg.positive_class is not None else classes[1]
        if positive not in classes:
            raise ValueError(f"positive class {positive!r} not among dataset classes {classes}")
        # Models score class index 1; flip when the declared positive class
        # is the other one.
        if classes.index(positive) == 0:
            val_scored = [(1.0 - s, lbl) for s, lbl in val_scored]
            test_scored = [(1.0 - s, lbl) for s, lbl in test_scored]
        threshold = cfg.operating_threshold
        val_cm = metrics.confusion_at_threshold(val_scored, threshold, positive)
        test_cm = metrics.confusion_at_threshold(test_scored, threshold, positive)
        report.val_sensitivity, report.val_specificity, report.val_accuracy = metrics.sens_spec_acc(val_cm)
        report.test_sensitivity, report.test_specificity, report.test_accuracy = metrics.sens_spec_acc(test_cm)
        val_roc = metrics.roc_auc(val_scored, positive)
        test_roc = metrics.roc_auc(test_scored, positive)
        report.test_roc_auc = test_roc.auc
    else:
        # Multiclass rows report accuracy only.
        def _accuracy(scored) -> float:
            hits = sum(1 for dist, lbl in scored if classes[int(np.argmax(dist))] == lbl)
            return hits / len(scored)

        report.val_accuracy = _accuracy(val_scored)
        report.test_accuracy = _accuracy(test_scored)

    emit_plots(row_dir, logs, val_roc, test_roc)


def _run_line(cfg: RunConfig, line: ParsedLine, header: tuple[str, ...]) -> TrainReport:
    report = TrainReport(line.row_number, tuple(zip(header, line.raw)))
    if line.error is not None:
        column = line.error.column or "row"
        report.error = f"RowError[{column}]: {line.error.reason}"
        return report
    row = line.row
    row_dir = Path(cfg.output_dir) / f"row_{line.row_number}_{_safe_dirname(row.method)}"
    try:
        _execute_row(cfg, row, report, row_dir)
    except Exception as exc:
        logger.warning("row %d failed: %s: %s", line.row_number, type(exc).__name__, exc)
        report.error = f"{type(exc).__name__}: {exc}"
        # Metric fields must stay empty on error.
        for column in OUTPUT_COLUMNS[:-1]:
            setattr(report, column, None)
    return report


def run_experiments(cfg: RunConfig) -> int:
    """Process the experiment file row by row; a row failure fills that row's
    error column and processing continues. Returns 0 when the file itself was
    processed (even with row errors)."""
    experiment = read_experiment_file(cfg.experiment_file)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for line in experiment.lines:
        logger.info("row %d: %s", line.row_number, ",".join(line.raw))
        reports.append(_run_line(cfg, line, experiment.header))
    write_train_output(reports, out_dir / "train_output.csv", experiment.header)
    return 0


# --------------------------------------------------------------------------
# Synthetic fixture dataset
# --------------------------------------------------------------------------

def make_synthetic_dataset(
    out_dir,
    n_per_class: int,
    img_size: int = 32,
    seed: int = 0,
    name: str = "synthetic",
    noise_sigma: float = 30.0,
) -> DatasetIndex:
    """Write a two-class PNG dataset that is separable by mean intensity:
    class "dark" draws pixels around 60, class "bright" around 190 (clamped
    normal noise, deterministic per seed). Returns the loaded index."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for label, mean in (("dark", 60.0), ("bright", 190.0)):
        for k in range(n_per_class):
            pixels = rng.normal(mean, noise_sigma, size=(img_size, img_size, 3))
            file_name = f"{label}_{k:04d}.png"
            save_image(RasterImage.from_float(pixels), out_dir / file_name)
            records.append((file_name, label))
    with (out_dir / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "label"])
        writer.writerows(records)
    return load_dataset_index(name, out_dir)
