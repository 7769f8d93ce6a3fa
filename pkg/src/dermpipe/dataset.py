"""Dataset index files, train/validation/test splits, class statistics."""
from __future__ import annotations

import csv
import random
from dataclasses import dataclass, replace
from pathlib import Path

from .exp_config import PreSplit, SampleN, SplitSpec

__all__ = [
    "DatasetIndex",
    "DataSplit",
    "load_dataset_index",
    "resolve_split",
    "compute_class_weights",
    "class_proportions",
]


@dataclass(frozen=True)
class DatasetIndex:
    """Ordered (image path, label) records plus the class universe. Paths are
    relative to the configured data root."""

    name: str
    records: tuple[tuple[str, str], ...]
    classes: tuple[str, ...]

    def __post_init__(self) -> None:
        universe = set(self.classes)
        for path, label in self.records:
            if label not in universe:
                raise ValueError(f"record {path!r} has label {label!r} outside classes {self.classes}")

    def __len__(self) -> int:
        return len(self.records)

    def class_counts(self) -> list[int]:
        counts = {c: 0 for c in self.classes}
        for _, label in self.records:
            counts[label] += 1
        return [counts[c] for c in self.classes]


@dataclass(frozen=True)
class DataSplit:
    train: DatasetIndex
    validation: DatasetIndex
    test: DatasetIndex
    seed: int


def load_dataset_index(name: str, data_root, *, header: bool = True) -> DatasetIndex:
    """Read `<data_root>/<name>.csv` (columns: filename, label; extra columns
    ignored). Classes are the sorted distinct labels."""
    path = Path(data_root) / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if header and rows:
        rows = rows[1:]
    records: list[tuple[str, str]] = []
    first_data_line = 2 if header else 1
    for lineno, fields in enumerate(rows, start=first_data_line):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) < 2 or not fields[1].strip():
            raise ValueError(f"{path.name} line {lineno}: missing label")
        if not fields[0].strip():
            raise ValueError(f"{path.name} line {lineno}: missing file name")
        records.append((fields[0].strip(), fields[1].strip()))
    if not records:
        raise ValueError(f"{path.name}: no records")
    classes = tuple(sorted({label for _, label in records}))
    return DatasetIndex(name, tuple(records), classes)


def _check_disjoint(parts: dict[str, DatasetIndex]) -> None:
    names = list(parts)
    for i, a in enumerate(names):
        pa = {p for p, _ in parts[a].records}
        for b in names[i + 1:]:
            pb = {p for p, _ in parts[b].records}
            overlap = pa & pb
            if overlap:
                sample = sorted(overlap)[0]
                raise ValueError(f"{a} and {b} sets share {len(overlap)} image(s), e.g. {sample!r}")


def _stratum_quotas(index: DatasetIndex, n: int) -> dict[str, int]:
    """Largest-remainder allocation of n draws across classes, proportional
    to class frequency. Each class's quota is within one record of its exact
    proportional share."""
    counts = index.class_counts()
    total = len(index.records)
    exact = [n * c / total for c in counts]
    base = [int(x) for x in exact]
    leftover = n - sum(base)
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return dict(zip(index.classes, base))


def resolve_split(index: DatasetIndex, spec: SplitSpec, seed: int, data_root, *, header: bool = True) -> DataSplit:
    """Resolve the experiment's split column into three disjoint parts.

    PreSplit loads `<name>_val.csv` and `<name>_test.csv` verbatim. SampleN
    draws n records for validation and n for test by seeded stratified
    sampling without replacement; the remainder stays in train.
    """
    if isinstance(spec, PreSplit):
        validation = load_dataset_index(f"{index.name}_val", data_root, header=header)
        test = load_dataset_index(f"{index.name}_test", data_root, header=header)
        _check_disjoint({"train": index, "validation": validation, "test": test})
        universe = tuple(sorted(set(index.classes) | set(validation.classes) | set(test.classes)))
        return DataSplit(
            train=replace(index, classes=universe),
            validation=replace(validation, classes=universe),
            test=replace(test, classes=universe),
            seed=seed,
        )
    if isinstance(spec, SampleN):
        n = spec.n
        total = len(index.records)
        if 2 * n >= total:
            raise ValueError(f"cannot draw {n} validation + {n} test records from {total} records")
        quotas = _stratum_quotas(index, n)
        rng = random.Random(seed)
        val_positions: list[int] = []
        test_positions: list[int] = []
        for cls in index.classes:
            positions = [i for i, (_, label) in enumerate(index.records) if label == cls]
            quota = quotas[cls]
            if 2 * quota > len(positions):
                raise ValueError(
                    f"class {cls!r} has {len(positions)} records, fewer than its allotted 2x{quota}"
                )
            rng.shuffle(positions)
            val_positions.extend(positions[:quota])
            test_positions.extend(positions[quota:2 * quota])
        chosen = set(val_positions) | set(test_positions)
        train_records = tuple(index.records[i] for i in range(total) if i not in chosen)
        val_records = tuple(index.records[i] for i in sorted(val_positions))
        test_records = tuple(index.records[i] for i in sorted(test_positions))
        return DataSplit(
            train=DatasetIndex(index.name, train_records, index.classes),
            validation=DatasetIndex(f"{index.name}_val", val_records, index.classes),
            test=DatasetIndex(f"{index.name}_test", test_records, index.classes),
            seed=seed,
        )
    raise TypeError(f"unsupported split spec {spec!r}")


def compute_class_weights(index: DatasetIndex) -> list[float]:
    """Inverse-frequency weights, normalized to sum to one, ordered like
    `index.classes`."""
    counts = index.class_counts()
    for cls, count in zip(index.classes, counts):
        if count == 0:
            raise ValueError(f"class {cls!r} has no records")
    inverse = [1.0 / c for c in counts]
    total = sum(inverse)
    return [v / total for v in inverse]


def class_proportions(index: DatasetIndex) -> list[float]:
    """count_i / N per class, ordered like `index.classes`."""
    if not index.records:
        raise ValueError("empty index")
    total = len(index.records)
    return [c / total for c in index.class_counts()]
