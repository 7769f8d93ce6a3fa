"""Experiment spreadsheet parsing.

One CSV row describes one training run. Parsing is total over data lines:
every line yields either a validated :class:`ExperimentRow` or a
:class:`RowError`; a bad line never aborts the file.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .imaging import ColorSpace, ResizeFilter

__all__ = [
    "REQUIRED_COLUMNS",
    "PreSplit",
    "SampleN",
    "SplitSpec",
    "ExplicitWeights",
    "ComputedWeights",
    "ClassWeightSpec",
    "ExperimentRow",
    "RowError",
    "ParsedLine",
    "ExperimentFile",
    "split_csv_line",
    "parse_split",
    "parse_class_weights",
    "parse_experiment_file",
    "read_experiment_file",
    "format_split",
    "format_class_weights",
    "row_to_fields",
    "row_to_csv_line",
]

# Normalized names of the columns every experiment file must declare.
REQUIRED_COLUMNS = (
    "method",
    "dataset",
    "split",
    "epochs",
    "segment",
    "imgaug",
    "batchsize",
    "imgsize",
    "resizefilter",
    "colorspace",
    "classweights",
)


@dataclass(frozen=True)
class PreSplit:
    """Validation and test sets live in companion files next to the dataset."""


@dataclass(frozen=True)
class SampleN:
    """Draw `n` records each for validation and test out of the training set."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("split sample size must be >= 1")


SplitSpec = Union[PreSplit, SampleN]


@dataclass(frozen=True)
class ExplicitWeights:
    """Per-class loss weights given directly in the spreadsheet."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("class weight list must not be empty")
        if any(w < 0 for w in self.weights):
            raise ValueError("class weights must be nonnegative")
        if all(w == 0 for w in self.weights):
            raise ValueError("class weights must not all be zero")


@dataclass(frozen=True)
class ComputedWeights:
    """Weights derived from inverse class frequencies of the training set."""


ClassWeightSpec = Union[ExplicitWeights, ComputedWeights]


@dataclass(frozen=True)
class ExperimentRow:
    """One fully validated line of the experiment spreadsheet."""

    method: str
    dataset: str
    split: SplitSpec
    epochs: int
    segment: float
    imgaug: str
    batch_size: int
    img_size: int
    resize_filter: ResizeFilter
    color_space: ColorSpace
    class_weights: ClassWeightSpec
    # Unknown input columns, preserved verbatim so reports can echo them.
    extras: tuple[tuple[str, str], ...] = ()

    @property
    def segmentation_enabled(self) -> bool:
        # Zero and negative both mean "segmentation off".
        return self.segment > 0


@dataclass(frozen=True)
class RowError:
    """Why a spreadsheet line was rejected; `column` is empty for structural
    problems that are not attributable to a single field."""

    column: str
    reason: str


@dataclass(frozen=True)
class ParsedLine:
    row_number: int
    raw: tuple[str, ...]
    row: ExperimentRow | None
    error: RowError | None


@dataclass(frozen=True)
class ExperimentFile:
    header: tuple[str, ...]
    lines: tuple[ParsedLine, ...]


def _normalize_column(name: str) -> str:
    return re.sub(r"[\s_]+", "", name.strip().lower())


def split_csv_line(line: str) -> list[str]:
    """Split one CSV line on commas, honoring RFC 4180 quoting and leaving
    bracketed lists (`[0.2,0.8]`) intact. Unquoted fields are stripped."""
    fields: list[str] = []
    buf: list[str] = []
    in_quotes = False
    was_quoted = False
    depth = 0
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and line[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_quotes = False
            else:
                buf.append(ch)
            i += 1
            continue
        if ch == '"':
            in_quotes = True
            was_quoted = True
        elif ch == "[":
            depth += 1
            buf.append(ch)
        elif ch == "]":
            depth = max(0, depth - 1)
            buf.append(ch)
        elif ch == "," and depth == 0:
            fields.append("".join(buf) if was_quoted else "".join(buf).strip())
            buf = []
            was_quoted = False
        else:
            buf.append(ch)
        i += 1
    if in_quotes:
        raise ValueError("unterminated quoted field")
    fields.append("".join(buf) if was_quoted else "".join(buf).strip())
    return fields


def parse_split(token: str) -> SplitSpec:
    """`pre` selects companion-file splits, `n=<count>` samples from the
    training set."""
    t = token.strip().lower()
    if not t:
        raise ValueError("split must not be empty")
    if t == "pre":
        return PreSplit()
    if t.startswith("n="):
        try:
            n = int(t[2:])
        except ValueError:
            raise ValueError(f"bad sample count in split {token!r}") from None
        if n < 1:
            raise ValueError("split sample size must be >= 1")
        return SampleN(n)
    raise ValueError(f"unrecognized split {token!r} (expected 'pre' or 'n=<count>')")


def parse_class_weights(token: str) -> ClassWeightSpec:
    """`compute` derives weights from the data; `[w1,...,wk]` gives them
    explicitly."""
    t = token.strip()
    if t.lower() == "compute":
        return ComputedWeights()
    if t.startswith("[") and t.endswith("]"):
        inner = t[1:-1].strip()
        if not inner:
            raise ValueError("class weight list must not be empty")
        try:
            values = tuple(float(part) for part in inner.split(","))
        except ValueError:
            raise ValueError(f"unparseable class weight list {token!r}") from None
        if any(w < 0 for w in values):
            raise ValueError("class weights must be nonnegative")
        if all(w == 0 for w in values):
            raise ValueError("class weights must not all be zero")
        return ExplicitWeights(values)
    raise ValueError(f"unrecognized class weights {token!r} (expected 'compute' or '[w1,...,wk]')")


class _ColumnError(Exception):
    def __init__(self, column: str, reason: str):
        super().__init__(f"{column}: {reason}")
        self.column = column
        self.reason = reason


def _parse_int_at_least_one(token: str, column: str) -> int:
    try:
        value = int(token.strip())
    except ValueError:
        raise _ColumnError(column, f"not an integer: {token!r}") from None
    if value < 1:
        raise _ColumnError(column, "must be >= 1")
    return value


def _parse_real(token: str, column: str) -> float:
    try:
        return float(token.strip())
    except ValueError:
        raise _ColumnError(column, f"not a number: {token!r}") from None


def _build_row(header: tuple[str, ...], normalized: tuple[str, ...], fields: tuple[str, ...]) -> ExperimentRow:
    from .augment import is_preset  # deferred: augment pulls in heavier modules

    by_name = dict(zip(normalized, fields))

    def wrap(column: str, parser, token: str):
        try:
            return parser(token)
        except ValueError as exc:
            raise _ColumnError(column, str(exc)) from None

    method = by_name["method"].strip()
    if not method:
        raise _ColumnError("method", "must not be empty")
    dataset = by_name["dataset"].strip()
    if not dataset:
        raise _ColumnError("dataset", "must not be empty")
    imgaug = by_name["imgaug"].strip()
    if not is_preset(imgaug):
        raise _ColumnError("imgaug", f"unknown augmentation preset {imgaug!r}")
    extras = tuple(
        (orig, value)
        for orig, norm, value in zip(header, normalized, fields)
        if norm not in REQUIRED_COLUMNS
    )
    return ExperimentRow(
        method=method,
        dataset=dataset,
        split=wrap("split", parse_split, by_name["split"]),
        epochs=_parse_int_at_least_one(by_name["epochs"], "epochs"),
        segment=_parse_real(by_name["segment"], "segment"),
        imgaug=imgaug,
        batch_size=_parse_int_at_least_one(by_name["batchsize"], "batchsize"),
        img_size=_parse_int_at_least_one(by_name["imgsize"], "imgsize"),
        resize_filter=wrap("resizefilter", ResizeFilter.parse, by_name["resizefilter"]),
        color_space=wrap("colorspace", ColorSpace.parse, by_name["colorspace"]),
        class_weights=wrap("classweights", parse_class_weights, by_name["classweights"]),
        extras=extras,
    )


def read_experiment_file(path) -> ExperimentFile:
    """Parse the experiment spreadsheet, keeping the original header spelling
    and the verbatim field values alongside each parsed row."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"experiment file not found: {path}")
    raw_lines = path.read_text(encoding="utf-8").splitlines()
    if not raw_lines:
        raise ValueError(f"{path.name}: empty file (missing header)")
    header = tuple(split_csv_line(raw_lines[0]))
    normalized = tuple(_normalize_column(name) for name in header)
    seen: set[str] = set()
    for name in normalized:
        if name in seen:
            raise ValueError(f"{path.name}: duplicate column {name!r}")
        seen.add(name)
    missing = [name for name in REQUIRED_COLUMNS if name not in seen]
    if missing:
        raise ValueError(f"{path.name}: missing required columns: {', '.join(missing)}")

    lines: list[ParsedLine] = []
    row_number = 0
    for raw in raw_lines[1:]:
        if not raw.strip():
            continue
        row_number += 1
        fields = tuple(split_csv_line(raw))
        if len(fields) != len(header):
            err = RowError("", f"expected {len(header)} fields, got {len(fields)}")
            lines.append(ParsedLine(row_number, fields, None, err))
            continue
        try:
            row = _build_row(header, normalized, fields)
        except _ColumnError as exc:
            lines.append(ParsedLine(row_number, fields, None, RowError(exc.column, exc.reason)))
            continue
        lines.append(ParsedLine(row_number, fields, row, None))
    return ExperimentFile(header, tuple(lines))


def parse_experiment_file(path) -> list[tuple[int, ExperimentRow | RowError]]:
    """One entry per data line: the validated row, or the error that
    rejected it."""
    parsed = read_experiment_file(path)
    return [
        (line.row_number, line.row if line.row is not None else line.error)
        for line in parsed.lines
    ]


# --------------------------------------------------------------------------
# Canonical serialization (used by reports and round-trip checks)
# --------------------------------------------------------------------------

def _format_float(value: float) -> str:
    return repr(float(value))


def format_split(spec: SplitSpec) -> str:
    if isinstance(spec, PreSplit):
        return "pre"
    return f"n={spec.n}"


def format_class_weights(spec: ClassWeightSpec) -> str:
    if isinstance(spec, ComputedWeights):
        return "compute"
    return "[" + ",".join(_format_float(w) for w in spec.weights) + "]"


def row_to_fields(row: ExperimentRow) -> dict[str, str]:
    """Canonical string value per normalized column name (extras keyed by
    their original header spelling)."""
    fields = {
        "method": row.method,
        "dataset": row.dataset,
        "split": format_split(row.split),
        "epochs": str(row.epochs),
        "segment": _format_float(row.segment),
        "imgaug": row.imgaug,
        "batchsize": str(row.batch_size),
        "imgsize": str(row.img_size),
        "resizefilter": row.resize_filter.value,
        "colorspace": row.color_space.value,
        "classweights": format_class_weights(row.class_weights),
    }
    for name, value in row.extras:
        fields[name] = value
    return fields


def row_to_csv_line(row: ExperimentRow) -> str:
    """Serialize in canonical column order (required columns, then extras)."""
    fields = row_to_fields(row)
    ordered = [fields[name] for name in REQUIRED_COLUMNS]
    ordered.extend(value for _, value in row.extras)
    return ",".join(ordered)
