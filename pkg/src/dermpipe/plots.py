"""Per-row training artifacts: loss/ROC data as CSV plus small static SVG
renderings (plain polylines, no plotting library)."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .metrics import RocCurve
from .trainer import EpochLog

__all__ = ["emit_plots", "render_polyline_svg", "data_to_pixel", "PLOT_GEOMETRY"]

# Fixed geometry so plotted coordinates are predictable.
PLOT_GEOMETRY = {
    "width": 480.0,
    "height": 360.0,
    "left": 56.0,
    "right": 16.0,
    "top": 24.0,
    "bottom": 44.0,
}

_SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def data_to_pixel(x: float, y: float, x_range: tuple[float, float], y_range: tuple[float, float]) -> tuple[float, float]:
    """Map a data point into SVG pixel coordinates of the plot area."""
    g = PLOT_GEOMETRY
    plot_w = g["width"] - g["left"] - g["right"]
    plot_h = g["height"] - g["top"] - g["bottom"]
    fx = (x - x_range[0]) / (x_range[1] - x_range[0])
    fy = (y - y_range[0]) / (y_range[1] - y_range[0])
    return g["left"] + fx * plot_w, g["top"] + (1.0 - fy) * plot_h


def _padded_range(values: Sequence[float]) -> tuple[float, float]:
    lo = min(values)
    hi = max(values)
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    return lo, hi


def _tick_values(lo: float, hi: float, n: int = 5) -> list[float]:
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_polyline_svg(
    series: Sequence[tuple[str, Sequence[tuple[float, float]]]],
    title: str,
    x_label: str,
    y_label: str,
    x_range: tuple[float, float] | None = None,
    y_range: tuple[float, float] | None = None,
) -> str:
    """Minimal line chart: axes with ticks, one polyline per series, and a
    small legend. Returns the SVG document as a string."""
    if not series or not any(points for _, points in series):
        raise ValueError("nothing to plot")
    all_x = [p[0] for _, points in series for p in points]
    all_y = [p[1] for _, points in series for p in points]
    xr = x_range if x_range is not None else _padded_range(all_x)
    yr = y_range if y_range is not None else _padded_range(all_y)
    g = PLOT_GEOMETRY
    x_axis_y = g["height"] - g["bottom"]

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{g["width"]:g}" height="{g["height"]:g}" '
        f'viewBox="0 0 {g["width"]:g} {g["height"]:g}">',
        f'<rect width="{g["width"]:g}" height="{g["height"]:g}" fill="white"/>',
        f'<text x="{g["width"] / 2:g}" y="16" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{escape(title)}</text>',
        # axes
        f'<line x1="{g["left"]:g}" y1="{g["top"]:g}" x2="{g["left"]:g}" y2="{x_axis_y:g}" stroke="black"/>',
        f'<line x1="{g["left"]:g}" y1="{x_axis_y:g}" x2="{g["width"] - g["right"]:g}" y2="{x_axis_y:g}" stroke="black"/>',
        f'<text x="{(g["left"] + g["width"] - g["right"]) / 2:g}" y="{g["height"] - 8:g}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{escape(x_label)}</text>',
        f'<text x="14" y="{(g["top"] + x_axis_y) / 2:g}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="11" transform="rotate(-90 14 {(g["top"] + x_axis_y) / 2:g})">{escape(y_label)}</text>',
    ]
    for tick in _tick_values(*xr):
        px, _ = data_to_pixel(tick, yr[0], xr, yr)
        parts.append(f'<line x1="{px:g}" y1="{x_axis_y:g}" x2="{px:g}" y2="{x_axis_y + 4:g}" stroke="black"/>')
        parts.append(
            f'<text x="{px:g}" y="{x_axis_y + 16:g}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="10">{tick:.3g}</text>'
        )
    for tick in _tick_values(*yr):
        _, py = data_to_pixel(xr[0], tick, xr, yr)
        parts.append(f'<line x1="{g["left"] - 4:g}" y1="{py:g}" x2="{g["left"]:g}" y2="{py:g}" stroke="black"/>')
        parts.append(
            f'<text x="{g["left"] - 7:g}" y="{py + 3:g}" text-anchor="end" font-family="sans-serif" '
            f'font-size="10">{tick:.3g}</text>'
        )
    for k, (name, points) in enumerate(series):
        color = _SERIES_COLORS[k % len(_SERIES_COLORS)]
        pixels = [data_to_pixel(x, y, xr, yr) for x, y in points]
        coords = " ".join(f"{px:.2f},{py:.2f}" for px, py in pixels)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        legend_y = g["top"] + 6 + 14 * k
        legend_x = g["width"] - g["right"] - 110
        parts.append(f'<line x1="{legend_x:g}" y1="{legend_y:g}" x2="{legend_x + 18:g}" y2="{legend_y:g}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{legend_x + 22:g}" y="{legend_y + 3:g}" font-family="sans-serif" '
            f'font-size="10">{escape(name)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def _write_roc(row_dir: Path, stem: str, curve: RocCurve, title: str) -> None:
    with (row_dir / f"{stem}.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in curve.points:
            writer.writerow([repr(float(fpr)), repr(float(tpr))])
    svg = render_polyline_svg(
        [(f"ROC (AUC {curve.auc:.3f})", list(curve.points))],
        title=title,
        x_label="false positive rate",
        y_label="true positive rate",
        x_range=(0.0, 1.0),
        y_range=(0.0, 1.0),
    )
    (row_dir / f"{stem}.svg").write_text(svg, encoding="utf-8")


def emit_plots(
    row_dir,
    logs: Sequence[EpochLog],
    val_roc: RocCurve | None,
    test_roc: RocCurve | None,
) -> None:
    """Write loss.csv/loss.svg and, when ROC curves are given (binary rows),
    roc_val and roc_test as CSV plus SVG."""
    if not logs:
        raise ValueError("need at least one epoch log")
    row_dir = Path(row_dir)
    row_dir.mkdir(parents=True, exist_ok=True)
    with (row_dir / "loss.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for log in logs:
            writer.writerow([log.epoch, repr(float(log.train_loss)), repr(float(log.val_loss))])
    series = [
        ("train loss", [(log.epoch, log.train_loss) for log in logs]),
        ("validation loss", [(log.epoch, log.val_loss) for log in logs]),
    ]
    svg = render_polyline_svg(series, title="Loss per epoch", x_label="epoch", y_label="loss")
    (row_dir / "loss.svg").write_text(svg, encoding="utf-8")
    if val_roc is not None:
        _write_roc(row_dir, "roc_val", val_roc, "ROC, validation set")
    if test_roc is not None:
        _write_roc(row_dir, "roc_test", test_roc, "ROC, test set")
