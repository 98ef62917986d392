"""CSV and hand-written SVG output for sweep results."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .sweep import SweepResult, SweepRow

CSV_HEADER = (
    "range_m",
    "pipeline",
    "mean_coverage",
    "mean_sum_rate_bps",
    "mean_q_total",
    "std_coverage",
    "std_sum_rate_bps",
    "std_q_total",
    "n",
)

_COLORS = {"cot": "#1f77b4", "non_cot": "#d62728"}
_PANELS = (("mean_coverage", "coverage ratio", 1.0), ("mean_sum_rate_bps", "sum rate (Mbps)", 1e-6))


def _num(v: float) -> str:
    # repr is the shortest round-tripping form, so identical floats give identical bytes
    return repr(float(v))


def sweep_csv(sweep: SweepResult) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in sweep.rows:
        vals = [r.mean_coverage, r.mean_sum_rate_bps, r.mean_q_total, r.std_coverage, r.std_sum_rate_bps, r.std_q_total]
        lines.append(",".join([_num(r.range_m), r.pipeline, *map(_num, vals), str(r.n)]))
    return "\n".join(lines) + "\n"


def read_sweep_csv(path: str | Path) -> SweepResult:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [
            SweepRow(
                float(d["range_m"]),
                d["pipeline"],
                *(float(d[k]) for k in CSV_HEADER[2:8]),
                int(d["n"]),
            )
            for d in reader
        ]
    return SweepResult(tuple(rows))


def _series(sweep: SweepResult) -> dict[str, list[SweepRow]]:
    out: dict[str, list[SweepRow]] = {}
    for r in sweep.rows:
        out.setdefault(r.pipeline, []).append(r)
    for rows in out.values():
        rows.sort(key=lambda r: r.range_m)
    return out


def sweep_svg(sweep: SweepResult, width: int = 880, height: int = 340) -> str:
    """Two panels (coverage, sum rate vs range), one polyline per pipeline each."""
    series = _series(sweep)
    ranges = [r.range_m for r in sweep.rows] or [200.0, 550.0]
    x_lo, x_hi = min(ranges), max(ranges)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad, gap = 55, 40
    pw = (width - 2 * pad - gap) / 2
    ph = height - 2 * pad
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for k, (key, title, scale) in enumerate(_PANELS):
        x0 = pad + k * (pw + gap)
        vals = [getattr(r, key) * scale for r in sweep.rows if math.isfinite(getattr(r, key))]
        y_hi = max(vals) * 1.05 if vals and max(vals) > 0 else 1.0
        if key == "mean_coverage":
            y_hi = 1.0

        def px(x, _x0=x0):
            return _x0 + (x - x_lo) / (x_hi - x_lo) * pw

        def py(y, _y_hi=y_hi):
            return pad + ph - y / _y_hi * ph

        out.append(f'<g class="panel" data-metric="{key}">')
        out.append(f'<rect x="{x0:.2f}" y="{pad}" width="{pw:.2f}" height="{ph}" fill="none" stroke="#444"/>')
        out.append(f'<text x="{x0 + pw / 2:.2f}" y="{pad - 12}" text-anchor="middle">{escape(title)}</text>')
        out.append(
            f'<text x="{x0 + pw / 2:.2f}" y="{height - 15}" text-anchor="middle">communication range (m)</text>'
        )
        for frac in (0.0, 0.5, 1.0):
            out.append(
                f'<text x="{x0 - 6:.2f}" y="{py(frac * y_hi) + 4:.2f}" text-anchor="end">{frac * y_hi:.3g}</text>'
            )
        for x in sorted(set(ranges)):
            out.append(f'<text x="{px(x):.2f}" y="{pad + ph + 14}" text-anchor="middle">{x:g}</text>')
        for name, rows in series.items():
            color = _COLORS.get(name, "#2ca02c")
            pts = [(r.range_m, getattr(r, key) * scale) for r in rows if math.isfinite(getattr(r, key))]
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            out.append(
                f'<polyline class="series" data-pipeline="{escape(name)}" data-metric="{key}" '
                f'points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
            for x, y in pts:
                out.append(
                    f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}" '
                    f'data-range="{x:g}" data-value="{_num(y)}"><title>{escape(name)} @ {x:g} m: {y:.6g}</title></circle>'
                )
        out.append("</g>")
    for i, name in enumerate(series):
        color = _COLORS.get(name, "#2ca02c")
        out.append(
            f'<text x="{pad + 10 + i * 90}" y="{pad + 16}" fill="{color}">{escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot_data(sweep: SweepResult, out_dir: str | Path, formats: tuple[str, ...] = ("csv", "svg")) -> list[Path]:
    """Write ``sweep.csv`` (always) and optionally ``sweep.svg``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "sweep.csv"]
    paths[0].write_text(sweep_csv(sweep), encoding="utf-8")
    if "svg" in formats:
        paths.append(out / "sweep.svg")
        paths[1].write_text(sweep_svg(sweep), encoding="utf-8")
    return paths
