"""Static report artifacts: CSV tables with a hash manifest, SVG charts and state maps.

SVG output is written by hand (no plotting library) so that identical inputs give
byte-identical files on every platform.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

from .csvio import read_csv, write_csv
from .ingest import PeriodKey

MANIFEST = "manifest.csv"

PALETTE = ("#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


class ReportError(ValueError):
    pass


class UnknownState(ReportError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"UnknownState:{code}")


def _n(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _svg_open(width: int, height: int) -> list[str]:
    return ['<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>']


# --- time series -------------------------------------------------------------

def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        lo, hi = lo - 0.05, hi + 0.05
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.floor(lo / step) * step
    last = math.ceil(hi / step) * step
    n = int(round((last - first) / step))
    return [round(first + i * step, 10) for i in range(n + 1)]


def render_timeseries(series: Sequence[Sequence[tuple[PeriodKey, float | None]]], labels: Sequence[str],
                      title: str = "", percent: bool = True, width: int = 960, height: int = 540) -> str:
    """One polyline per contiguous run of present points; ``None`` values break the line."""
    if len(series) != len(labels):
        raise ReportError("series and labels differ in length")
    values = [v for s in series for _, v in s if v is not None]
    if not values:
        raise ReportError("render_timeseries needs at least one non-empty series")
    periods = sorted({p for s in series for p, _ in s})
    xpos = {p: i for i, p in enumerate(periods)}

    left, right, top, bottom = 80, 30, 50, 70
    pw, ph = width - left - right, height - top - bottom
    ticks = nice_ticks(min(values), max(values))
    y0, y1 = ticks[0], ticks[-1]

    def sx(i: int) -> float:
        return left + (pw / 2 if len(periods) == 1 else i * pw / (len(periods) - 1))

    def sy(v: float) -> float:
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = _svg_open(width, height)
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="28" text-anchor="middle" font-size="18">{escape(title)}</text>')
    out.append('<g class="axes" stroke="#333333" stroke-width="1">')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/>')
    out.append("</g>")

    out.append('<g class="yticks" font-size="12" text-anchor="end">')
    for t in ticks:
        y = sy(t)
        label = f"{t * 100:.1f}%" if percent else f"{t:g}"
        out.append(f'<line x1="{left - 5}" y1="{_n(y)}" x2="{left + pw}" y2="{_n(y)}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{left - 8}" y="{_n(y + 4)}">{escape(label)}</text>')
    out.append("</g>")

    every = max(1, math.ceil(len(periods) / 24))
    out.append('<g class="xticks" font-size="11" text-anchor="end">')
    for i, p in enumerate(periods):
        if i % every:
            continue
        x = sx(i)
        out.append(f'<line x1="{_n(x)}" y1="{top + ph}" x2="{_n(x)}" y2="{top + ph + 5}" stroke="#333333"/>')
        out.append(f'<text x="{_n(x)}" y="{top + ph + 18}" transform="rotate(-40 {_n(x)} {top + ph + 18})">'
                   f'{escape(p.label)}</text>')
    out.append("</g>")

    for k, (s, label) in enumerate(zip(series, labels)):
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<g class="series" data-label="{escape(label)}">')
        run: list[str] = []
        points: list[str] = []
        for p, v in sorted(s, key=lambda pv: pv[0]):
            if v is None:
                if run:
                    out.append(_polyline(run, color))
                run = []
                continue
            xy = f"{_n(sx(xpos[p]))},{_n(sy(v))}"
            run.append(xy)
            points.append(xy)
        if run:
            out.append(_polyline(run, color))
        for xy in points:
            cx, cy = xy.split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
        out.append("</g>")

    out.append('<g class="legend" font-size="12">')
    for k, label in enumerate(labels):
        y = top + 10 + 18 * k
        out.append(f'<rect x="{left + 12}" y="{y}" width="14" height="4" fill="{PALETTE[k % len(PALETTE)]}"/>')
        out.append(f'<text x="{left + 32}" y="{y + 6}">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _polyline(points: list[str], color: str) -> str:
    return f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(points)}"/>'


# --- color ramps -------------------------------------------------------------

RGB = tuple[int, int, int]


@dataclass(frozen=True)
class ColorRamp:
    stops: tuple[tuple[float, RGB], ...]
    classification: str = "linear"  # "linear" or "quantile"
    classes: int = 5

    def __post_init__(self):
        fr = [f for f, _ in self.stops]
        if len(fr) < 2 or fr[0] != 0.0 or fr[-1] != 1.0 or fr != sorted(fr):
            raise ValueError("ramp stops must be sorted and span 0..1")
        if self.classification not in ("linear", "quantile"):
            raise ValueError(f"unknown classification {self.classification!r}")
        if self.classes < 1:
            raise ValueError("classes must be >= 1")

    def at(self, t: float) -> str:
        t = min(1.0, max(0.0, t))
        for (f0, c0), (f1, c1) in zip(self.stops, self.stops[1:]):
            if t <= f1:
                u = 0.0 if f1 == f0 else (t - f0) / (f1 - f0)
                rgb = tuple(round(a + (b - a) * u) for a, b in zip(c0, c1))
                return "#%02x%02x%02x" % rgb
        return "#%02x%02x%02x" % self.stops[-1][1]


SEQUENTIAL = ((0.0, (255, 245, 235)), (0.35, (253, 174, 107)), (0.7, (230, 85, 13)), (1.0, (127, 39, 4)))
DIVERGING = ((0.0, (33, 102, 172)), (0.5, (247, 247, 247)), (1.0, (178, 24, 43)))


def ramp(kind: str = "sequential", classification: str = "linear", classes: int = 5) -> ColorRamp:
    stops = {"sequential": SEQUENTIAL, "diverging": DIVERGING}.get(kind)
    if stops is None:
        raise ValueError(f"unknown ramp {kind!r}")
    return ColorRamp(stops, classification, classes)


def quantile_breaks(values: Sequence[float], k: int) -> list[float]:
    """Upper class bounds (nearest-rank quantiles); the last equals max(values)."""
    vs = sorted(values)
    n = len(vs)
    return [vs[min(n - 1, math.ceil(n * (i + 1) / k) - 1)] for i in range(k)]


@dataclass(frozen=True)
class Classified:
    fills: dict[str, str]
    legend: list[tuple[str, str]]  # (label, color)


def classify_values(values: Mapping[str, float], r: ColorRamp, percent: bool = True) -> Classified:
    if not values:
        return Classified({}, [])
    fmt_v = (lambda v: f"{v * 100:.2f}%") if percent else (lambda v: f"{v:.4g}")
    lo, hi = min(values.values()), max(values.values())
    if lo == hi:
        color = r.at(0.5)
        return Classified({s: color for s in values}, [(fmt_v(lo), color)])
    if r.classification == "linear":
        fills = {s: r.at((v - lo) / (hi - lo)) for s, v in values.items()}
        n = max(2, r.classes)
        legend = [(fmt_v(lo + (hi - lo) * i / (n - 1)), r.at(i / (n - 1))) for i in range(n)]
        return Classified(fills, legend)
    k = r.classes
    breaks = quantile_breaks(list(values.values()), k)
    colors = [r.at(i / (k - 1) if k > 1 else 0.5) for i in range(k)]
    fills = {}
    for s, v in values.items():
        idx = next(i for i, b in enumerate(breaks) if v <= b)
        fills[s] = colors[idx]
    legend = []
    prev = lo
    for b, c in zip(breaks, colors):
        legend.append((f"{fmt_v(prev)} - {fmt_v(b)}", c))
        prev = b
    return Classified(fills, legend)


# --- boundaries and choropleth ----------------------------------------------

Polygon = list[tuple[float, float]]


@dataclass(frozen=True)
class BoundarySet:
    shapes: dict[str, list[Polygon]]

    def __post_init__(self):
        for code, polys in self.shapes.items():
            if not polys:
                raise ValueError(f"state {code} has no polygons")
            for poly in polys:
                if len(poly) < 3:
                    raise ValueError(f"state {code} has a polygon with fewer than 3 vertices")
                for lon, lat in poly:
                    if not (-180 <= lon <= 180 and -90 <= lat <= 90):
                        raise ValueError(f"state {code} has out-of-range coordinate ({lon}, {lat})")

    def bbox(self) -> tuple[float, float, float, float]:
        lons = [p[0] for polys in self.shapes.values() for poly in polys for p in poly]
        lats = [p[1] for polys in self.shapes.values() for poly in polys for p in poly]
        return min(lons), min(lats), max(lons), max(lats)


def load_boundaries(path: str | Path | None = None) -> BoundarySet:
    if path is None:
        text = resources.files("sadindex").joinpath("data/us_states_simplified.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    shapes = {code.upper(): [[(float(x), float(y)) for x, y in poly] for poly in polys]
              for code, polys in raw.items()}
    return BoundarySet(dict(sorted(shapes.items())))


def render_choropleth(values: Mapping[str, float], bounds: BoundarySet, color_ramp: ColorRamp | None = None,
                      title: str = "", percent: bool = True, width: int = 960, height: int = 600) -> str:
    """Plate-carree state map; states without a value are hatched grey."""
    color_ramp = color_ramp or ramp()
    for code in sorted(values):
        if code not in bounds.shapes:
            raise UnknownState(code)
    cls = classify_values(values, color_ramp, percent)

    pad, top, legend_h = 20, 50, 60
    minlon, minlat, maxlon, maxlat = bounds.bbox()
    scale = min((width - 2 * pad) / (maxlon - minlon), (height - top - legend_h - pad) / (maxlat - minlat))
    xoff = pad + ((width - 2 * pad) - (maxlon - minlon) * scale) / 2

    def proj(lon: float, lat: float) -> str:
        return f"{_n(xoff + (lon - minlon) * scale)},{_n(top + (maxlat - lat) * scale)}"

    out = _svg_open(width, height)
    out.append('<defs><pattern id="nodata" patternUnits="userSpaceOnUse" width="6" height="6">'
               '<rect width="6" height="6" fill="#d9d9d9"/>'
               '<path d="M0,6 L6,0" stroke="#969696" stroke-width="1"/></pattern></defs>')
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="30" text-anchor="middle" font-size="18">{escape(title)}</text>')
    out.append('<g class="states" stroke="#ffffff" stroke-width="0.6">')
    for code, polys in bounds.shapes.items():
        fill = cls.fills.get(code, "url(#nodata)")
        tip = f"{code}: {values[code]:.6f}" if code in values else f"{code}: no data"
        out.append(f'<g id="state-{code}" fill="{fill}"><title>{escape(tip)}</title>')
        for poly in polys:
            d = "M" + " L".join(proj(lon, lat) for lon, lat in poly) + " Z"
            out.append(f'<path d="{d}"/>')
        out.append("</g>")
    out.append("</g>")

    out.append('<g class="legend" font-size="11">')
    ly = round(min(height - legend_h + 10, top + (maxlat - minlat) * scale + 20))
    items = cls.legend + [("no data", "url(#nodata)")]
    step = min(150, (width - 2 * pad) // max(1, len(items)))
    for i, (label, color) in enumerate(items):
        x = pad + i * step
        out.append(f'<rect x="{x}" y="{ly}" width="18" height="12" fill="{color}" stroke="#999999"/>')
        out.append(f'<text x="{x + 24}" y="{ly + 10}">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --- tables and manifest -----------------------------------------------------

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_manifest(out_dir: str | Path, artifacts: Iterable[str | Path]) -> Path:
    out_dir = Path(out_dir)
    rels = sorted({Path(a).resolve().relative_to(out_dir.resolve()).as_posix() for a in artifacts})
    rels = [r for r in rels if r != MANIFEST]
    return write_csv(out_dir / MANIFEST, ("path", "sha256"), [[r, sha256_file(out_dir / r)] for r in rels])


def read_manifest(path: str | Path) -> dict[str, str]:
    return {row["path"]: row["sha256"] for row in read_csv(path, ("path", "sha256"))}


def emit_tables(out_dir: str | Path, tables: Mapping[str, tuple[Sequence[str], Iterable[Sequence]]],
                artifacts: Iterable[str | Path] = ()) -> Path:
    """Write each ``name -> (header, rows)`` table as CSV, then a manifest of everything emitted."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror or exc}") from exc
    written = [write_csv(out_dir / name, header, rows) for name, (header, rows) in sorted(tables.items())]
    return write_manifest(out_dir, [*written, *artifacts])
