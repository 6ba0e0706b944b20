"""Small self-contained SVG plotting.

Only what the command line tool needs: line plots with optional log axes,
shaded min/max bands, and stacked bar charts.  No external plotting
dependency; output is a single static SVG string/file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

WIDTH = 640.0
HEIGHT = 420.0
MARGIN_L = 72.0
MARGIN_R = 18.0
MARGIN_T = 36.0
MARGIN_B = 56.0

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _tick_label(v: float, log: bool) -> str:
    if log:
        exp = round(math.log10(v))
        if abs(v - 10.0**exp) / 10.0**exp < 1e-9:
            return f"1e{exp}"
    if v == 0:
        return "0"
    a = abs(v)
    if 1e-3 <= a < 1e4:
        return f"{v:g}"
    return f"{v:.0e}"


def _linear_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(t)
        t += step
    return ticks


def _log_ticks(lo: float, hi: float) -> list[float]:
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    step = max(1, (hi_e - lo_e) // 8)
    return [10.0**e for e in range(lo_e, hi_e + 1, step) if lo <= 10.0**e <= hi]


@dataclass
class _Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    color: str
    dashed: bool = False
    marker: bool = True


@dataclass
class _Band:
    x: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    label: str
    color: str


@dataclass
class LinePlot:
    """Polyline chart with optional log axes and shaded bands."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    series: list[_Series] = field(default_factory=list)
    bands: list[_Band] = field(default_factory=list)

    def add(self, x, y, label: str = "", dashed: bool = False, marker: bool = True):
        color = PALETTE[(len(self.series) + len(self.bands)) % len(PALETTE)]
        self.series.append(
            _Series(np.asarray(x, float), np.asarray(y, float), label, color, dashed, marker)
        )
        return self

    def add_band(self, x, lo, hi, label: str = ""):
        color = PALETTE[(len(self.series) + len(self.bands)) % len(PALETTE)]
        self.bands.append(
            _Band(
                np.asarray(x, float),
                np.asarray(lo, float),
                np.asarray(hi, float),
                label,
                color,
            )
        )
        return self

    def _limits(self) -> tuple[float, float, float, float]:
        xs, ys = [], []
        for s in self.series:
            xs.append(s.x)
            ys.append(s.y)
        for b in self.bands:
            xs.append(b.x)
            ys.extend((b.lo, b.hi))
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        if self.xlog:
            x = x[x > 0]
        if self.ylog:
            y = y[y > 0]
        x = x[np.isfinite(x)]
        y = y[np.isfinite(y)]
        if x.size == 0 or y.size == 0:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1 = float(x.min()), float(x.max())
        y0, y1 = float(y.min()), float(y.max())
        if self.xlog and x1 <= x0:
            x1 = x0 * 10.0
        if self.ylog and y1 <= y0:
            y1 = y0 * 10.0
        if not self.xlog and x1 <= x0:
            x1 = x0 + 1.0
        if not self.ylog:
            pad = 0.05 * (y1 - y0 or 1.0)
            y0, y1 = y0 - pad, y1 + pad
        return x0, x1, y0, y1

    def _mapper(self):
        x0, x1, y0, y1 = self._limits()
        iw = WIDTH - MARGIN_L - MARGIN_R
        ih = HEIGHT - MARGIN_T - MARGIN_B

        def tx(v: float) -> float:
            if self.xlog:
                f = (math.log10(v) - math.log10(x0)) / (
                    math.log10(x1) - math.log10(x0)
                )
            else:
                f = (v - x0) / (x1 - x0)
            return MARGIN_L + f * iw

        def ty(v: float) -> float:
            if self.ylog:
                f = (math.log10(v) - math.log10(y0)) / (
                    math.log10(y1) - math.log10(y0)
                )
            else:
                f = (v - y0) / (y1 - y0)
            return HEIGHT - MARGIN_B - f * ih

        return tx, ty, (x0, x1, y0, y1)

    def render(self) -> str:
        tx, ty, (x0, x1, y0, y1) = self._mapper()
        out = [_svg_open(), _frame(self.title, self.xlabel, self.ylabel)]
        xticks = _log_ticks(x0, x1) if self.xlog else _linear_ticks(x0, x1)
        yticks = _log_ticks(y0, y1) if self.ylog else _linear_ticks(y0, y1)
        for t in xticks:
            px = tx(t)
            out.append(
                f'<line x1="{_fmt(px)}" y1="{_fmt(HEIGHT - MARGIN_B)}" '
                f'x2="{_fmt(px)}" y2="{_fmt(MARGIN_T)}" class="grid"/>'
            )
            out.append(
                f'<text x="{_fmt(px)}" y="{_fmt(HEIGHT - MARGIN_B + 16)}" '
                f'class="tick" text-anchor="middle">{_tick_label(t, self.xlog)}</text>'
            )
        for t in yticks:
            py = ty(t)
            out.append(
                f'<line x1="{_fmt(MARGIN_L)}" y1="{_fmt(py)}" '
                f'x2="{_fmt(WIDTH - MARGIN_R)}" y2="{_fmt(py)}" class="grid"/>'
            )
            out.append(
                f'<text x="{_fmt(MARGIN_L - 6)}" y="{_fmt(py + 4)}" '
                f'class="tick" text-anchor="end">{_tick_label(t, self.ylog)}</text>'
            )
        for b in self.bands:
            pts = [(tx(x), ty(max(l, y0) if self.ylog else l)) for x, l in zip(b.x, b.lo)]
            pts += [
                (tx(x), ty(max(h, y0) if self.ylog else h))
                for x, h in zip(b.x[::-1], b.hi[::-1])
            ]
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
            out.append(
                f'<polygon points="{path}" fill="{b.color}" opacity="0.25" '
                f'stroke="none"/>'
            )
        for s in self.series:
            keep = np.isfinite(s.x) & np.isfinite(s.y)
            if self.xlog:
                keep &= s.x > 0
            if self.ylog:
                keep &= s.y > 0
            x, y = s.x[keep], s.y[keep]
            path = " ".join(f"{_fmt(tx(a))},{_fmt(ty(b))}" for a, b in zip(x, y))
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            out.append(
                f'<polyline points="{path}" fill="none" stroke="{s.color}" '
                f'stroke-width="1.6"{dash}/>'
            )
            if s.marker and x.size <= 64:
                for a, b in zip(x, y):
                    out.append(
                        f'<circle cx="{_fmt(tx(a))}" cy="{_fmt(ty(b))}" r="2.6" '
                        f'fill="{s.color}"/>'
                    )
        out.append(self._legend())
        out.append("</svg>")
        return "\n".join(out)

    def _legend(self) -> str:
        entries = [(s.label, s.color, s.dashed) for s in self.series if s.label]
        entries += [(b.label, b.color, False) for b in self.bands if b.label]
        if not entries:
            return ""
        rows = []
        x = MARGIN_L + 10
        y = MARGIN_T + 14
        for i, (label, color, dashed) in enumerate(entries):
            yy = y + 16 * i
            dash = ' stroke-dasharray="6 4"' if dashed else ""
            rows.append(
                f'<line x1="{_fmt(x)}" y1="{_fmt(yy - 4)}" x2="{_fmt(x + 22)}" '
                f'y2="{_fmt(yy - 4)}" stroke="{color}" stroke-width="2"{dash}/>'
            )
            rows.append(
                f'<text x="{_fmt(x + 28)}" y="{_fmt(yy)}" class="tick">'
                f"{_esc(label)}</text>"
            )
        return "\n".join(rows)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
            fh.write("\n")


@dataclass
class StackedBars:
    """Stacked vertical bars: one bar per category, one layer per component."""

    categories: list[str]
    title: str = ""
    ylabel: str = ""
    label_rotate: float = 0.0
    layers: list[tuple[str, np.ndarray]] = field(default_factory=list)

    def add_layer(self, label: str, values) -> "StackedBars":
        values = np.asarray(values, float)
        if values.shape != (len(self.categories),):
            raise ValueError(
                f"layer '{label}' has {values.shape} values for "
                f"{len(self.categories)} categories"
            )
        self.layers.append((label, values))
        return self

    def render(self) -> str:
        totals = np.zeros(len(self.categories))
        for _, v in self.layers:
            totals += v
        top = float(totals.max()) if totals.size and totals.max() > 0 else 1.0
        top *= 1.08
        iw = WIDTH - MARGIN_L - MARGIN_R
        ih = HEIGHT - MARGIN_T - MARGIN_B
        n = max(len(self.categories), 1)
        slot = iw / n
        bar_w = slot * 0.6
        out = [_svg_open(), _frame(self.title, "", self.ylabel)]
        for t in _linear_ticks(0.0, top):
            py = HEIGHT - MARGIN_B - (t / top) * ih
            out.append(
                f'<line x1="{_fmt(MARGIN_L)}" y1="{_fmt(py)}" '
                f'x2="{_fmt(WIDTH - MARGIN_R)}" y2="{_fmt(py)}" class="grid"/>'
            )
            out.append(
                f'<text x="{_fmt(MARGIN_L - 6)}" y="{_fmt(py + 4)}" class="tick" '
                f'text-anchor="end">{_tick_label(t, False)}</text>'
            )
        for ci, cat in enumerate(self.categories):
            x = MARGIN_L + slot * ci + (slot - bar_w) / 2
            base = HEIGHT - MARGIN_B
            for li, (_, values) in enumerate(self.layers):
                h = (values[ci] / top) * ih
                base -= h
                color = PALETTE[li % len(PALETTE)]
                out.append(
                    f'<rect x="{_fmt(x)}" y="{_fmt(base)}" width="{_fmt(bar_w)}" '
                    f'height="{_fmt(h)}" fill="{color}" stroke="white" '
                    f'stroke-width="0.5"/>'
                )
            lx, ly = x + bar_w / 2, HEIGHT - MARGIN_B + 16
            if self.label_rotate:
                out.append(
                    f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" class="tick" '
                    f'text-anchor="end" transform="rotate({_fmt(self.label_rotate)} '
                    f'{_fmt(lx)} {_fmt(ly)})">{_esc(cat)}</text>'
                )
            else:
                out.append(
                    f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" class="tick" '
                    f'text-anchor="middle">{_esc(cat)}</text>'
                )
        x = MARGIN_L + 10
        y = MARGIN_T + 14
        for li, (label, _) in enumerate(self.layers):
            color = PALETTE[li % len(PALETTE)]
            yy = y + 16 * li
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(yy - 10)}" width="12" height="12" '
                f'fill="{color}"/>'
            )
            out.append(
                f'<text x="{_fmt(x + 18)}" y="{_fmt(yy)}" class="tick">'
                f"{_esc(label)}</text>"
            )
        out.append("</svg>")
        return "\n".join(out)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
            fh.write("\n")


def _svg_open() -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">'
        "<style>"
        "text{font-family:Helvetica,Arial,sans-serif;fill:#222}"
        ".title{font-size:14px;font-weight:bold}"
        ".label{font-size:12px}"
        ".tick{font-size:10px}"
        ".grid{stroke:#ddd;stroke-width:0.6}"
        "</style>"
        f'<rect x="0" y="0" width="{WIDTH:.0f}" height="{HEIGHT:.0f}" fill="white"/>'
    )


def _frame(title: str, xlabel: str, ylabel: str) -> str:
    parts = [
        f'<rect x="{_fmt(MARGIN_L)}" y="{_fmt(MARGIN_T)}" '
        f'width="{_fmt(WIDTH - MARGIN_L - MARGIN_R)}" '
        f'height="{_fmt(HEIGHT - MARGIN_T - MARGIN_B)}" fill="none" '
        f'stroke="#444" stroke-width="1"/>'
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="{_fmt(MARGIN_T - 12)}" class="title" '
            f'text-anchor="middle">{_esc(title)}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="{_fmt(HEIGHT - 14)}" class="label" '
            f'text-anchor="middle">{_esc(xlabel)}</text>'
        )
    if ylabel:
        cx, cy = 18, HEIGHT / 2
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" class="label" '
            f'text-anchor="middle" transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">'
            f"{_esc(ylabel)}</text>"
        )
    return "\n".join(parts)
