"""Hand-emitted SVG log-log charts (no charting dependency).

Output is a standalone SVG built from scatter circles, fitted lines, text,
and axis strokes only.  Rendering is a pure function of the rate report:
fixed canvas, fixed float formatting, no timestamps, so a given report
always produces byte-identical output.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

PANEL_W = 420
PANEL_H = 360
MARGIN_L = 64
MARGIN_R = 18
MARGIN_T = 44
MARGIN_B = 52
GAP = 28

PANEL_STATS = ("regret", "est_err_theta")
PANEL_TITLES = {
    "regret": "median regret",
    "est_err_theta": "median estimation error",
}
POINT_COLOR = "#1f5fa8"
LINE_COLOR = "#c23b22"
AXIS_COLOR = "#222222"
GRID_COLOR = "#cccccc"


def _fmt(value: float) -> str:
    """Fixed-width coordinate formatting keeps output byte-stable."""
    return f"{value:.2f}"


def _log_ticks(lo: float, hi: float) -> list[float]:
    """Decade ticks covering [lo, hi], at least the two endpoints."""
    first = math.floor(math.log10(lo))
    last = math.ceil(math.log10(hi))
    ticks = [10.0 ** e for e in range(first, last + 1)]
    return [t for t in ticks if lo / 1.0001 <= t <= hi * 1.0001] or [lo, hi]


def _tick_label(value: float) -> str:
    exp = math.log10(value)
    if abs(exp - round(exp)) < 1e-9:
        return f"1e{int(round(exp))}"
    return f"{value:.3g}"


class _Panel:
    """Maps data space (log-log) to pixel space for one chart panel."""

    def __init__(self, x_off: int, stat: str, entry: dict):
        self.x_off = x_off
        self.stat = stat
        self.entry = entry
        points = [(float(T), float(v)) for T, v in entry["fit_points"]]
        self.points = points
        xs = [p[0] for p in points] or [1.0, 10.0]
        ys = [p[1] for p in points] or [1.0, 10.0]
        self.x_lo, self.x_hi = min(xs), max(xs)
        self.y_lo, self.y_hi = min(ys), max(ys)
        if self.x_lo == self.x_hi:
            self.x_lo, self.x_hi = self.x_lo / 2.0, self.x_hi * 2.0
        if self.y_lo == self.y_hi:
            self.y_lo, self.y_hi = self.y_lo / 2.0, self.y_hi * 2.0
        # pixel frame of the plotting area
        self.px0 = x_off + MARGIN_L
        self.px1 = x_off + PANEL_W - MARGIN_R
        self.py0 = MARGIN_T
        self.py1 = PANEL_H - MARGIN_B

    def to_px(self, T: float, v: float) -> tuple[float, float]:
        fx = (math.log(T) - math.log(self.x_lo)) / (math.log(self.x_hi) - math.log(self.x_lo))
        fy = (math.log(v) - math.log(self.y_lo)) / (math.log(self.y_hi) - math.log(self.y_lo))
        return (
            self.px0 + fx * (self.px1 - self.px0),
            self.py1 - fy * (self.py1 - self.py0),
        )

    def render(self) -> list[str]:
        e = []
        slope = self.entry.get("slope")
        title = PANEL_TITLES.get(self.stat, self.stat)
        if slope is not None:
            title = f"{title}: slope {slope:.3f}"
        e.append(
            f'<text x="{_fmt((self.px0 + self.px1) / 2)}" y="{_fmt(self.py0 - 18)}" '
            f'text-anchor="middle" font-size="15" fill="{AXIS_COLOR}">{escape(title)}</text>'
        )
        # frame
        e.append(
            f'<rect x="{_fmt(self.px0)}" y="{_fmt(self.py0)}" '
            f'width="{_fmt(self.px1 - self.px0)}" height="{_fmt(self.py1 - self.py0)}" '
            f'fill="none" stroke="{AXIS_COLOR}" stroke-width="1"/>'
        )
        # x ticks: the horizons themselves (powers of two in practice)
        for T, _ in self.points:
            px, _py = self.to_px(T, self.y_lo)
            e.append(
                f'<line x1="{_fmt(px)}" y1="{_fmt(self.py0)}" x2="{_fmt(px)}" '
                f'y2="{_fmt(self.py1)}" stroke="{GRID_COLOR}" stroke-width="0.5"/>'
            )
            e.append(
                f'<text x="{_fmt(px)}" y="{_fmt(self.py1 + 16)}" text-anchor="middle" '
                f'font-size="10" fill="{AXIS_COLOR}">{escape(f"{int(T)}")}</text>'
            )
        # y ticks: decades
        for tick in _log_ticks(self.y_lo, self.y_hi):
            _px, py = self.to_px(self.x_lo, tick)
            e.append(
                f'<line x1="{_fmt(self.px0)}" y1="{_fmt(py)}" x2="{_fmt(self.px1)}" '
                f'y2="{_fmt(py)}" stroke="{GRID_COLOR}" stroke-width="0.5"/>'
            )
            e.append(
                f'<text x="{_fmt(self.px0 - 6)}" y="{_fmt(py + 3)}" text-anchor="end" '
                f'font-size="10" fill="{AXIS_COLOR}">{escape(_tick_label(tick))}</text>'
            )
        # fitted line across the horizon range
        slope_v = self.entry.get("slope")
        intercept = self.entry.get("intercept")
        if slope_v is not None and intercept is not None and self.points:
            y_a = math.exp(intercept + slope_v * math.log(self.x_lo))
            y_b = math.exp(intercept + slope_v * math.log(self.x_hi))
            (x1, y1) = self.to_px(self.x_lo, y_a)
            (x2, y2) = self.to_px(self.x_hi, y_b)
            e.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                f'stroke="{LINE_COLOR}" stroke-width="1.5"/>'
            )
        # scatter
        for T, v in self.points:
            px, py = self.to_px(T, v)
            e.append(
                f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{POINT_COLOR}"/>'
            )
        if not self.points:
            e.append(
                f'<text x="{_fmt((self.px0 + self.px1) / 2)}" '
                f'y="{_fmt((self.py0 + self.py1) / 2)}" text-anchor="middle" '
                f'font-size="12" fill="{AXIS_COLOR}">no positive medians</text>'
            )
        # axis labels
        e.append(
            f'<text x="{_fmt((self.px0 + self.px1) / 2)}" y="{_fmt(self.py1 + 34)}" '
            f'text-anchor="middle" font-size="12" fill="{AXIS_COLOR}">T (log scale)</text>'
        )
        return e


def render_rate_svg(report: dict) -> str:
    """Standalone SVG with log-log panels for regret and estimation error."""
    width = 2 * PANEL_W + GAP
    height = PANEL_H
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for i, stat in enumerate(PANEL_STATS):
        panel = _Panel(i * (PANEL_W + GAP), stat, report["stats"][stat])
        parts.extend(panel.render())
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_rate_svg(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_rate_svg(report))
