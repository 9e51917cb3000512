"""Small deterministic SVG plots (line overlays and labeled scatters).

Hand-rolled rather than pulling in a plotting stack: the CLI promises
byte-identical artifacts across reruns, and text-templated SVG makes that
trivial to guarantee.
"""

import math
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

WIDTH = 720
HEIGHT = 480
MARGIN_LEFT = 64
MARGIN_RIGHT = 16
MARGIN_TOP = 40
MARGIN_BOTTOM = 48


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw_step = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw_step))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw_step <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + step * 1e-9:
        ticks.append(round(t / step) * step)
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _fmt_tick(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:g}"


class _Canvas:
    def __init__(self, x_range, y_range, title, x_label, y_label, comment):
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        if self.x_hi <= self.x_lo:
            self.x_lo, self.x_hi = self.x_lo - 1.0, self.x_hi + 1.0
        if self.y_hi <= self.y_lo:
            self.y_lo, self.y_hi = self.y_lo - 1.0, self.y_hi + 1.0
        self.parts: list[str] = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
        ]
        if comment:
            self.parts.append(f"<!-- {escape(comment)} -->")
        self.parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
        self._axes(title, x_label, y_label)

    def px(self, x: float) -> float:
        span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        return MARGIN_LEFT + (x - self.x_lo) / (self.x_hi - self.x_lo) * span

    def py(self, y: float) -> float:
        span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        return HEIGHT - MARGIN_BOTTOM - (y - self.y_lo) / (self.y_hi - self.y_lo) * span

    def _axes(self, title, x_label, y_label):
        p = self.parts
        x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
        x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
        p.append(
            f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="16">'
            f"{escape(title)}</text>"
        )
        for t in _nice_ticks(self.x_lo, self.x_hi):
            px = _fmt(self.px(t))
            p.append(
                f'<line x1="{px}" y1="{y1}" x2="{px}" y2="{y0}" '
                f'stroke="#dddddd" stroke-width="1"/>'
            )
            p.append(
                f'<text x="{px}" y="{y0 + 18}" text-anchor="middle" font-size="11">'
                f"{_fmt_tick(t)}</text>"
            )
        for t in _nice_ticks(self.y_lo, self.y_hi):
            py = _fmt(self.py(t))
            p.append(
                f'<line x1="{x0}" y1="{py}" x2="{x1}" y2="{py}" '
                f'stroke="#dddddd" stroke-width="1"/>'
            )
            p.append(
                f'<text x="{x0 - 6}" y="{py}" text-anchor="end" dominant-baseline="middle" '
                f'font-size="11">{_fmt_tick(t)}</text>'
            )
        p.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            f'fill="none" stroke="#333333" stroke-width="1"/>'
        )
        p.append(
            f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
            f'font-size="12">{escape(x_label)}</text>'
        )
        p.append(
            f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {(y0 + y1) // 2})">{escape(y_label)}</text>'
        )

    def legend(self, labels: Sequence[str]):
        lx = MARGIN_LEFT + 10
        for i, label in enumerate(labels):
            ly = MARGIN_TOP + 14 + 16 * i
            color = PALETTE[i % len(PALETTE)]
            self.parts.append(
                f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
            self.parts.append(
                f'<text x="{lx + 24}" y="{ly + 4}" font-size="11">{escape(label)}</text>'
            )

    def finish(self) -> str:
        self.parts.append("</svg>")
        return "\n".join(self.parts) + "\n"


def _ranges(xs_all, ys_all):
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    x_pad = 0.02 * (x_hi - x_lo) or 1.0
    y_pad = 0.05 * (y_hi - y_lo) or 1.0
    return (x_lo - x_pad, x_hi + x_pad), (y_lo - y_pad, y_hi + y_pad)


def line_plot(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
    comment: str | None = None,
) -> str:
    """SVG overlay of (label, xs, ys) series with a shared legend."""
    if not series:
        raise ValueError("no series to plot")
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("series contain no points")
    canvas = _Canvas(*_ranges(xs_all, ys_all), title, x_label, y_label, comment)
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}" for x, y in zip(xs, ys))
        canvas.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
    canvas.legend([label for label, _, _ in series])
    return canvas.finish()


def scatter_plot(
    points: Sequence[tuple[str, float, float]],
    title: str,
    x_label: str,
    y_label: str,
    comment: str | None = None,
) -> str:
    """SVG scatter of labeled (x, y) points, one color per point."""
    if not points:
        raise ValueError("no points to plot")
    xs_all = [x for _, x, _ in points]
    ys_all = [y for _, _, y in points]
    canvas = _Canvas(*_ranges(xs_all, ys_all), title, x_label, y_label, comment)
    for i, (label, x, y) in enumerate(points):
        color = PALETTE[i % len(PALETTE)]
        px, py = _fmt(canvas.px(x)), _fmt(canvas.py(y))
        canvas.parts.append(f'<circle cx="{px}" cy="{py}" r="4" fill="{color}"/>')
        canvas.parts.append(
            f'<text x="{_fmt(canvas.px(x) + 7)}" y="{_fmt(canvas.py(y) - 7)}" '
            f'font-size="11">{escape(label)}</text>'
        )
    return canvas.finish()
