"""Minimal deterministic SVG 1.1 rendering.

Hand-rolled instead of a plotting library so that identical inputs always
produce byte-identical files (no embedded timestamps, random ids, or
library-version drift). Coordinates are formatted with fixed precision.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH = 720
HEIGHT = 480
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 55

# Okabe-Ito-ish palette, cycled by series position.
SERIES_COLORS = (
    "#0072b2",
    "#d55e00",
    "#009e73",
    "#cc79a7",
    "#e69f00",
    "#56b4e9",
    "#f0e442",
    "#000000",
)
BUCKET_COLORS = {
    "easy": "#4daf4a",
    "medium": "#377eb8",
    "hard": "#ff7f00",
    "impossible": "#e41a1c",
}


def _f(x: float) -> str:
    return f"{x:.2f}"


class SvgCanvas:
    def __init__(self, width: int = WIDTH, height: int = HEIGHT):
        self.width = width
        self.height = height
        self._parts: list[str] = []

    def rect(self, x, y, w, h, fill, opacity=None, stroke=None) -> None:
        extra = ""
        if opacity is not None:
            extra += f' fill-opacity="{_f(opacity)}"'
        if stroke is not None:
            extra += f' stroke="{stroke}"'
        self._parts.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}"{extra}/>'
        )

    def line(self, x1, y1, x2, y2, stroke, width=1.0) -> None:
        self._parts.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{stroke}" stroke-width="{_f(width)}"/>'
        )

    def polyline(self, points, stroke, width=1.5) -> None:
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
        self._parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{_f(width)}"/>'
        )

    def polygon(self, points, fill, opacity=0.2) -> None:
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
        self._parts.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="{_f(opacity)}"/>')

    def circle(self, cx, cy, r, fill, opacity=None) -> None:
        extra = f' fill-opacity="{_f(opacity)}"' if opacity is not None else ""
        self._parts.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="{fill}"{extra}/>')

    def text(self, x, y, content, size=12, anchor="start", fill="#000000") -> None:
        self._parts.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}" fill="{fill}">{escape(str(content))}</text>'
        )

    def to_string(self) -> str:
        body = "\n".join(self._parts)
        return (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
            f"{body}\n</svg>\n"
        )


class Frame:
    """Maps data coordinates into the plot area and draws axes."""

    def __init__(self, canvas: SvgCanvas, x_range, y_range):
        self.canvas = canvas
        self.x0, self.x1 = float(x_range[0]), float(x_range[1])
        self.y0, self.y1 = float(y_range[0]), float(y_range[1])
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.left = MARGIN_LEFT
        self.right = canvas.width - MARGIN_RIGHT
        self.top = MARGIN_TOP
        self.bottom = canvas.height - MARGIN_BOTTOM

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y: float) -> float:
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def draw_axes(self, title: str, x_label: str, y_label: str, x_int_ticks: bool = False) -> None:
        c = self.canvas
        c.line(self.left, self.bottom, self.right, self.bottom, "#000000")
        c.line(self.left, self.bottom, self.left, self.top, "#000000")
        c.text(c.width / 2, MARGIN_TOP / 2 + 6, title, size=14, anchor="middle")
        c.text(c.width / 2, c.height - 12, x_label, anchor="middle")
        c.text(16, c.height / 2, y_label, anchor="middle")
        for i in range(5):
            frac = i / 4
            xv = self.x0 + frac * (self.x1 - self.x0)
            yv = self.y0 + frac * (self.y1 - self.y0)
            xp, yp = self.px(xv), self.py(yv)
            c.line(xp, self.bottom, xp, self.bottom + 4, "#000000")
            c.line(self.left - 4, yp, self.left, yp, "#000000")
            x_text = str(int(round(xv))) if x_int_ticks else f"{xv:.2f}"
            c.text(xp, self.bottom + 18, x_text, size=10, anchor="middle")
            c.text(self.left - 8, yp + 4, f"{yv:.2f}", size=10, anchor="end")


def _legend(canvas: SvgCanvas, entries: list[tuple[str, str]]) -> None:
    x = MARGIN_LEFT + 12
    y = MARGIN_TOP + 8
    for label, color in entries:
        canvas.rect(x, y - 8, 14, 10, color)
        canvas.text(x + 20, y, label, size=11)
        y += 16


def render_learning_curves(series: list[dict], title: str) -> str:
    """Learning curves with mean lines and +-std replicate bands.

    Each series dict needs: label, sizes, mean, std.
    """
    canvas = SvgCanvas()
    all_sizes = [s for entry in series for s in entry["sizes"]]
    lo = min((m - d) for e in series for m, d in zip(e["mean"], e["std"])) if series else 0.0
    hi = max((m + d) for e in series for m, d in zip(e["mean"], e["std"])) if series else 1.0
    frame = Frame(
        canvas,
        (min(all_sizes, default=0), max(all_sizes, default=1)),
        (max(0.0, lo - 0.02), min(1.0, hi + 0.02)),
    )
    frame.draw_axes(title, "labeled examples", "accuracy", x_int_ticks=True)
    legend = []
    for pos, entry in enumerate(series):
        color = SERIES_COLORS[pos % len(SERIES_COLORS)]
        upper = [(frame.px(x), frame.py(m + d)) for x, m, d in zip(entry["sizes"], entry["mean"], entry["std"])]
        lower = [(frame.px(x), frame.py(m - d)) for x, m, d in zip(entry["sizes"], entry["mean"], entry["std"])]
        if len(upper) > 1:
            canvas.polygon(upper + lower[::-1], color)
        canvas.polyline(
            [(frame.px(x), frame.py(m)) for x, m in zip(entry["sizes"], entry["mean"])], color
        )
        legend.append((entry["label"], color))
    _legend(canvas, legend)
    return canvas.to_string()


def render_map_scatter(mu, sigma, correctness, title: str) -> str:
    """Dataset-map scatter: x = variability, y = mean confidence, color = correctness."""
    canvas = SvgCanvas()
    frame = Frame(canvas, (0.0, 0.5), (0.0, 1.0))
    frame.draw_axes(title, "variability (sigma)", "mean gold confidence (mu)")
    low = (228, 26, 28)
    high = (55, 126, 184)
    for m, s, c in zip(mu, sigma, correctness):
        t = min(max(float(c), 0.0), 1.0)
        rgb = tuple(round(a + t * (b - a)) for a, b in zip(low, high))
        canvas.circle(frame.px(float(s)), frame.py(float(m)), 2.0, "#%02x%02x%02x" % rgb, opacity=0.55)
    _legend(canvas, [("correct over epochs", "#3776b8"), ("never correct", "#e41a1c")])
    return canvas.to_string()


def render_bucket_bars(iterations, counts, bucket_names, title: str) -> str:
    """Stacked per-iteration composition bars; column heights are batch sizes."""
    canvas = SvgCanvas()
    totals = [sum(row) for row in counts]
    frame = Frame(canvas, (-0.5, max(len(iterations) - 0.5, 0.5)), (0, max(totals, default=1)))
    frame.draw_axes(title, "acquisition iteration", "examples", x_int_ticks=True)
    slot = (frame.right - frame.left) / max(len(iterations), 1)
    bar_w = slot * 0.7
    for col, (it, row) in enumerate(zip(iterations, counts)):
        x = frame.px(col) - bar_w / 2
        base = 0
        for name, count in zip(bucket_names, row):
            if count == 0:
                continue
            y_top = frame.py(base + count)
            height = frame.py(base) - y_top
            canvas.rect(x, y_top, bar_w, height, BUCKET_COLORS[name])
            base += count
    _legend(canvas, [(name, BUCKET_COLORS[name]) for name in bucket_names])
    return canvas.to_string()
