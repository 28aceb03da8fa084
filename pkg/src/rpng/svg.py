"""Minimal SVG writer for line plots and space-time diagrams."""

from __future__ import annotations

from xml.sax.saxutils import escape


class Canvas:
    """Maps data coordinates onto a fixed-size SVG with y pointing up."""

    def __init__(self, xlim, ylim, width=640, height=420, margin=48):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.width = width
        self.height = height
        self.margin = margin
        self.items: list[str] = []

    def px(self, x):
        span = self.width - 2 * self.margin
        return self.margin + (x - self.x0) / (self.x1 - self.x0) * span

    def py(self, y):
        span = self.height - 2 * self.margin
        return self.height - self.margin - (y - self.y0) / (self.y1 - self.y0) * span

    def polyline(self, xs, ys, stroke="black", width=1.0, dash=None):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{width}"{extra}/>')

    def circle(self, x, y, r=2.5, fill="black"):
        self.items.append(f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" r="{r}" fill="{fill}"/>')

    def text(self, x_px, y_px, s, size=12, anchor="middle", rotate=None):
        rot = f' transform="rotate({rotate} {x_px:.1f} {y_px:.1f})"' if rotate else ""
        self.items.append(f'<text x="{x_px:.1f}" y="{y_px:.1f}" font-size="{size}" '
                          f'text-anchor="{anchor}" font-family="sans-serif"{rot}>{escape(str(s))}</text>')

    def axes(self, xlabel="", ylabel="", title=""):
        m, w, h = self.margin, self.width, self.height
        self.items.append(f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" '
                          f'fill="none" stroke="#888"/>')
        self.text(m, h - m + 16, f"{self.x0:g}", size=10)
        self.text(w - m, h - m + 16, f"{self.x1:g}", size=10)
        self.text(m - 6, h - m, f"{self.y0:g}", size=10, anchor="end")
        self.text(m - 6, m + 4, f"{self.y1:g}", size=10, anchor="end")
        if xlabel:
            self.text(w / 2, h - 10, xlabel)
        if ylabel:
            self.text(14, h / 2, ylabel, rotate=-90)
        if title:
            self.text(w / 2, 20, title, size=14)

    def render(self) -> str:
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')
