"""Minimal SVG 1.1 writer.

Formatting rule: every coordinate is world-to-pixel mapped and printed with
``%.6f``, so two runs with the same inputs give identical files whenever the
doubles agree to six decimals after scaling.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np


def _f(x) -> str:
    return "%.6f" % float(x)


class Canvas:
    def __init__(self, half_width: float, size: int = 600):
        self.half = float(half_width)
        self.size = size
        self.scale = size / (2 * self.half)
        self.items: list[str] = []

    def xy(self, p) -> tuple[str, str]:
        return _f((p[0] + self.half) * self.scale), _f((self.half - p[1]) * self.scale)

    def line(self, a, b, stroke="#1f4e79", width=1.0):
        (x1, y1), (x2, y2) = self.xy(a), self.xy(b)
        self.items.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                          f'stroke="{stroke}" stroke-width="{_f(width)}"/>')

    def dot(self, p, r=2.5, fill="#c0392b"):
        x, y = self.xy(p)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{_f(r)}" fill="{fill}"/>')

    def circle(self, centre, radius, stroke="#c0392b", width=1.5):
        x, y = self.xy(centre)
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{_f(radius * self.scale)}" fill="none" '
                          f'stroke="{stroke}" stroke-width="{_f(width)}"/>')

    def square(self, side, stroke="#333333", dash="6,4"):
        h = float(Fraction(side)) / 2
        x, y = self.xy((-h, h))
        w = _f(2 * h * self.scale)
        self.items.append(f'<rect x="{x}" y="{y}" width="{w}" height="{w}" fill="none" '
                          f'stroke="{stroke}" stroke-dasharray="{dash}"/>')

    def cells(self, cells: np.ndarray, delta: float, origin, fill="#7fa7c9"):
        """All cells as one path of closed squares."""
        w = _f(delta * self.scale)
        parts = []
        for c in cells:
            lo = np.asarray(origin) + c * delta
            x, y = self.xy((lo[0], lo[1] + delta))
            parts.append(f"M{x} {y}h{w}v{w}h-{w}z")
        self.items.append(f'<path d="{"".join(parts)}" fill="{fill}" stroke="none"/>')

    def text(self, p, s, size=14):
        x, y = self.xy(p)
        self.items.append(f'<text x="{x}" y="{y}" font-family="sans-serif" font-size="{size}">{s}</text>')

    def render(self) -> str:
        head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
                f'width="{self.size}" height="{self.size}" viewBox="0 0 {self.size} {self.size}">\n'
                f'<rect width="{self.size}" height="{self.size}" fill="white"/>\n')
        return head + "\n".join(self.items) + "\n</svg>\n"
