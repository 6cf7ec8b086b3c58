"""Minimal standalone SVG line and bar charts (no plotting library needed)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Series", "line_chart", "bar_chart"]

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=80, right=160, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    x: Sequence[float]
    y: Sequence[float]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


class _Frame:
    def __init__(self, xs: np.ndarray, ys: np.ndarray, logy: bool) -> None:
        self.logy = logy
        self.x0, self.x1 = float(xs.min()), float(xs.max())
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1.0, self.x1 + 1.0
        ys = np.log10(ys) if logy else ys
        self.y0, self.y1 = float(ys.min()), float(ys.max())
        if logy:
            self.y0, self.y1 = math.floor(self.y0), math.ceil(self.y1)
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x: float) -> float:
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y: float) -> float:
        y = math.log10(y) if self.logy else y
        return MARGIN["top"] + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.ph

    def axes(self, title: str, xlabel: str, ylabel: str) -> list[str]:
        L, T = MARGIN["left"], MARGIN["top"]
        out = [
            f'<rect x="{L}" y="{T}" width="{self.pw}" height="{self.ph}" fill="none" stroke="black"/>',
            f'<text x="{L + self.pw / 2}" y="{T - 15}" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<text x="{L + self.pw / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
            f'<text x="20" y="{T + self.ph / 2}" text-anchor="middle" font-size="13" '
            f'transform="rotate(-90 20 {T + self.ph / 2})">{escape(ylabel)}</text>',
        ]
        for t in _ticks(self.x0, self.x1):
            x = self.px(t)
            out.append(f'<line x1="{x:.1f}" y1="{T + self.ph}" x2="{x:.1f}" y2="{T + self.ph + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.1f}" y="{T + self.ph + 20}" text-anchor="middle" font-size="11">{t:g}</text>')
        yt = range(int(self.y0), int(self.y1) + 1) if self.logy else _ticks(self.y0, self.y1)
        for t in yt:
            y = self.py(10.0**t if self.logy else t)
            label = f"1e{t}" if self.logy else f"{t:g}"
            out.append(f'<line x1="{L - 5}" y1="{y:.1f}" x2="{L}" y2="{y:.1f}" stroke="black"/>')
            out.append(f'<text x="{L - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="11">{label}</text>')
        return out


def _legend(names: Sequence[str]) -> list[str]:
    x = WIDTH - MARGIN["right"] + 15
    out = []
    for k, name in enumerate(names):
        y = MARGIN["top"] + 15 + 18 * k
        c = COLORS[k % len(COLORS)]
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}" font-size="11">{escape(name)}</text>')
    return out


def _doc(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *body, "</svg>"]) + "\n"


def _collect(series: Mapping[str, Series], logy: bool) -> tuple[np.ndarray, np.ndarray]:
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in series.values()])
    ys = np.concatenate([np.asarray(s.y, dtype=float) for s in series.values()])
    keep = np.isfinite(xs) & np.isfinite(ys) & ((ys > 0) if logy else True)
    if not keep.any():
        raise ValueError("no finite points to plot")
    return xs[keep], ys[keep]


def line_chart(
    series: Mapping[str, Series], title: str = "", xlabel: str = "", ylabel: str = "", logy: bool = False
) -> str:
    """One polyline per series; non-positive values are dropped on a log axis."""
    frame = _Frame(*_collect(series, logy), logy)
    body = frame.axes(title, xlabel, ylabel)
    for k, s in enumerate(series.values()):
        pts = [
            f"{frame.px(x):.2f},{frame.py(y):.2f}"
            for x, y in zip(s.x, s.y)
            if math.isfinite(x) and math.isfinite(y) and (y > 0 or not logy)
        ]
        c = COLORS[k % len(COLORS)]
        body.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{c}" stroke-width="1.5"/>')
    return _doc(body + _legend(list(series)))


def bar_chart(series: Mapping[str, Series], title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Grouped vertical bars; each series gets a slice of every x slot."""
    xs, ys = _collect(series, False)
    frame = _Frame(xs, np.append(ys, 0.0), False)
    body = frame.axes(title, xlabel, ylabel)
    ux = np.unique(xs)
    slot = frame.pw / max(ux.size, 1) * 0.8
    w = slot / len(series)
    base = frame.py(0.0)
    for k, s in enumerate(series.values()):
        c = COLORS[k % len(COLORS)]
        for x, y in zip(s.x, s.y):
            left = frame.px(x) - slot / 2 + k * w
            top = min(frame.py(y), base)
            body.append(
                f'<rect x="{left:.2f}" y="{top:.2f}" width="{w:.2f}" height="{abs(base - frame.py(y)):.2f}" fill="{c}"/>'
            )
    return _doc(body + _legend(list(series)))
