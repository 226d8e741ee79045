"""Minimal dependency-free SVG line and grouped-bar charts."""

from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 64, 160, 36, 48


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def _bounds(values: Sequence[float], pad: float = 0.05) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


class _Frame:
    def __init__(self, title: str, xlabel: str, ylabel: str, xr, yr):
        self.xr, self.yr = xr, yr
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'font-family="sans-serif" font-size="11">',
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2 - RIGHT / 2}" y="20" text-anchor="middle" font-size="14">'
            f"{escape(title)}</text>",
            f'<text x="{LEFT + (W - LEFT - RIGHT) / 2}" y="{H - 10}" text-anchor="middle">'
            f"{escape(xlabel)}</text>",
            f'<text x="14" y="{TOP + (H - TOP - BOTTOM) / 2}" text-anchor="middle" '
            f'transform="rotate(-90 14 {TOP + (H - TOP - BOTTOM) / 2})">{escape(ylabel)}</text>',
        ]
        x0, y0, x1, y1 = LEFT, H - BOTTOM, W - RIGHT, TOP
        self.parts.append(
            f'<polyline points="{x0},{y1} {x0},{y0} {x1},{y0}" fill="none" stroke="black"/>'
        )
        for ty in _ticks(*yr):
            y = self.y(ty)
            self.parts.append(f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')
            self.parts.append(
                f'<text x="{x0 - 6}" y="{y + 4:.1f}" text-anchor="end">{ty:.3g}</text>'
            )

    def x(self, v: float) -> float:
        lo, hi = self.xr
        return LEFT + (v - lo) / (hi - lo) * (W - LEFT - RIGHT)

    def y(self, v: float) -> float:
        lo, hi = self.yr
        return H - BOTTOM - (v - lo) / (hi - lo) * (H - TOP - BOTTOM)

    def legend(self, labels: Sequence[str], dashes: Sequence[str] | None = None) -> None:
        for i, label in enumerate(labels):
            y = TOP + 8 + 16 * i
            x = W - RIGHT + 12
            dash = f' stroke-dasharray="{dashes[i]}"' if dashes and dashes[i] else ""
            color = PALETTE[i % len(PALETTE)] if dashes is None else PALETTE[(i // 2) % len(PALETTE)]
            self.parts.append(
                f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>'
            )
            self.parts.append(f'<text x="{x + 22}" y="{y + 4}">{escape(label)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    path: str | Path,
    title: str,
    xlabel: str,
    ylabel: str,
    dashed_pairs: bool = False,
) -> Path:
    """One polyline per ``(label, xs, ys)`` entry.

    With ``dashed_pairs`` consecutive series share a colour and every second
    one is dashed (used for the all-solved / none-solved pairs).
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    frame = _Frame(title, xlabel, ylabel, _bounds(xs_all, 0.0), _bounds(ys_all))
    for tx in _ticks(*frame.xr):
        frame.parts.append(
            f'<text x="{frame.x(tx):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle">{tx:.4g}</text>'
        )
    dashes = []
    for i, (_, xs, ys) in enumerate(series):
        if dashed_pairs:
            color, dash = PALETTE[(i // 2) % len(PALETTE)], ("4 3" if i % 2 else "")
        else:
            color, dash = PALETTE[i % len(PALETTE)], ""
        dashes.append(dash)
        pts = " ".join(f"{frame.x(x):.1f},{frame.y(y):.1f}" for x, y in zip(xs, ys))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        frame.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{style}/>'
        )
    frame.legend([label for label, _, _ in series], dashes if dashed_pairs else None)
    path = Path(path)
    path.write_text(frame.render())
    return path


def bar_chart(
    categories: Sequence[str],
    series: Sequence[tuple[str, Sequence[float | None]]],
    path: str | Path,
    title: str,
    xlabel: str,
    ylabel: str,
) -> Path:
    """Grouped bars: one group per category, one bar per series (None = no bar)."""
    vals = [v for _, ys in series for v in ys if v is not None]
    if not vals:
        raise ValueError("nothing to plot")
    lo, hi = _bounds(vals + [0.0])
    n_cat = len(categories)
    frame = _Frame(title, xlabel, ylabel, (0.0, float(n_cat)), (lo, hi))
    zero = frame.y(0.0)
    frame.parts.append(
        f'<line x1="{LEFT}" y1="{zero:.1f}" x2="{W - RIGHT}" y2="{zero:.1f}" stroke="#999"/>'
    )
    width = 0.8 / max(len(series), 1)
    for c, label in enumerate(categories):
        frame.parts.append(
            f'<text x="{frame.x(c + 0.5):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle">'
            f"{escape(label)}</text>"
        )
        for s, (_, ys) in enumerate(series):
            v = ys[c]
            if v is None:
                continue
            x_left = frame.x(c + 0.1 + s * width)
            x_right = frame.x(c + 0.1 + (s + 1) * width)
            top, bottom = sorted((frame.y(v), zero))
            frame.parts.append(
                f'<rect x="{x_left:.1f}" y="{top:.1f}" width="{x_right - x_left:.1f}" '
                f'height="{bottom - top:.1f}" fill="{PALETTE[s % len(PALETTE)]}"/>'
            )
    frame.legend([label for label, _ in series])
    path = Path(path)
    path.write_text(frame.render())
    return path
