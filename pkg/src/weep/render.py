"""Masks and plots as plain-text files: P2 graymaps and SVG."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

from weep.tile_store import SlideBag

__all__ = [
    "BACKGROUND",
    "UNSELECTED",
    "SELECTED",
    "mask_grid",
    "render_mask",
    "render_weep_plot",
    "render_histogram",
]

BACKGROUND = 0
UNSELECTED = 128
SELECTED = 255

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 64, 24, 24, 56


def mask_grid(bag: SlideBag, selected: Iterable[str]) -> list[list[int]]:
    """Tile-grid mask as rows of gray levels (row index = grid_y)."""
    selected = set(selected)
    ids = {t.tile_id for t in bag.tiles}
    unknown = sorted(selected - ids)
    if unknown:
        raise ValueError(f"selected tile {unknown[0]!r} is not in slide {bag.slide_id!r}")
    width = max(t.grid_x for t in bag.tiles) + 1
    height = max(t.grid_y for t in bag.tiles) + 1
    grid = [[BACKGROUND] * width for _ in range(height)]
    for t in bag.tiles:
        grid[t.grid_y][t.grid_x] = SELECTED if t.tile_id in selected else UNSELECTED
    return grid


def render_mask(bag: SlideBag, selected: Iterable[str]) -> bytes:
    """ASCII P2 graymap with one pixel per grid cell.

    Empty cells are 0, unselected tiles 128 and selected tiles 255.
    """
    grid = mask_grid(bag, selected)
    lines = ["P2", f"{len(grid[0])} {len(grid)}", "255"]
    lines += [" ".join(str(v) for v in row) for row in grid]
    return ("\n".join(lines) + "\n").encode("ascii")


def _num(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _svg_open(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title)}</title>",
    ]


class _Axes:
    def __init__(self, ymin: float, ymax: float):
        self.ymin, self.ymax = ymin, ymax
        self.x0, self.x1 = LEFT, WIDTH - RIGHT
        self.y0, self.y1 = HEIGHT - BOTTOM, TOP

    def x(self, pct: float) -> float:
        return self.x0 + (self.x1 - self.x0) * pct / 100.0

    def y(self, v: float) -> float:
        span = self.ymax - self.ymin
        return self.y0 + (self.y1 - self.y0) * (v - self.ymin) / span

    def frame(self, xlabel: str, ylabel: str, yticks: Sequence[float], yfmt) -> list[str]:
        out = [
            '<g class="axes" stroke="#000000" stroke-width="1">',
            f'<line x1="{_num(self.x0)}" y1="{_num(self.y0)}" x2="{_num(self.x1)}" y2="{_num(self.y0)}"/>',
            f'<line x1="{_num(self.x0)}" y1="{_num(self.y0)}" x2="{_num(self.x0)}" y2="{_num(self.y1)}"/>',
            "</g>",
            '<g class="ticks" text-anchor="middle">',
        ]
        for pct in range(0, 101, 20):
            out.append(
                f'<text x="{_num(self.x(pct))}" y="{_num(self.y0 + 18)}">{pct}%</text>'
            )
        out.append("</g>")
        out.append('<g class="ticks" text-anchor="end">')
        for v in yticks:
            out.append(f'<text x="{_num(self.x0 - 6)}" y="{_num(self.y(v) + 4)}">{yfmt(v)}</text>')
        out.append("</g>")
        out.append(
            f'<text class="xlabel" x="{_num((self.x0 + self.x1) / 2)}" y="{_num(HEIGHT - 12)}" '
            f'text-anchor="middle">{escape(xlabel)}</text>'
        )
        cy = (self.y0 + self.y1) / 2
        out.append(
            f'<text class="ylabel" x="16" y="{_num(cy)}" text-anchor="middle" '
            f'transform="rotate(-90 16 {_num(cy)})">{escape(ylabel)}</text>'
        )
        return out


def render_weep_plot(
    trajectories: Sequence[tuple[str, Sequence[float]]],
    o: float,
    highlight: Iterable[str] | None = None,
    n_tiles: Mapping[str, int] | None = None,
) -> str:
    """Slide score versus percent of tiles removed, one polyline per slide.

    ``n_tiles`` gives each slide's tile count for the x axis; a slide without
    an entry is spread over ``len(trajectory) - 1`` removals. Highlighted
    slides are drawn last in black with a heavier stroke.
    """
    if not trajectories:
        raise ValueError("no trajectories to plot")
    highlight = set(highlight or ())
    n_tiles = n_tiles or {}
    values = [v for _, traj in trajectories for v in traj] + [o]
    ymin, ymax = min(0.0, min(values)), max(1.0, max(values))
    if ymax == ymin:
        ymax = ymin + 1.0
    ax = _Axes(ymin, ymax)

    out = _svg_open("WEEP plot")
    yticks = [ymin + (ymax - ymin) * i / 5 for i in range(6)]
    out += ax.frame("Tiles removed (%)", "Slide-level score", yticks, lambda v: f"{v:.1f}")

    def polyline(slide_id: str, traj: Sequence[float], css: str, stroke: str, width: str) -> str:
        n = n_tiles.get(slide_id) or max(len(traj) - 1, 1)
        pts = " ".join(f"{_num(ax.x(100.0 * i / n))},{_num(ax.y(v))}" for i, v in enumerate(traj))
        return (
            f'<polyline class="{css}" data-slide={quoteattr(slide_id)} fill="none" '
            f'stroke="{stroke}" stroke-width="{width}" points="{pts}"/>'
        )

    out.append('<g class="trajectories">')
    for slide_id, traj in trajectories:
        if slide_id not in highlight:
            out.append(polyline(slide_id, traj, "trajectory", "#9e9e9e", "1"))
    for slide_id, traj in trajectories:
        if slide_id in highlight:
            out.append(polyline(slide_id, traj, "trajectory highlight", "#000000", "2"))
    out.append("</g>")
    out.append(
        f'<line class="threshold" x1="{_num(ax.x0)}" y1="{_num(ax.y(o))}" x2="{_num(ax.x1)}" '
        f'y2="{_num(ax.y(o))}" stroke="#d62728" stroke-width="1.5" stroke-dasharray="6 4"/>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_histogram(bins: Sequence[tuple[float, float, int]]) -> str:
    """Bar chart of slide counts per percent-selected bin, one rect per non-empty bin."""
    if not bins:
        raise ValueError("no histogram bins")
    top = max(c for _, _, c in bins)
    ymax = float(max(top, 1))
    ax = _Axes(0.0, ymax)
    out = _svg_open("Selected tiles per slide")
    step = max(1, -(-top // 5))
    yticks = [float(v) for v in range(0, int(ymax) + 1, step)]
    out += ax.frame("Selected tiles (%)", "Slides", yticks, lambda v: str(int(v)))
    out.append('<g class="bars" fill="#4c72b0" stroke="#ffffff" stroke-width="0.5">')
    for lo, hi, count in bins:
        if count == 0:
            continue
        x0, x1 = ax.x(lo), ax.x(hi)
        y = ax.y(count)
        out.append(
            f'<rect class="bar" x="{_num(x0)}" y="{_num(y)}" width="{_num(x1 - x0)}" '
            f'height="{_num(ax.y0 - y)}"><title>{_num(lo)}-{_num(hi)}%: {count}</title></rect>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
