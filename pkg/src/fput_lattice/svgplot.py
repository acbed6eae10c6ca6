"""Minimal SVG rendering of a snapshot: q_n against n, optional region bands."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .analysis import Label, RegionReport
from .dynamics import LatticeState

WIDTH, HEIGHT = 960, 320
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 20, 40

REGION_COLOURS = {
    Label.CONSTANT: "#e8e8e8",
    Label.PERIODIC2: "#cfe3f7",
    Label.MODULATED: "#fbe3c4",
    Label.SOLITON: "#f6c6c6",
}


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_snapshot(state: LatticeState, trim_edges: int = 0,
                    regions: RegionReport | None = None, title: str | None = None) -> str:
    """SVG document of q_n for sites trim_edges+1 .. N-trim_edges.

    The polyline has one vertex per plotted site.
    """
    n = state.n
    if not 0 <= trim_edges < n / 2:
        raise ValueError(f"trim_edges must lie in [0, N/2), got {trim_edges}")
    lo, hi = trim_edges + 1, n - trim_edges
    sites = np.arange(lo, hi + 1)
    q = state.q[lo - 1:hi]
    q_min, q_max = float(np.min(q)), float(np.max(q))
    if q_max - q_min < 1e-12:
        q_min, q_max = q_min - 1.0, q_max + 1.0
    pad = 0.05 * (q_max - q_min)
    q_min, q_max = q_min - pad, q_max + pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    span = max(hi - lo, 1)

    def x_of(site):
        return MARGIN_L + (site - lo) / span * plot_w

    def y_of(val):
        return MARGIN_T + (q_max - val) / (q_max - q_min) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if regions is not None:
        out.append('<g class="regions">')
        for seg in regions.segments:
            a, b = max(seg.n_start, lo), min(seg.n_end, hi)
            if a > b:
                continue
            x0 = x_of(a - 0.5) if a > lo else x_of(lo)
            x1 = x_of(b + 0.5) if b < hi else x_of(hi)
            out.append(f'<rect class="{seg.label.value}" x="{_fmt(x0)}" y="{MARGIN_T}" '
                       f'width="{_fmt(x1 - x0)}" height="{plot_h}" '
                       f'fill="{REGION_COLOURS[seg.label]}"/>')
        out.append("</g>")
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
               'fill="none" stroke="black" stroke-width="1"/>')
    points = " ".join(f"{_fmt(x_of(s))},{_fmt(y_of(v))}" for s, v in zip(sites, q))
    out.append(f'<polyline class="q" fill="none" stroke="#1f3b73" stroke-width="1" '
               f'points="{points}"/>')
    label_y = HEIGHT - MARGIN_B + 16
    out.append(f'<text x="{MARGIN_L}" y="{label_y}" font-size="11">{lo}</text>')
    out.append(f'<text x="{WIDTH - MARGIN_R}" y="{label_y}" font-size="11" '
               f'text-anchor="end">{hi}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" font-size="12" '
               'text-anchor="middle">site n</text>')
    out.append(f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + 10}" font-size="11" '
               f'text-anchor="end">{q_max - pad:.3g}</text>')
    out.append(f'<text x="{MARGIN_L - 6}" y="{MARGIN_T + plot_h}" font-size="11" '
               f'text-anchor="end">{q_min + pad:.3g}</text>')
    heading = title if title is not None else f"q_n at t = {state.t:g}"
    out.append(f'<text x="{WIDTH / 2}" y="{MARGIN_T - 6}" font-size="12" '
               f'text-anchor="middle">{escape(heading)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, state: LatticeState, **kwargs) -> Path:
    path = Path(path)
    path.write_text(render_snapshot(state, **kwargs), encoding="utf-8")
    return path
