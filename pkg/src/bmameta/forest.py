"""Forest-plot rendering as a standalone SVG string.

Layout is fixed and deterministic: one row per study in input order
(square marker, 95% interval whiskers), then diamonds for the fixed,
random, and model-averaged effect estimates.  No plotting library is
involved; the output is plain SVG 1.1 markup.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .marginal import PosteriorSummary

__all__ = ["forest_svg"]

_ROW_H = 26
_PLOT_X0 = 210
_PLOT_X1 = 620
_TEXT_X = 635
_WIDTH = 810


def _ticks(lo: float, hi: float, target: int = 6) -> list:
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((c for c in (1.0, 2.0, 2.5, 5.0, 10.0)), key=lambda c: abs(c * mag - raw)) * mag
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12:
        out.append(round(t, 10))
        t += step
    return out


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def forest_svg(
    studies: Sequence[tuple],
    fixed: Optional[PosteriorSummary] = None,
    random: Optional[PosteriorSummary] = None,
    averaged: Optional[PosteriorSummary] = None,
    *,
    title: str = "",
) -> str:
    """Render studies plus pooled-estimate diamonds.

    ``studies`` holds (label, effect, se) triples; per-study intervals
    are effect +/- 1.96 se.  Summary rows are drawn for whichever of
    ``fixed``, ``random`` and ``averaged`` are provided.
    """
    rows = []
    for label, effect, se in studies:
        rows.append(("study", label, effect, effect - 1.96 * se, effect + 1.96 * se))
    for name, summ in (("Fixed", fixed), ("Random", random), ("Averaged", averaged)):
        if summ is not None:
            rows.append(("diamond", name, summ.mean, summ.ci_lower, summ.ci_upper))

    lo = min(min(r[3] for r in rows), 0.0)
    hi = max(max(r[4] for r in rows), 0.0)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    lo, hi = lo - pad, hi + pad

    def sx(v: float) -> float:
        return _PLOT_X0 + (v - lo) / (hi - lo) * (_PLOT_X1 - _PLOT_X0)

    top = 46 if title else 24
    height = top + _ROW_H * len(rows) + 44
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_WIDTH}" '
        f'height="{height}" viewBox="0 0 {_WIDTH} {height}" '
        'font-family="Helvetica, Arial, sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{_WIDTH / 2:.1f}" y="20" text-anchor="middle" '
                     f'font-size="14" font-weight="bold">{_escape(title)}</text>')

    axis_y = top + _ROW_H * len(rows) + 8
    # zero reference line
    zx = sx(0.0)
    parts.append(f'<line x1="{zx:.1f}" y1="{top - 6}" x2="{zx:.1f}" y2="{axis_y}" '
                 'stroke="#999999" stroke-dasharray="4,3"/>')

    for i, (kind, label, center, ci_lo, ci_hi) in enumerate(rows):
        cy = top + _ROW_H * i + _ROW_H / 2
        bold = ' font-weight="bold"' if kind == "diamond" else ""
        parts.append(f'<text x="12" y="{cy + 4:.1f}"{bold}>{_escape(label)}</text>')
        x_lo, x_hi, x_c = sx(ci_lo), sx(ci_hi), sx(center)
        if kind == "study":
            parts.append(f'<line x1="{x_lo:.1f}" y1="{cy:.1f}" x2="{x_hi:.1f}" y2="{cy:.1f}" '
                         'stroke="black"/>')
            for xw in (x_lo, x_hi):
                parts.append(f'<line x1="{xw:.1f}" y1="{cy - 4:.1f}" x2="{xw:.1f}" '
                             f'y2="{cy + 4:.1f}" stroke="black"/>')
            parts.append(f'<rect x="{x_c - 4:.1f}" y="{cy - 4:.1f}" width="8" height="8" '
                         'fill="#333333"/>')
        else:
            parts.append(
                f'<polygon points="{x_lo:.1f},{cy:.1f} {x_c:.1f},{cy - 7:.1f} '
                f'{x_hi:.1f},{cy:.1f} {x_c:.1f},{cy + 7:.1f}" fill="#14508c"/>'
            )
        parts.append(f'<text x="{_TEXT_X}" y="{cy + 4:.1f}"{bold}>'
                     f'{_fmt(center)} [{_fmt(ci_lo)}, {_fmt(ci_hi)}]</text>')

    parts.append(f'<line x1="{_PLOT_X0}" y1="{axis_y}" x2="{_PLOT_X1}" y2="{axis_y}" '
                 'stroke="black"/>')
    for t in _ticks(lo, hi):
        tx = sx(t)
        parts.append(f'<line x1="{tx:.1f}" y1="{axis_y}" x2="{tx:.1f}" y2="{axis_y + 5}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{tx:.1f}" y="{axis_y + 18}" text-anchor="middle">{t:g}</text>')
    parts.append(f'<text x="{(_PLOT_X0 + _PLOT_X1) / 2:.1f}" y="{axis_y + 34}" '
                 'text-anchor="middle">Standardized mean difference</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )
