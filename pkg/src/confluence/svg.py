"""SVG portraits of separatrix graphs and zone decompositions."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .polyfield import SeparatrixGraph, ZoneDecomposition

COLORS = {"repelling": "#c0392b", "attracting": "#2471a3"}
POINT_COLORS = {"repelling": "#c0392b", "attracting": "#2471a3", "center": "#7d3c98"}
ZONE_FILLS = ("#f9e79f", "#abebc6", "#d7bde2", "#f5cba7", "#aed6f1", "#fadbd8", "#d5f5e3")

DEFAULT_STYLE = {"size": 480, "view": None, "stroke": 1.6, "point_min": 3.0, "point_max": 9.0,
                 "legend": True, "decimals": 4}


def _fmt(x: float, d: int) -> str:
    s = f"{x:.{d}f}"
    return "0" if s in ("-0", "-0." + "0" * d) or float(s) == 0 else s.rstrip("0").rstrip(".")


def _cfmt(z: complex) -> str:
    return f"{z.real:.4g}{z.imag:+.4g}i"


def emit_svg(obj: SeparatrixGraph | ZoneDecomposition, style: dict | None = None) -> str:
    """Valid standalone SVG; output depends only on the input and the style."""
    st = dict(DEFAULT_STYLE)
    st.update(style or {})
    if isinstance(obj, ZoneDecomposition):
        graph, zones = obj.graph, list(obj.zones)
        type_code = obj.type_code.code
    else:
        graph, zones, type_code = obj, [], None
    field = graph.field
    d = int(st["decimals"])
    size = float(st["size"])

    locs = [complex(p.location) for p in graph.points]
    view = st["view"] or max(1.0, 1.6 * max((abs(z) for z in locs), default=1.0))
    scale = size / (2 * view)

    def xy(z) -> tuple[float, float]:
        z = complex(z)
        return (z.real + view) * scale, (view - z.imag) * scale

    def path_d(pts) -> str:
        out = []
        for i, z in enumerate(pts):
            x, y = xy(z)
            out.append(f"{'M' if i == 0 else 'L'}{_fmt(x, d)},{_fmt(y, d)}")
        return " ".join(out)

    def clipped(poly) -> np.ndarray:
        # keep the portion near the view; far-out parts are clipped anyway
        poly = np.asarray(poly, dtype=complex)
        return poly[np.abs(poly) <= 4 * view] if len(poly) > 2 else poly

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(size, 0)}" height="{_fmt(size, 0)}" '
        f'viewBox="0 0 {_fmt(size, 0)} {_fmt(size, 0)}">',
        '<defs><clipPath id="view"><rect x="0" y="0" '
        f'width="{_fmt(size, 0)}" height="{_fmt(size, 0)}"/></clipPath></defs>',
        f'<rect x="0" y="0" width="{_fmt(size, 0)}" height="{_fmt(size, 0)}" fill="white"/>',
        '<g clip-path="url(#view)">',
    ]

    seps = {s.index: s for s in graph.separatrices}
    lines.append('<g id="zones">')
    for zi, zone in enumerate(zones):
        pts = []
        gaps = sorted(zone.gaps)
        for g in gaps:
            a = seps[g]
            b = seps[(g + 1) % (2 * field.k)]
            pts.extend(clipped(a.polyline)[::-1])
            pts.extend(clipped(b.polyline))
        if len(pts) >= 3:
            fill = ZONE_FILLS[zi % len(ZONE_FILLS)]
            lines.append(f'<path class="zone" d="{path_d(pts)} Z" fill="{fill}" fill-opacity="0.55" '
                         f'stroke="none" data-gaps="{",".join(map(str, gaps))}"/>')
    lines.append("</g>")

    lines.append('<g id="separatrices">')
    for s in sorted(graph.separatrices, key=lambda s: s.index):
        poly = clipped(s.polyline)
        if len(poly) < 2:
            continue
        lines.append(f'<path class="separatrix {s.kind}" d="{path_d(poly)}" fill="none" '
                     f'stroke="{COLORS[s.kind]}" stroke-width="{st["stroke"]}" data-index="{s.index}"/>')
    lines.append("</g>")

    lines.append('<g id="points">')
    dmags = [abs(complex(field.derivative(z))) for z in locs]
    top = max(dmags, default=1.0) or 1.0
    for p, z, dm in zip(graph.points, locs, dmags):
        r = st["point_min"] + (st["point_max"] - st["point_min"]) * math.sqrt(dm / top)
        x, y = xy(z)
        color = POINT_COLORS.get(p.stability, "#444444")
        lines.append(f'<circle class="point {p.stability}" cx="{_fmt(x, d)}" cy="{_fmt(y, d)}" '
                     f'r="{_fmt(r, 2)}" fill="{color}" stroke="black" stroke-width="0.6"/>')
    lines.append("</g>")
    lines.append("</g>")

    if st["legend"]:
        eps_txt = ", ".join(_cfmt(e) for e in field.eps)
        legend = [f"k = {field.k}", f"eps = ({eps_txt})", f"alpha = {field.alpha:.4g}"]
        if type_code is not None:
            legend.append(f"type {type_code}")
        lines.append('<g id="legend" font-family="monospace" font-size="11" fill="black">')
        for i, t in enumerate(legend):
            lines.append(f'<text x="8" y="{16 + 14 * i}">{escape(t)}</text>')
        lines.append(f'<text x="8" y="{16 + 14 * len(legend)}" fill="{COLORS["repelling"]}">repelling</text>')
        lines.append(f'<text x="90" y="{16 + 14 * len(legend)}" fill="{COLORS["attracting"]}">attracting</text>')
        lines.append("</g>")
    if not zones:
        lines.append(f'<text class="warning" x="8" y="{_fmt(size - 10, 0)}" font-family="monospace" '
                     'font-size="12" fill="#b9770e">no zones: field not structurally stable</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
