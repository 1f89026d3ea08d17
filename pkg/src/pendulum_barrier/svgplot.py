"""Figure-grade SVG emission: boundary arcs, envelope ovals, set shading.

Direct markup generation, no plotting dependency.  The drawing follows the
usual conventions for this system: theta1 horizontal, theta2 vertical, the
admissible region shaded, switch events marked with "x" and transitions to
the zero-tension control with "+".
"""

from __future__ import annotations

import math

import numpy as np

from .assembly import AdmissibleSetModel, TAG_INTERIOR
from .integrator import BarrierArc
from .intersection import StoppingPoint
from .model import MODE_CONSTRAINED, TWO_PI

ARC_COLORS = {"smooth": "#1f77b4", "nonsmooth": "#d9641e"}
G0_COLOR = "#444444"
SHADE_COLOR = "#9fd49f"
MARKER_COLOR = "#111111"


class _Canvas:
    def __init__(self, th1_lo, th1_hi, th2_max, width=900, height=520, margin=50):
        self.th1_lo, self.th1_hi, self.th2_max = th1_lo, th1_hi, th2_max
        self.w, self.h, self.mg = width, height, margin

    def x(self, th1):
        return self.mg + (th1 - self.th1_lo) / (self.th1_hi - self.th1_lo) * (self.w - 2 * self.mg)

    def y(self, th2):
        return self.mg + (self.th2_max - th2) / (2 * self.th2_max) * (self.h - 2 * self.mg)

    def path(self, pts, stroke, width="1.4", dash=None, opacity="1"):
        coords = " ".join(f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in pts)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        return (
            f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"'
            f' opacity="{opacity}"{dash_attr} points="{coords}"/>'
        )


def _tick_label(v):
    k = v / math.pi
    if abs(k - round(k)) < 1e-9:
        n = int(round(k))
        if n == 0:
            return "0"
        if n == 1:
            return "pi"
        if n == -1:
            return "-pi"
        return f"{n}pi"
    return f"{v:.2f}"


def render_barrier_svg(
    model: AdmissibleSetModel,
    arcs: list[BarrierArc],
    stopping_points: list[StoppingPoint],
    theta1_window=None,
    title: str = "",
) -> str:
    p = model.params
    th2_max = model.theta2_max
    th1_lo, th1_hi = theta1_window if theta1_window else (-TWO_PI - 1.0, TWO_PI + 1.0)
    cv = _Canvas(th1_lo, th1_hi, th2_max)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cv.w}" height="{cv.h}" '
        f'viewBox="0 0 {cv.w} {cv.h}">',
        f'<rect width="{cv.w}" height="{cv.h}" fill="white"/>',
    ]

    # admissible-region shading: tile the period-cell grid over the window
    n1, n2 = model.cell_comp.shape
    w1 = TWO_PI / n1
    w2 = 2 * th2_max / n2
    tag_grid = (model.cell_comp >= 0) & (model.cell_tag == TAG_INTERIOR)
    k_lo = int(math.floor((th1_lo + math.pi) / TWO_PI))
    k_hi = int(math.ceil((th1_hi + math.pi) / TWO_PI))
    rects = []
    for krep in range(k_lo, k_hi + 1):
        off = krep * TWO_PI
        for j in range(n2):
            row = tag_grid[:, j]
            i = 0
            while i < n1:
                if not row[i]:
                    i += 1
                    continue
                i0 = i
                while i < n1 and row[i]:
                    i += 1
                a1 = max(-math.pi + i0 * w1 + off, th1_lo)
                b1 = min(-math.pi + i * w1 + off, th1_hi)
                if b1 <= a1:
                    continue
                a2 = -th2_max + j * w2
                b2 = a2 + w2
                rects.append(
                    f'<rect x="{cv.x(a1):.2f}" y="{cv.y(b2):.2f}" '
                    f'width="{cv.x(b1) - cv.x(a1):.2f}" height="{cv.y(a2) - cv.y(b2):.2f}" '
                    f'fill="{SHADE_COLOR}" opacity="0.45"/>'
                )
    out.extend(rects)

    # zero-envelope ovals
    theta_star = math.atan(p.Mg)
    rel = np.linspace(-theta_star, theta_star, 400)
    top = np.sqrt(np.clip((p.Mg * np.cos(rel) - np.abs(np.sin(rel))) / (p.M * p.l), 0, None))
    for krep in range(k_lo, k_hi + 1):
        c = krep * TWO_PI
        if c + theta_star < th1_lo or c - theta_star > th1_hi:
            continue
        oval = list(zip(rel + c, top)) + list(zip(rel[::-1] + c, -top[::-1]))
        oval.append(oval[0])
        out.append(cv.path(oval, G0_COLOR, width="1.6"))

    # arcs
    for arc in arcs:
        pts = [(a, b) for a, b in arc.states if th1_lo - 0.2 <= a <= th1_hi + 0.2 and abs(b) <= th2_max * 1.02]
        if len(pts) < 2:
            continue
        out.append(cv.path(pts, ARC_COLORS.get(arc.source.kind, "#000000")))

    # event markers
    for arc in arcs:
        for e in arc.events:
            if e.mode_change is None:
                continue
            a, b = e.state
            if not (th1_lo <= a <= th1_hi and abs(b) <= th2_max):
                continue
            x, y = cv.x(a), cv.y(b)
            if e.kind == "switch":
                out.append(
                    f'<path d="M {x-4:.2f} {y-4:.2f} L {x+4:.2f} {y+4:.2f} '
                    f'M {x-4:.2f} {y+4:.2f} L {x+4:.2f} {y-4:.2f}" '
                    f'stroke="{MARKER_COLOR}" stroke-width="1.3"/>'
                )
            elif MODE_CONSTRAINED in e.mode_change:
                out.append(
                    f'<path d="M {x-4:.2f} {y:.2f} L {x+4:.2f} {y:.2f} '
                    f'M {x:.2f} {y-4:.2f} L {x:.2f} {y+4:.2f}" '
                    f'stroke="{MARKER_COLOR}" stroke-width="1.3"/>'
                )

    for sp in stopping_points:
        a, b = sp.location
        if th1_lo <= a <= th1_hi and abs(b) <= th2_max:
            out.append(
                f'<circle cx="{cv.x(a):.2f}" cy="{cv.y(b):.2f}" r="3.2" fill="#000000"/>'
            )

    # axes
    out.append(
        f'<rect x="{cv.mg}" y="{cv.mg}" width="{cv.w - 2 * cv.mg}" height="{cv.h - 2 * cv.mg}" '
        f'fill="none" stroke="#000000" stroke-width="1"/>'
    )
    k0 = int(math.ceil(th1_lo / (math.pi / 2)))
    k1 = int(math.floor(th1_hi / (math.pi / 2)))
    for k in range(k0, k1 + 1):
        v = k * math.pi / 2
        x = cv.x(v)
        out.append(f'<line x1="{x:.2f}" y1="{cv.h - cv.mg}" x2="{x:.2f}" y2="{cv.h - cv.mg + 5}" stroke="#000"/>')
        if k % 2 == 0:
            out.append(
                f'<text x="{x:.2f}" y="{cv.h - cv.mg + 18}" font-size="11" text-anchor="middle">'
                f"{_tick_label(v)}</text>"
            )
    for v in range(-int(th2_max), int(th2_max) + 1, 2):
        y = cv.y(v)
        out.append(f'<line x1="{cv.mg - 5}" y1="{y:.2f}" x2="{cv.mg}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{cv.mg - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{v}</text>')
    out.append(
        f'<text x="{cv.w / 2:.0f}" y="{cv.h - 8}" font-size="13" text-anchor="middle">theta1 (rad)</text>'
    )
    out.append(
        f'<text x="14" y="{cv.h / 2:.0f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {cv.h / 2:.0f})">theta2 (rad/s)</text>'
    )
    caption = title or (
        f"admissible set, M={p.M} m={p.m} l={p.l} g={p.g} "
        "(shaded = admissible; x = control switch; + = zero-tension transition)"
    )
    out.append(f'<text x="{cv.w / 2:.0f}" y="20" font-size="13" text-anchor="middle">{caption}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
