"""Stopping points: transversal intersections of backward boundary trajectories.

Where two backward-integrated arcs cross transversally, their further
prolongations leave the boundary and must be discarded.  Detection works on
the sampled polylines with bounding-box pruning, then refines each crossing
with Newton iteration on cubic Hermite interpolants of the two arcs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from scipy.integrate import solve_ivp

from .integrator import BarrierArc
from .model import dynamics

TRANSVERSALITY_MIN_DET = 1e-8


@dataclass(frozen=True)
class StoppingPoint:
    """One crossing of two arcs; ``transversal`` marks independent velocities."""

    location: tuple
    arc_a: str
    arc_b: str
    t_a: float
    t_b: float
    transversal: bool
    det: float


def _segment_hermite(arc: BarrierArc, i: int):
    """Cubic Hermite data for the interval between samples i and i+1.

    The interval is governed by the branch stored at sample i+1, so both end
    velocities are evaluated with that branch's control.
    """
    t0, t1 = arc.t[i], arc.t[i + 1]
    p0, p1 = arc.states[i], arc.states[i + 1]
    mode = int(arc.modes[i + 1])
    u0 = arc.control_of_mode(mode, p0)
    u1 = arc.control_of_mode(mode, p1)
    v0 = np.array(dynamics(arc.params, p0, u0))
    v1 = np.array(dynamics(arc.params, p1, u1))
    dt = t1 - t0
    return t0, dt, p0, p1, v0 * dt, v1 * dt


def _hermite_eval(p0, p1, m0, m1, tau):
    t2 = tau * tau
    t3 = t2 * tau
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + tau
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1


def _hermite_deriv(p0, p1, m0, m1, tau):
    t2 = tau * tau
    dh00 = 6 * t2 - 6 * tau
    dh10 = 3 * t2 - 4 * tau + 1
    dh01 = -6 * t2 + 6 * tau
    dh11 = 3 * t2 - 2 * tau
    return dh00 * p0 + dh10 * m0 + dh01 * p1 + dh11 * m1


def _candidate_segment_pairs(a: BarrierArc, b: BarrierArc):
    """Indices (i, j) of segment pairs with overlapping bounding boxes."""
    pa, pb = a.states, b.states
    a_lo = np.minimum(pa[:-1], pa[1:])
    a_hi = np.maximum(pa[:-1], pa[1:])
    b_lo = np.minimum(pb[:-1], pb[1:])
    b_hi = np.maximum(pb[:-1], pb[1:])
    pad = 1e-12
    ov = (
        (a_lo[:, None, 0] <= b_hi[None, :, 0] + pad)
        & (b_lo[None, :, 0] <= a_hi[:, None, 0] + pad)
        & (a_lo[:, None, 1] <= b_hi[None, :, 1] + pad)
        & (b_lo[None, :, 1] <= a_hi[:, None, 1] + pad)
    )
    return np.argwhere(ov)


def _segment_crossing(p0, p1, q0, q1) -> Optional[tuple]:
    """Parametric crossing (s, t) of two closed segments, or None."""
    d1 = p1 - p0
    d2 = q1 - q0
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-14:
        return None
    r = q0 - p0
    s = (r[0] * d2[1] - r[1] * d2[0]) / denom
    t = (r[0] * d1[1] - r[1] * d1[0]) / denom
    if -1e-12 <= s <= 1 + 1e-12 and -1e-12 <= t <= 1 + 1e-12:
        return s, t
    return None


def _refine_crossing(a: BarrierArc, i: int, b: BarrierArc, j: int, s0: float, t0: float):
    """Newton refinement of a polyline crossing.

    A first pass runs on cubic Hermite interpolants of the two arcs; a second
    pass re-integrates both arcs locally with tight tolerance so the returned
    point lies on the true trajectories to solver precision.
    """
    ta0, dta, pa0, pa1, ma0, ma1 = _segment_hermite(a, i)
    tb0, dtb, pb0, pb1, mb0, mb1 = _segment_hermite(b, j)
    tau_a, tau_b = s0, t0
    for _ in range(30):
        ra = _hermite_eval(pa0, pa1, ma0, ma1, tau_a)
        rb = _hermite_eval(pb0, pb1, mb0, mb1, tau_b)
        res = ra - rb
        if max(abs(res[0]), abs(res[1])) < 1e-13:
            break
        va = _hermite_deriv(pa0, pa1, ma0, ma1, tau_a)
        vb = _hermite_deriv(pb0, pb1, mb0, mb1, tau_b)
        det = -va[0] * vb[1] + va[1] * vb[0]
        if abs(det) < 1e-16:
            break
        # solve [va, -vb] [dta; dtb] = -res
        dta_step = (-res[0] * (-vb[1]) - (-res[1]) * (-vb[0])) / det
        dtb_step = (va[0] * (-res[1]) - va[1] * (-res[0])) / det
        tau_a = min(max(tau_a + dta_step, -0.5), 1.5)
        tau_b = min(max(tau_b + dtb_step, -0.5), 1.5)
    t_a = ta0 + min(max(tau_a, 0.0), 1.0) * dta
    t_b = tb0 + min(max(tau_b, 0.0), 1.0) * dtb

    xa = va = xb = vb = None
    for _ in range(4):
        xa, va = _point_on_arc(a, i, t_a)
        xb, vb = _point_on_arc(b, j, t_b)
        res = xa - xb
        if max(abs(res[0]), abs(res[1])) < 1e-12:
            break
        det = -va[0] * vb[1] + va[1] * vb[0]
        if abs(det) < 1e-16:
            break
        dta_step = (-res[0] * (-vb[1]) - (-res[1]) * (-vb[0])) / det
        dtb_step = (va[0] * (-res[1]) - va[1] * (-res[0])) / det
        t_a = min(max(t_a + dta_step, a.t[i + 1]), a.t[i])
        t_b = min(max(t_b + dtb_step, b.t[j + 1]), b.t[j])
    loc = 0.5 * (xa + xb)
    return loc, t_a, t_b


def _point_on_arc(arc: BarrierArc, i: int, t_query: float):
    """State and forward velocity on the true arc at a time inside segment i,
    by backward re-integration from sample i with tight tolerance."""
    mode = int(arc.modes[i + 1])
    y0 = arc.states[i]
    s0, s1 = -float(arc.t[i]), -float(t_query)

    def rhs(s, y):
        u = arc.control_of_mode(mode, y)
        d1, d2 = dynamics(arc.params, y, u)
        return [-d1, -d2]

    if s1 > s0 + 1e-13:
        sol = solve_ivp(rhs, (s0, s1), y0, rtol=1e-12, atol=1e-13)
        y = sol.y[:, -1]
    else:
        y = np.asarray(y0, dtype=float).copy()
    u = arc.control_of_mode(mode, y)
    v = np.array(dynamics(arc.params, y, u))
    return y, v


def _velocity_at(arc: BarrierArc, t_query: float, location) -> np.ndarray:
    idx = int(np.searchsorted(-arc.t, -t_query))
    idx = min(max(idx, 1), len(arc.t) - 1)
    mode = int(arc.modes[idx])
    u = arc.control_of_mode(mode, location)
    return np.array(dynamics(arc.params, location, u))


def find_stopping_points(arcs: list[BarrierArc]) -> list[StoppingPoint]:
    """Pairwise transversal crossings, one kept per arc pair.

    Of multiple crossings of the same pair, only the one closest to the end
    points (largest times on both arcs) is kept.  Near-tangential crossings
    are reported with ``transversal=False`` and never used for truncation.
    """
    out: list[StoppingPoint] = []
    for ia in range(len(arcs)):
        for ib in range(ia + 1, len(arcs)):
            a, b = arcs[ia], arcs[ib]
            if a.arc_id == b.arc_id:
                continue
            best: Optional[StoppingPoint] = None
            for i, j in _candidate_segment_pairs(a, b):
                hit = _segment_crossing(a.states[i], a.states[i + 1], b.states[j], b.states[j + 1])
                if hit is None:
                    continue
                loc, t_a, t_b = _refine_crossing(a, int(i), b, int(j), hit[0], hit[1])
                va = _velocity_at(a, t_a, loc)
                vb = _velocity_at(b, t_b, loc)
                det = float(va[0] * vb[1] - va[1] * vb[0])
                norm = float(np.hypot(*va) * np.hypot(*vb))
                ndet = abs(det) / norm if norm > 0 else 0.0
                sp = StoppingPoint(
                    location=(float(loc[0]), float(loc[1])),
                    arc_a=a.arc_id,
                    arc_b=b.arc_id,
                    t_a=float(t_a),
                    t_b=float(t_b),
                    transversal=bool(ndet >= TRANSVERSALITY_MIN_DET),
                    det=ndet,
                )
                if best is None or sp.t_a + sp.t_b > best.t_a + best.t_b:
                    best = sp
            if best is not None:
                out.append(best)
    out.sort(key=lambda sp: (sp.arc_a, sp.arc_b, -(sp.t_a + sp.t_b)))
    return out


def truncate_at_stopping_points(arcs: list[BarrierArc], sps: list[StoppingPoint]) -> list[BarrierArc]:
    """Cut each arc at its first transversal stopping point walking backward."""
    cut_at: dict[str, StoppingPoint] = {}
    for sp in sps:
        if not sp.transversal:
            continue
        for arc_id, t_sp in ((sp.arc_a, sp.t_a), (sp.arc_b, sp.t_b)):
            cur = cut_at.get(arc_id)
            t_cur = cur[1] if cur else -math.inf
            if t_sp > t_cur:
                cut_at[arc_id] = (sp, t_sp)
    out = []
    for arc in arcs:
        entry = cut_at.get(arc.arc_id)
        if entry is None:
            out.append(arc)
            continue
        sp, t_sp = entry
        if t_sp <= arc.t[-1] + 1e-15:
            out.append(arc)
            continue
        out.append(arc.truncated(t_sp, location=sp.location))
    return out
