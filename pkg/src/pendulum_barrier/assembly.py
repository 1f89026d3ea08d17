"""Admissible-set model: boundary curves, components, membership, oracles.

The set is 2*pi-periodic in theta1, so everything is assembled over one
period cell [-pi, pi) x [-theta2_max, theta2_max].  The boundary consists of
the truncated backward arcs plus the zero-envelope oval split at the four
tangency points.  Sides of each boundary segment are tagged using the adjoint
along the arcs (the adjoint points toward the non-admissible side); a flood
fill over a period grid yields the connected components and their
bounded/unbounded tags, and membership queries resolve by nearest-segment
side tests (grid lookup for bulk queries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .integrator import BarrierArc
from .model import (
    PendulumParams,
    TWO_PI,
    constraint_envelope,
    dynamics,
    envelope_branch_gradient,
)
from .tangency import TangencyPoint

TAG_INTERIOR = 0
TAG_INADMISSIBLE = 1
TAG_OUTSIDE_G = 2
TAG_NAMES = {TAG_INTERIOR: "Interior", TAG_INADMISSIBLE: "Inadmissible", TAG_OUTSIDE_G: "OutsideG"}

BOUNDARY_VERDICT_TOL = 1e-6
ENVELOPE_POSITIVE_TOL = 1e-8
STITCH_GAP_TOL = 1e-6


class StitchGap(RuntimeError):
    """A boundary curve end dangles: no partner curve within tolerance."""


class WindowExceeded(ValueError):
    """Query lies outside the model's theta2 window."""


class OracleDisagreement(RuntimeError):
    """Sampled-policy oracle found admissible states the model calls inadmissible."""


@dataclass
class BoundaryCurve:
    """One oriented boundary polyline with per-segment side tags.

    ``left_tag``/``right_tag`` give the region tag on each side of segment i,
    where "left" is the side with positive cross product against the segment
    direction.
    """

    curve_id: str
    kind: str  # "arc" | "g0"
    points: np.ndarray  # (n, 2), real coordinates
    left_tag: np.ndarray  # (n-1,) int8
    right_tag: np.ndarray  # (n-1,) int8
    source: str = ""


@dataclass(frozen=True)
class SetComponent:
    comp_id: int
    tag: int  # TAG_INTERIOR or TAG_INADMISSIBLE
    bounded: bool
    n_cells: int
    seed: tuple  # representative cell center


@dataclass(frozen=True)
class MembershipVerdict:
    tag: str  # Interior | Boundary | Inadmissible | OutsideG
    distance_estimate: float


@dataclass
class AdmissibleSetModel:
    params: PendulumParams
    theta2_max: float
    boundary_curves: list
    components: list
    period: float
    grid_theta1: np.ndarray
    grid_theta2: np.ndarray
    cell_comp: np.ndarray  # (n1, n2) component id, -1 for blocked cells
    cell_tag: np.ndarray  # (n1, n2) int8 region tag for unblocked cells
    chains: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    # -- prepared query data (filled by assemble) --
    _seg_a: np.ndarray = None
    _seg_b: np.ndarray = None
    _seg_left: np.ndarray = None
    _seg_right: np.ndarray = None

    def reduce_theta1(self, th1):
        return np.mod(np.asarray(th1) + math.pi, TWO_PI) - math.pi


def g0_quarters(p: PendulumParams, k: int = 0, n: int = 400) -> list[BoundaryCurve]:
    """The zero-envelope oval around theta1 = 2*pi*k, split at the tangency points.

    Quarters are oriented from one tangency point to the next, counterclockwise
    starting at the left smooth point.
    """
    theta_star = math.atan(p.Mg)
    c = TWO_PI * k

    def branch(th1_from, th1_to, sgn, name):
        th1 = np.linspace(th1_from, th1_to, n)
        rel = th1 - c
        th2sq = (p.Mg * np.cos(rel) - np.abs(np.sin(rel))) / (p.M * p.l)
        th2 = sgn * np.sqrt(np.clip(th2sq, 0.0, None))
        pts = np.column_stack([th1, th2])
        return pts, name

    specs = [
        branch(c - theta_star, c, 1, f"g0-q1@{k}"),
        branch(c, c + theta_star, 1, f"g0-q2@{k}"),
        branch(c + theta_star, c, -1, f"g0-q3@{k}"),
        branch(c, c - theta_star, -1, f"g0-q4@{k}"),
    ]
    curves = []
    for pts, name in specs:
        nseg = len(pts) - 1
        curves.append(
            BoundaryCurve(
                curve_id=name,
                kind="g0",
                points=pts,
                left_tag=np.full(nseg, TAG_INTERIOR, dtype=np.int8),
                right_tag=np.full(nseg, TAG_INTERIOR, dtype=np.int8),
                source=name,
            )
        )
    return curves


def _clip_to_one_period(arc: BarrierArc):
    """Limit an arc's boundary contribution to one period of theta1 travel.

    Backward arcs are only trusted as boundary pieces until their angle has
    travelled a full period from the end point; beyond that their reduced
    images overlap the next period's fresh arcs.  Returns the (possibly)
    clipped arc and the exact clip point when clipping occurred.
    """
    th10 = arc.states[0, 0]
    excursion = np.abs(arc.states[:, 0] - th10)
    beyond = excursion >= TWO_PI
    if not beyond.any():
        return arc, None
    j = int(np.argmax(beyond))  # first sample beyond one period
    a, b = arc.states[j - 1], arc.states[j]
    ea, eb = excursion[j - 1], excursion[j]
    w = (TWO_PI - ea) / (eb - ea)
    loc = (1 - w) * a + w * b
    loc[0] = th10 + math.copysign(TWO_PI, b[0] - th10)
    t_clip = float((1 - w) * arc.t[j - 1] + w * arc.t[j])
    clipped = arc.truncated(t_clip, location=loc, termination="PeriodClipped")
    return clipped, (float(loc[0]), float(loc[1]))


def _seam_curve(p: PendulumParams, arc: BarrierArc, clip_point) -> Optional[BoundaryCurve]:
    """Vertical closure at the period seam between a kink point and its arc's
    one-period end.

    When a kink-point arc runs a full period without meeting a stopping
    point, its clipped end sits one period from its source corner at a
    different angular rate; the segment between the translated corner and the
    clip point closes the boundary of the periodic set there.  Side tags are
    resolved later from the adjacent components.
    """
    x_end, th2_end = clip_point
    corner_th2 = arc.states[0, 1]
    if abs(th2_end - corner_th2) < 1e-6:
        return None
    pts = np.array([[x_end, corner_th2], [x_end, th2_end]])
    return BoundaryCurve(
        curve_id=f"seam:{arc.arc_id}",
        kind="seam",
        points=pts,
        left_tag=np.array([TAG_INTERIOR], dtype=np.int8),
        right_tag=np.array([TAG_INTERIOR], dtype=np.int8),
        source=arc.arc_id,
    )


def arc_outer_side(arc: BarrierArc) -> int:
    """Which side of the (backward-oriented) arc is non-admissible.

    The terminal adjoint is the envelope gradient at the tangency end point
    and points toward the non-admissible region there; since a simple curve
    keeps the regions on fixed sides, the sign of its cross product with the
    initial direction fixes the side for the whole arc.  (The adjoint further
    along a kink arc carries a free local parameter and cannot be trusted for
    this.)  Returns +1 for left of the sampled direction, -1 for right.
    """
    d = arc.states[min(1, len(arc) - 1)] - arc.states[0]
    lam = arc.adjoints[0]
    cross = d[0] * lam[1] - d[1] * lam[0]
    return 1 if cross > 0 else -1


def _arc_curve(arc: BarrierArc) -> BoundaryCurve:
    """Boundary curve for one truncated arc with constant side tags.

    The non-admissible side is fixed once from the terminal adjoint (see
    :func:`arc_outer_side`) and holds along the whole polyline.
    """
    pts = arc.states
    nseg = len(pts) - 1
    side = arc_outer_side(arc)
    outer = TAG_INADMISSIBLE
    inner = TAG_INTERIOR
    left = np.full(nseg, outer if side > 0 else inner, dtype=np.int8)
    right = np.full(nseg, inner if side > 0 else outer, dtype=np.int8)
    return BoundaryCurve(
        curve_id=f"arc:{arc.arc_id}",
        kind="arc",
        points=pts.copy(),
        left_tag=left,
        right_tag=right,
        source=arc.arc_id,
    )


def _validate_stitching(p: PendulumParams, arcs: list[BarrierArc]) -> list[str]:
    """Every arc end must land on the oval, a partner cut point, or the window edge."""
    notes = []
    ends = {a.arc_id: a.states[-1] for a in arcs}
    for arc in arcs:
        end = arc.states[-1]
        term = arc.termination
        if term in ("LeftWindow", "HorizonReached", "AdjointVanished"):
            notes.append(f"{arc.arc_id}: open chain end ({term})")
            continue
        if term == "ReachedG0Again":
            res = abs(float(constraint_envelope(p, end)))
            if res > 1e-5:
                raise StitchGap(f"{arc.arc_id} ends {res:.2e} off the zero-envelope curve")
            notes.append(f"{arc.arc_id}: rejoins the zero-envelope curve")
            continue
        if term == "StoppedAtIntersection":
            best = min(
                (float(np.hypot(*(end - other_end))) for other_id, other_end in ends.items() if other_id != arc.arc_id),
                default=math.inf,
            )
            if best > STITCH_GAP_TOL:
                raise StitchGap(f"{arc.arc_id} cut end has no partner within {STITCH_GAP_TOL:g} (gap {best:.2e})")
            notes.append(f"{arc.arc_id}: joins a partner cut end (gap {best:.2e})")
    return notes


def _build_chains(p: PendulumParams, curves: list[BoundaryCurve]) -> list[dict]:
    """Group curves into chains by endpoint coincidence (node tolerance 1e-6)."""
    nodes = []  # representative points

    def node_of(pt):
        for i, q in enumerate(nodes):
            if np.hypot(pt[0] - q[0], pt[1] - q[1]) <= STITCH_GAP_TOL:
                return i
        nodes.append((float(pt[0]), float(pt[1])))
        return len(nodes) - 1

    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    def union(x, y):
        parent[find(x)] = find(y)

    curve_nodes = []
    for ci, c in enumerate(curves):
        n0 = node_of(c.points[0])
        n1 = node_of(c.points[-1])
        curve_nodes.append((n0, n1))
        union(("c", ci), ("n", n0))
        union(("c", ci), ("n", n1))
    groups = {}
    for ci, c in enumerate(curves):
        groups.setdefault(find(("c", ci)), []).append(ci)
    chains = []
    for members in groups.values():
        degree = {}
        for ci in members:
            for nd in curve_nodes[ci]:
                degree[nd] = degree.get(nd, 0) + 1
        # closed means no dangling curve end (every junction joins >= 2 ends)
        closed = all(v >= 2 for v in degree.values())
        chains.append({"curves": sorted(curves[ci].curve_id for ci in members), "closed": bool(closed)})
    chains.sort(key=lambda ch: ch["curves"])
    return chains


def _rasterize(curves, th1_cells, th2_cells, th1_min, th2_min, w1, w2, n1, n2):
    """Mark cells within roughly one cell of any boundary polyline."""
    blocked = np.zeros((n1, n2), dtype=bool)
    step = 0.5 * min(w1, w2)
    for c in curves:
        pts = c.points
        seg = pts[1:] - pts[:-1]
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        for i in range(len(seg)):
            k = max(1, int(seg_len[i] / step) + 1)
            tt = np.linspace(0.0, 1.0, k + 1)
            xs = pts[i, 0] + tt * seg[i, 0]
            ys = pts[i, 1] + tt * seg[i, 1]
            xs = np.mod(xs - th1_min, TWO_PI)
            i1 = np.clip((xs / w1).astype(int), 0, n1 - 1)
            i2 = (ys - th2_min) / w2
            keep = (i2 >= -1) & (i2 < n2 + 1)
            i1, i2 = i1[keep], np.clip(i2[keep].astype(int), 0, n2 - 1)
            for a, b in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
                blocked[(i1 + a) % n1, np.clip(i2 + b, 0, n2 - 1)] = True
    return blocked


def _drop_micro_components(comp, n_comp, min_cells=4):
    """Merge components below the resolution floor into the blocked band."""
    ids, counts = np.unique(comp[comp >= 0], return_counts=True)
    keep = ids[counts >= min_cells]
    remap = -np.ones(n_comp, dtype=np.int32)
    remap[keep] = np.arange(len(keep))
    out = np.where(comp >= 0, remap[np.clip(comp, 0, None)], -1)
    return out, len(keep)


def _flood_components(open_mask):
    """4-connected components with wraparound in the first axis."""
    n1, n2 = open_mask.shape
    comp = -np.ones((n1, n2), dtype=np.int32)
    next_id = 0
    for i0 in range(n1):
        for j0 in range(n2):
            if not open_mask[i0, j0] or comp[i0, j0] >= 0:
                continue
            stack = [(i0, j0)]
            comp[i0, j0] = next_id
            while stack:
                i, j = stack.pop()
                for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ii = (i + di) % n1
                    jj = j + dj
                    if 0 <= jj < n2 and open_mask[ii, jj] and comp[ii, jj] < 0:
                        comp[ii, jj] = next_id
                        stack.append((ii, jj))
            next_id += 1
    return comp, next_id


def assemble(
    p: PendulumParams,
    arcs: list[BarrierArc],
    tangency_points: list[TangencyPoint],
    grid_n: int = 241,
    theta2_max: Optional[float] = None,
    g0_samples: int = 400,
) -> AdmissibleSetModel:
    """Build the period-cell model from truncated arcs and the tangency points."""
    th2_max = 3.0 * p.free_fall_rate if theta2_max is None else theta2_max
    if not tangency_points:
        raise ValueError("tangency points required")

    notes = _validate_stitching(p, arcs) if arcs else ["degenerate: no arcs"]
    clipped_arcs = []
    seams = []
    for a in arcs:
        ca, clip_point = _clip_to_one_period(a)
        clipped_arcs.append(ca)
        if clip_point is not None:
            notes.append(f"{a.arc_id}: clipped to one period of travel at {clip_point}")
            seam = _seam_curve(p, a, clip_point)
            if seam is not None:
                seams.append(seam)
    curves = [_arc_curve(a) for a in clipped_arcs]
    quarters = g0_quarters(p, 0, g0_samples)
    all_curves = curves + quarters + seams

    # period grid
    n1 = n2 = grid_n
    th1_min, th2_min = -math.pi, -th2_max
    w1 = TWO_PI / n1
    w2 = 2.0 * th2_max / n2
    th1_centers = th1_min + (np.arange(n1) + 0.5) * w1
    th2_centers = th2_min + (np.arange(n2) + 0.5) * w2

    blocked = _rasterize(all_curves, None, None, th1_min, th2_min, w1, w2, n1, n2)
    env = constraint_envelope(p, (th1_centers[:, None], th2_centers[None, :]))
    open_mask = (~blocked) & (env <= 0.0)
    comp, n_comp = _flood_components(open_mask)
    # sub-resolution pinholes along the boundary band are not real components
    comp, n_comp = _drop_micro_components(comp, n_comp, min_cells=4)

    # votes cast a probe on each side of every arc segment; the side tags come
    # from the adjoint's normal component (the adjoint points toward the
    # non-admissible side, but can be nearly tangent near the kink corners, so
    # probes run along the segment normal rather than along the adjoint)
    votes = np.zeros((n_comp, 2), dtype=int)  # [interior, inadmissible]
    probe_delta = 1.6 * max(w1, w2)
    for curve in curves:
        pts = curve.points
        nseg = len(pts) - 1
        stride = max(1, nseg // 200)
        idx = np.arange(0, nseg, stride)
        mids = 0.5 * (pts[idx] + pts[idx + 1])
        d = pts[idx + 1] - pts[idx]
        dn = np.hypot(d[:, 0], d[:, 1])
        ok = dn > 0
        mids, d, dn, idx = mids[ok], d[ok], dn[ok], idx[ok]
        left_n = np.column_stack([-d[:, 1], d[:, 0]]) / dn[:, None]
        for sgn, tags in ((1.0, curve.left_tag[idx]), (-1.0, curve.right_tag[idx])):
            pr = mids + sgn * probe_delta * left_n
            i1 = ((np.mod(pr[:, 0] - th1_min, TWO_PI)) / w1).astype(int) % n1
            i2f = (pr[:, 1] - th2_min) / w2
            keep = (i2f >= 0) & (i2f < n2)
            i1k, i2k = i1[keep], i2f[keep].astype(int)
            cids = comp[i1k, i2k]
            for cid, tag in zip(cids, tags[keep]):
                if cid >= 0:
                    votes[cid, 0 if tag == TAG_INTERIOR else 1] += 1

    comp_tag = np.full(n_comp, -1, dtype=np.int8)
    conflicts = {}
    needs_sim = []
    for cid in range(n_comp):
        vi, vn = votes[cid]
        if vi == 0 and vn == 0:
            needs_sim.append(cid)
            continue
        if min(vi, vn) > 0:
            conflicts[cid] = (int(vi), int(vn))
        if min(vi, vn) > max(2.0, 0.02 * (vi + vn)):
            # contested: adjoint sides can be unreliable along clipped
            # prolongations, so decide by simulation instead
            needs_sim.append(cid)
            continue
        comp_tag[cid] = TAG_INTERIOR if vi >= vn else TAG_INADMISSIBLE

    # undecided components: majority of short policy-survival runs from a few
    # spread seed cells, batched across components
    if needs_sim:
        seed_rows, seed_comp = [], []
        for cid in needs_sim:
            cells = np.argwhere(comp == cid)
            picks = cells[np.linspace(0, len(cells) - 1, min(5, len(cells))).astype(int)]
            for i1p, i2p in picks:
                seed_rows.append((th1_centers[i1p], th2_centers[i2p]))
                seed_comp.append(cid)
        seeds = np.array(seed_rows)
        survives = np.zeros(len(seeds), dtype=bool)
        for pol in (greedy_tension_policy(p), saturation_policy(p),
                    lambda t, th1, th2: np.zeros_like(np.asarray(th1, dtype=float))):
            todo = ~survives
            if not todo.any():
                break
            _, viol = batch_simulate(p, seeds[todo], pol, 12.0, 2e-3)
            survives[np.flatnonzero(todo)[np.isnan(viol)]] = True
        seed_comp = np.array(seed_comp)
        for cid in needs_sim:
            sel = seed_comp == cid
            n_surv = int(survives[sel].sum())
            comp_tag[cid] = TAG_INTERIOR if 2 * n_surv >= int(sel.sum()) else TAG_INADMISSIBLE
            notes.append(
                f"component {cid} tagged {TAG_NAMES[int(comp_tag[cid])]} by simulation "
                f"({n_surv}/{int(sel.sum())} seeds survive)"
            )

    # resolve zero-envelope quarter and seam side tags from the adjacent cells
    cell_tag = np.where(comp >= 0, comp_tag[np.clip(comp, 0, None)], -1).astype(np.int8)

    def probe_tag(points_from, direction_unit):
        pr = points_from + probe_delta * direction_unit
        i1 = ((np.mod(pr[:, 0] - th1_min, TWO_PI)) / w1).astype(int) % n1
        i2f = np.clip((pr[:, 1] - th2_min) / w2, 0, n2 - 1)
        tags = cell_tag[i1, i2f.astype(int)]
        vals, counts = np.unique(tags[tags >= 0], return_counts=True)
        return TAG_INTERIOR if len(vals) == 0 else int(vals[np.argmax(counts)])

    for q in quarters:
        mids = 0.5 * (q.points[1:] + q.points[:-1])
        grads = np.stack(
            [envelope_branch_gradient(p, (mids[:, 0], mids[:, 1]), side) for side in (-1, 1)], axis=0
        )
        side_sel = (np.sin(mids[:, 0]) > 0).astype(int)
        g = np.stack([grads[side_sel[i], :, i] for i in range(len(mids))])
        gn = np.hypot(g[:, 0], g[:, 1])
        unit = g / np.maximum(gn[:, None], 1e-30)
        outer_tag = probe_tag(mids, -unit)  # away from the free-fall oval
        d = q.points[1:] - q.points[:-1]
        cross = d[:, 0] * (-unit[:, 1]) - d[:, 1] * (-unit[:, 0])  # outer side sign
        q.left_tag = np.where(cross > 0, outer_tag, TAG_OUTSIDE_G).astype(np.int8)
        q.right_tag = np.where(cross > 0, TAG_OUTSIDE_G, outer_tag).astype(np.int8)

    for sc in seams:
        mids = 0.5 * (sc.points[1:] + sc.points[:-1])
        d = sc.points[1:] - sc.points[:-1]
        dn = np.hypot(d[:, 0], d[:, 1])
        normal = np.column_stack([-d[:, 1], d[:, 0]]) / np.maximum(dn[:, None], 1e-30)
        left_tag = probe_tag(mids, normal)
        right_tag = probe_tag(mids, -normal)
        sc.left_tag = np.full(len(mids), left_tag, dtype=np.int8)
        sc.right_tag = np.full(len(mids), right_tag, dtype=np.int8)


    # components and bounded/unbounded tags (theta2 edges are the open ends)
    components = []
    edge_comp = set(comp[:, 0][comp[:, 0] >= 0]) | set(comp[:, -1][comp[:, -1] >= 0])
    for cid in range(n_comp):
        cells = np.argwhere(comp == cid)
        mid = cells[len(cells) // 2]
        components.append(
            SetComponent(
                comp_id=cid,
                tag=int(comp_tag[cid]),
                bounded=cid not in edge_comp,
                n_cells=len(cells),
                seed=(float(th1_centers[mid[0]]), float(th2_centers[mid[1]])),
            )
        )

    chains = _build_chains(p, all_curves)

    model = AdmissibleSetModel(
        params=p,
        theta2_max=th2_max,
        boundary_curves=all_curves,
        components=components,
        period=TWO_PI,
        grid_theta1=th1_centers,
        grid_theta2=th2_centers,
        cell_comp=comp,
        cell_tag=cell_tag,
        chains=chains,
        diagnostics={"stitching": notes, "vote_conflicts": conflicts},
    )
    _prepare_segments(model)
    return model


def _greedy_survives(p: PendulumParams, s0, horizon=8.0, dt=2e-3) -> bool:
    """Does any of a few strong policies keep the state feasible to the horizon?"""
    states = np.array([[s0[0], s0[1]]])
    for pol in (greedy_tension_policy(p), saturation_policy(p),
                lambda t, th1, th2: np.zeros_like(np.asarray(th1, dtype=float))):
        _, viol = batch_simulate(p, states, pol, horizon, dt)
        if np.isnan(viol[0]):
            return True
    return False


def _prepare_segments(model: AdmissibleSetModel):
    """Concatenate all boundary segments into arrays for vectorized queries.

    Queries are reduced into [-pi, pi); segments within half a period of the
    seam are duplicated shifted by +/- 2*pi so nearest-segment lookups do not
    see the seam.
    """
    a_list, b_list, lt_list, rt_list = [], [], [], []
    for c in model.boundary_curves:
        pts = c.points
        shift = np.round(pts[:-1, 0] / TWO_PI) * TWO_PI  # recentre each segment near 0
        a = pts[:-1].copy()
        b = pts[1:].copy()
        a[:, 0] -= shift
        b[:, 0] -= shift
        for extra in (0.0, -TWO_PI, TWO_PI):
            if extra == 0.0:
                sel = np.ones(len(a), dtype=bool)
            else:
                sel = np.abs(a[:, 0] + extra) <= math.pi + 0.6
            if not sel.any():
                continue
            a_list.append(a[sel] + np.array([extra, 0.0]))
            b_list.append(b[sel] + np.array([extra, 0.0]))
            lt_list.append(c.left_tag[sel])
            rt_list.append(c.right_tag[sel])
    model._seg_a = np.vstack(a_list)
    model._seg_b = np.vstack(b_list)
    model._seg_left = np.concatenate(lt_list)
    model._seg_right = np.concatenate(rt_list)


def _nearest_segment(model: AdmissibleSetModel, pt: np.ndarray):
    a, b = model._seg_a, model._seg_b
    d = b - a
    r = pt[None, :] - a
    denom = np.maximum(d[:, 0] ** 2 + d[:, 1] ** 2, 1e-30)
    t = np.clip((r[:, 0] * d[:, 0] + r[:, 1] * d[:, 1]) / denom, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist = np.hypot(pt[0] - proj[:, 0], pt[1] - proj[:, 1])
    i = int(np.argmin(dist))
    return i, float(dist[i]), d[i], r[i]


def membership(model: AdmissibleSetModel, s) -> MembershipVerdict:
    """Classify one state against the assembled set.

    The angle is reduced into the period cell first; states beyond the
    theta2 window raise :class:`WindowExceeded`.  Points in classified grid
    cells use the flood-fill component tag; points inside the boundary band
    fall back to a side test against the nearest boundary segment.
    """
    th1 = float(model.reduce_theta1(s[0]))
    th2 = float(s[1])
    if abs(th2) > model.theta2_max:
        raise WindowExceeded(f"|theta2| = {abs(th2):g} exceeds the window {model.theta2_max:g}")
    pt = np.array([th1, th2])
    i, dist, d, r = _nearest_segment(model, pt)
    env = float(constraint_envelope(model.params, (th1, th2)))
    if env > ENVELOPE_POSITIVE_TOL:
        return MembershipVerdict("OutsideG", dist)
    if dist <= BOUNDARY_VERDICT_TOL:
        return MembershipVerdict("Boundary", dist)
    n1, n2 = model.cell_comp.shape
    w1 = TWO_PI / n1
    w2 = 2 * model.theta2_max / n2
    i1 = min(int((th1 + math.pi) / w1), n1 - 1)
    i2 = min(max(int((th2 + model.theta2_max) / w2), 0), n2 - 1)
    if model.cell_comp[i1, i2] >= 0:
        return MembershipVerdict(TAG_NAMES[int(model.cell_tag[i1, i2])], dist)
    cross = d[0] * r[1] - d[1] * r[0]
    tag = int(model._seg_left[i] if cross > 0 else model._seg_right[i])
    if tag == TAG_OUTSIDE_G:
        # numerical sliver just outside the oval band
        tag = TAG_INADMISSIBLE if env > -ENVELOPE_POSITIVE_TOL else TAG_INTERIOR
    return MembershipVerdict(TAG_NAMES[tag], dist)


def interior_mask(model: AdmissibleSetModel, pts: np.ndarray) -> np.ndarray:
    """Fast bulk test: strictly-interior verdicts via the component grid.

    Points in blocked cells (within about one cell of a boundary curve) are
    reported as not interior.
    """
    th1 = np.mod(pts[:, 0] + math.pi, TWO_PI) - math.pi
    th2 = pts[:, 1]
    n1, n2 = model.cell_comp.shape
    w1 = TWO_PI / n1
    w2 = 2 * model.theta2_max / n2
    i1 = np.clip(((th1 + math.pi) / w1).astype(int), 0, n1 - 1)
    i2f = (th2 + model.theta2_max) / w2
    inside = (i2f >= 0) & (i2f < n2)
    i2 = np.clip(i2f.astype(int), 0, n2 - 1)
    out = np.zeros(len(pts), dtype=bool)
    sel = inside
    out[sel] = (model.cell_comp[i1[sel], i2[sel]] >= 0) & (
        model.cell_tag[i1[sel], i2[sel]] == TAG_INTERIOR
    )
    return out


# ---------------------------------------------------------------------------
# forward simulation and the sampled-policy membership oracle
# ---------------------------------------------------------------------------


@dataclass
class SimResult:
    t: np.ndarray
    states: np.ndarray
    violation_time: Optional[float]


def forward_simulate(p: PendulumParams, s0, control_policy: Callable, T_max: float, dt: float = 1e-3) -> SimResult:
    """Integrate the cable dynamics forward under a policy u(t, theta).

    Records the first time the envelope becomes positive (no feasible control
    keeps the cable taut); the trajectory stops there.
    """
    n = int(math.ceil(T_max / dt)) + 1
    ts = np.linspace(0.0, T_max, n)
    states = np.empty((n, 2))
    states[0] = (float(s0[0]), float(s0[1]))
    if float(constraint_envelope(p, states[0])) > ENVELOPE_POSITIVE_TOL:
        return SimResult(ts[:1], states[:1].copy(), 0.0)
    y = states[0].copy()
    for i in range(n - 1):
        t = ts[i]

        def rhs(yy, tt):
            u = float(np.clip(control_policy(tt, yy), -1.0, 1.0))
            d1, d2 = dynamics(p, yy, u)
            return np.array([d1, d2])

        k1 = rhs(y, t)
        k2 = rhs(y + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(y + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(y + dt * k3, t + dt)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        states[i + 1] = y
        if float(constraint_envelope(p, y)) > ENVELOPE_POSITIVE_TOL:
            return SimResult(ts[: i + 2], states[: i + 2].copy(), float(ts[i + 1]))
    return SimResult(ts, states, None)


def _project_control(p: PendulumParams, th1, th2, u):
    """Clip controls into the feasible interval wherever one exists."""
    sn = np.sin(th1)
    cs = np.cos(th1)
    num = p.M * p.l * th2 * th2 - p.Mg * cs
    safe_sn = np.where(np.abs(sn) < 1e-12, np.where(sn >= 0, 1e-12, -1e-12), sn)
    sat = num / safe_sn
    lo = np.where(sn > 0, -1.0, np.maximum(sat, -1.0))
    hi = np.where(sn > 0, np.minimum(sat, 1.0), 1.0)
    tiny = np.abs(sn) < 1e-12
    lo = np.where(tiny, -1.0, lo)
    hi = np.where(tiny, 1.0, hi)
    return np.clip(u, lo, hi)


def batch_simulate(p: PendulumParams, states0: np.ndarray, policy, T_max: float, dt: float = 2e-3,
                   observer: Optional[Callable] = None):
    """Vectorized fixed-step RK4 of many trajectories under one policy.

    ``policy(t, th1, th2) -> u`` (broadcasting).  Controls are projected into
    the feasible interval at every stage, so a trajectory only fails when the
    state itself leaves the constrained region.  Returns the final states and
    per-trajectory violation times (NaN = survived).  ``observer(t, states,
    alive)`` is called after every step.
    """
    y = states0.astype(float).copy()
    nt = int(math.ceil(T_max / dt))
    viol = np.full(len(y), np.nan)
    env0 = constraint_envelope(p, (y[:, 0], y[:, 1]))
    dead = env0 > ENVELOPE_POSITIVE_TOL
    viol[dead] = 0.0

    def rhs(t, th1, th2):
        u = _project_control(p, th1, th2, policy(t, th1, th2))
        sn = np.sin(th1)
        cs = np.cos(th1)
        den = p.l * (p.M + p.m * sn * sn)
        d2 = (-u * cs + (p.M + p.m) * p.g * sn - p.m * p.l * th2 * th2 * cs * sn) / den
        return th2, d2

    t = 0.0
    alive = ~dead
    for _ in range(nt):
        if not alive.any():
            break
        th1, th2 = y[alive, 0], y[alive, 1]
        a1, b1 = rhs(t, th1, th2)
        a2, b2 = rhs(t + 0.5 * dt, th1 + 0.5 * dt * a1, th2 + 0.5 * dt * b1)
        a3, b3 = rhs(t + 0.5 * dt, th1 + 0.5 * dt * a2, th2 + 0.5 * dt * b2)
        a4, b4 = rhs(t + dt, th1 + dt * a3, th2 + dt * b3)
        y[alive, 0] = th1 + (dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
        y[alive, 1] = th2 + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
        t += dt
        env = constraint_envelope(p, (y[alive, 0], y[alive, 1]))
        newly = env > ENVELOPE_POSITIVE_TOL
        if newly.any():
            idx = np.flatnonzero(alive)[newly]
            viol[idx] = t
            alive[idx] = False
        if observer is not None:
            observer(t, y, alive)
    return y, viol


def greedy_tension_policy(p: PendulumParams):
    """Push opposite to sin(theta1): the pointwise tension-maximizing control."""

    def policy(t, th1, th2):
        return -np.sign(np.sin(th1))

    return policy


def saturation_policy(p: PendulumParams):
    """Track the zero-tension control, clipped to the box."""

    def policy(t, th1, th2):
        sn = np.sin(th1)
        safe = np.where(np.abs(sn) < 1e-9, np.where(sn >= 0, 1e-9, -1e-9), sn)
        sat = (p.M * p.l * th2 * th2 - p.Mg * np.cos(th1)) / safe
        return np.clip(np.where(np.abs(sn) < 1e-9, 0.0, sat), -1.0, 1.0)

    return policy


def default_policies(p: PendulumParams) -> list:
    """The sampled policy family: constants, bang-bang switches, two feedbacks."""
    pols = [greedy_tension_policy(p), saturation_policy(p)]
    for u0 in (-1.0, -0.5, 0.0, 0.5, 1.0):
        pols.append(lambda t, th1, th2, u0=u0: np.full_like(np.asarray(th1, dtype=float), u0))
    for u0 in (-1.0, 1.0):
        for t1 in (0.5, 1.5, 3.0):
            pols.append(
                lambda t, th1, th2, u0=u0, t1=t1: np.full_like(
                    np.asarray(th1, dtype=float), u0 if t < t1 else -u0
                )
            )
    for u0 in (-1.0, 1.0):
        for t1, t2 in ((1.0, 2.0), (2.0, 4.0)):
            pols.append(
                lambda t, th1, th2, u0=u0, t1=t1, t2=t2: np.full_like(
                    np.asarray(th1, dtype=float), u0 if (t < t1 or t >= t2) else -u0
                )
            )
    for amp in (0.25, 0.75, -0.75):
        pols.append(lambda t, th1, th2, amp=amp: np.full_like(np.asarray(th1, dtype=float), amp * np.sign(np.cos(th1))))
    return pols[:20]


def random_bang_policies(p: PendulumParams, n: int, horizon: float, rng) -> list:
    """Random admissible policies: levels with up to two switch times.

    Controls are projected into the feasible interval during simulation, so
    every policy is admissible by construction.
    """
    pols = []
    for _ in range(n):
        levels = rng.choice([-1.0, -0.5, 0.5, 1.0], size=3)
        n_switch = int(rng.integers(0, 3))
        times = np.sort(rng.uniform(0.0, horizon, size=n_switch))

        def pol(t, th1, th2, levels=levels, times=times):
            k = int(np.searchsorted(times, t, side="right"))
            return np.full_like(np.asarray(th1, dtype=float), levels[k])

        pols.append(pol)
    return pols


def semi_permeability_check(
    model: AdmissibleSetModel,
    arcs: list[BarrierArc],
    n_points: int = 50,
    n_policies: int = 20,
    offset: float = 1e-3,
    T: float = 8.0,
    dt: float = 1e-3,
    seed: int = 0,
    check_stride: int = 5,
) -> dict:
    """No trajectory from just outside the boundary may enter the interior.

    Starts ``n_points`` states one ``offset`` along the adjoint (the
    non-admissible side) from samples of the boundary arcs, runs
    ``n_policies`` random admissible policies from each, and counts
    trajectories that reach a strictly-interior cell before the envelope
    turns positive.
    """
    p = model.params
    rng = np.random.default_rng(seed)
    candidates = []
    for arc in arcs:
        m = len(arc)
        lo, hi = max(1, m // 10), m - max(2, m // 10)
        for i in range(lo, hi):
            candidates.append((arc, i))
    if not candidates:
        raise ValueError("no boundary samples available")
    starts = []
    order = rng.permutation(len(candidates))
    for k in order:
        arc, i = candidates[k]
        d = arc.states[min(i + 1, len(arc) - 1)] - arc.states[max(i - 1, 0)]
        dn = float(np.hypot(d[0], d[1]))
        if dn == 0.0:
            continue
        # offset along the boundary normal, toward the arc's non-admissible side
        normal = np.array([-d[1], d[0]]) / dn
        x0 = arc.states[i] + offset * arc_outer_side(arc) * normal
        if float(constraint_envelope(p, x0)) > -1e-9 or abs(x0[1]) > model.theta2_max:
            continue
        starts.append(x0)
        if len(starts) >= n_points:
            break
    starts = np.array(starts)
    re_entries = 0
    counter = {"n": 0}

    for pol in random_bang_policies(p, n_policies, T, rng):
        entered = np.zeros(len(starts), dtype=bool)

        def observer(t, y, alive, entered=entered):
            counter["n"] += 1
            if counter["n"] % check_stride:
                return
            live = np.flatnonzero(alive & ~entered)
            if len(live) == 0:
                return
            hits = interior_mask(model, y[live])
            entered[live[hits]] = True

        batch_simulate(p, starts, pol, T, dt, observer=observer)
        re_entries += int(entered.sum())
    return {"points": len(starts), "policies": n_policies, "re_entries": re_entries}


@dataclass
class OracleReport:
    grid_theta1: np.ndarray
    grid_theta2: np.ndarray
    oracle_admissible: np.ndarray  # (n1, n2) bool
    computed_tag: np.ndarray  # (n1, n2) int8 (-1 where window exceeded)
    boundary_distance: np.ndarray
    band: float
    disagreements: list


def membership_oracle(
    model: AdmissibleSetModel,
    grid_shape: tuple = (60, 60),
    T_max: float = 10.0,
    dt: float = 2e-3,
    policies: Optional[list] = None,
    band_cells: float = 2.0,
    raise_on_disagreement: bool = True,
) -> OracleReport:
    """Brute-force check of membership against sampled control policies.

    A grid point is plausibly admissible when any sampled policy survives to
    ``T_max``.  Sampled policies under-approximate the true control family, so
    plausibly-admissible points must be computed-admissible, except within a
    band of two grid steps around the boundary curves.
    """
    p = model.params
    n1, n2 = grid_shape
    th1 = (np.arange(n1) + 0.5) * TWO_PI / n1 - math.pi
    th2 = (np.arange(n2) + 0.5) * (2 * model.theta2_max) / n2 - model.theta2_max
    pts = np.column_stack([np.repeat(th1, n2), np.tile(th2, n1)])
    pols = default_policies(p) if policies is None else policies

    admissible = np.zeros(len(pts), dtype=bool)
    for pol in pols:
        todo = ~admissible
        if not todo.any():
            break
        _, viol = batch_simulate(p, pts[todo], pol, T_max, dt)
        admissible[np.flatnonzero(todo)[np.isnan(viol)]] = True

    computed = np.empty(len(pts), dtype=np.int8)
    distance = np.empty(len(pts))
    for i, q in enumerate(pts):
        v = membership(model, q)
        computed[i] = {"Interior": TAG_INTERIOR, "Boundary": TAG_INTERIOR,
                       "Inadmissible": TAG_INADMISSIBLE, "OutsideG": TAG_OUTSIDE_G}[v.tag]
        distance[i] = v.distance_estimate

    band = band_cells * max(TWO_PI / n1, 2 * model.theta2_max / n2)
    bad = admissible & (computed != TAG_INTERIOR) & (distance > band)
    disagreements = [
        {"state": (float(pts[i, 0]), float(pts[i, 1])), "computed": TAG_NAMES[int(computed[i])],
         "distance": float(distance[i])}
        for i in np.flatnonzero(bad)
    ]
    report = OracleReport(
        grid_theta1=th1,
        grid_theta2=th2,
        oracle_admissible=admissible.reshape(n1, n2),
        computed_tag=computed.reshape(n1, n2),
        boundary_distance=distance.reshape(n1, n2),
        band=band,
        disagreements=disagreements,
    )
    if disagreements and raise_on_disagreement:
        raise OracleDisagreement(
            f"{len(disagreements)} oracle-admissible points classified inadmissible "
            f"outside the {band:.3f}-band; first: {disagreements[0]}"
        )
    return report
