"""Backward integration of the coupled state-adjoint system along the boundary.

From each tangency end point the four-dimensional system
(theta1, theta2, lambda1, lambda2) is integrated backward in time under the
Hamiltonian-minimizing control.  The control branch (bang at +/-1 or the
zero-tension feedback) is frozen between events; events are located by
bisection on the dense output of an embedded Runge-Kutta 4(5) stepper and the
integration restarts on the post-event branch.

Watched events: sin(theta1) crossings, sign changes of the switching function
lambda2 cos(theta1), the zero-tension control reaching either box bound
(branch changes between bang and active-constraint arcs), re-contact with the
zero-envelope curve, and exits from the analysis window.

Sample convention: samples are stored by decreasing time t (t[0] = 0 at the
end point).  The mode stored with a sample is the branch that governed the
integration interval ending at that sample, so event samples carry the
arriving branch and the post-event branch first appears on the next sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.integrate import RK45, solve_ivp

from .model import (
    EmptyControlSet,
    MODE_BANG_NEG,
    MODE_BANG_POS,
    MODE_CONSTRAINED,
    MODE_TIE,
    PendulumParams,
    TWO_PI,
    dynamics,
    hamiltonian,
    minimize_hamiltonian,
    multiplier,
    saturation_control,
)
from .tangency import TangencyPoint

EVENT_TIME_TOL = 1e-10
EVENT_ARM_TOL = 1e-8  # an event function must leave zero by this much before it can fire
ADJOINT_VANISH_TOL = 1e-12


class StepFailure(RuntimeError):
    """The adaptive stepper could not meet its tolerances."""


@dataclass(frozen=True)
class ArcOptions:
    """Knobs for one backward run; defaults cover slightly over one period."""

    max_backward_time: float = 30.0
    theta1_window: tuple = (-TWO_PI - 1.0, TWO_PI + 1.0)
    theta2_max: Optional[float] = None  # defaults to 3 sqrt(g/l)
    rtol: float = 1e-9
    atol: float = 1e-10
    max_step: float = 0.01
    corner_offset: float = 1e-3  # kink start offset, in radians of theta1 travel

    def resolved_theta2_max(self, p: PendulumParams) -> float:
        return 3.0 * p.free_fall_rate if self.theta2_max is None else self.theta2_max


@dataclass(frozen=True)
class ArcSample:
    t: float
    state: tuple
    adjoint: tuple
    control: float
    multiplier: float
    hamiltonian: float
    mode: int


@dataclass(frozen=True)
class ArcEvent:
    t: float
    kind: str
    state: tuple
    mode_change: Optional[tuple] = None  # (arriving mode, departing mode) when it changed


@dataclass
class BarrierArc:
    """Backward trajectory from one tangency point, sampled at solver steps."""

    source: TangencyPoint
    params: PendulumParams
    arc_id: str
    t: np.ndarray
    states: np.ndarray
    adjoints: np.ndarray
    controls: np.ndarray
    multipliers: np.ndarray
    hamiltonians: np.ndarray
    modes: np.ndarray
    events: list = field(default_factory=list)
    termination: str = "HorizonReached"

    def __len__(self):
        return len(self.t)

    def samples(self) -> Iterator[ArcSample]:
        for i in range(len(self.t)):
            yield ArcSample(
                t=float(self.t[i]),
                state=tuple(self.states[i]),
                adjoint=tuple(self.adjoints[i]),
                control=float(self.controls[i]),
                multiplier=float(self.multipliers[i]),
                hamiltonian=float(self.hamiltonians[i]),
                mode=int(self.modes[i]),
            )

    def control_of_mode(self, mode: int, state) -> float:
        if mode == MODE_CONSTRAINED:
            return float(saturation_control(self.params, state))
        if mode == MODE_BANG_POS:
            return 1.0
        if mode == MODE_BANG_NEG:
            return -1.0
        return float("nan")

    def truncated(self, t_stop: float, location=None, termination="StoppedAtIntersection"):
        """Copy cut at time ``t_stop``; samples with t < t_stop are dropped.

        A terminal sample is synthesized at ``t_stop`` (state taken from
        ``location`` when given) so both arcs of an intersection end at the
        identical point.
        """
        keep = self.t >= t_stop - 1e-15
        cut = len(self.t) if bool(keep.all()) else int(np.argmin(keep))
        t = self.t[:cut].copy()
        states = self.states[:cut].copy()
        adjoints = self.adjoints[:cut].copy()
        controls = self.controls[:cut].copy()
        multipliers = self.multipliers[:cut].copy()
        hams = self.hamiltonians[:cut].copy()
        modes = self.modes[:cut].copy()
        if len(t) == 0 or t[-1] > t_stop + 1e-15:
            st, ad, u, mu, H, mode = _interp_sample(self, t_stop, location)
            t = np.append(t, t_stop)
            states = np.vstack([states, st]) if len(states) else np.array([st])
            adjoints = np.vstack([adjoints, ad]) if len(adjoints) else np.array([ad])
            controls = np.append(controls, u)
            multipliers = np.append(multipliers, mu)
            hams = np.append(hams, H)
            modes = np.append(modes, mode)
        events = [e for e in self.events if e.t >= t_stop - 1e-12]
        return BarrierArc(
            source=self.source,
            params=self.params,
            arc_id=self.arc_id,
            t=t,
            states=states,
            adjoints=adjoints,
            controls=controls,
            multipliers=multipliers,
            hamiltonians=hams,
            modes=modes,
            events=events,
            termination=termination,
        )


def _interp_sample(arc: BarrierArc, t_query: float, location=None):
    """Sample at an intermediate time; control comes from the governing branch."""
    idx = int(np.searchsorted(-arc.t, -t_query))
    idx = min(max(idx, 1), len(arc.t) - 1)
    t0, t1 = arc.t[idx - 1], arc.t[idx]
    w = 0.0 if t1 == t0 else (t_query - t0) / (t1 - t0)
    st = (1 - w) * arc.states[idx - 1] + w * arc.states[idx]
    if location is not None:
        st = np.asarray(location, dtype=float)
    ad = (1 - w) * arc.adjoints[idx - 1] + w * arc.adjoints[idx]
    mode = int(arc.modes[idx])
    p = arc.params
    u = arc.control_of_mode(mode, st)
    if math.isnan(u):
        u = float((1 - w) * arc.controls[idx - 1] + w * arc.controls[idx])
    mu = multiplier(p, st, ad, u)
    H = float(hamiltonian(p, st, ad, u))
    return st, ad, u, mu, H, mode


def adjoint_rhs(p: PendulumParams, s, a, u_star, mu):
    """Forward-time adjoint derivative -J^T lambda - mu dh/dtheta."""
    th1, th2 = s[0], s[1]
    sn, cs = np.sin(th1), np.cos(th1)
    den = p.l * (p.M + p.m * sn * sn)
    num = -u_star * cs + (p.M + p.m) * p.g * sn - p.m * p.l * th2 * th2 * cs * sn
    dnum1 = u_star * sn + (p.M + p.m) * p.g * cs - p.m * p.l * th2 * th2 * (cs * cs - sn * sn)
    dden1 = 2.0 * p.l * p.m * sn * cs
    j21 = (dnum1 * den - num * dden1) / (den * den)
    j22 = -2.0 * p.m * p.l * th2 * cs * sn / den
    dh1 = u_star * cs - p.Mg * sn
    dh2 = -2.0 * p.M * p.l * th2
    dl1 = -(j21 * a[1]) - mu * dh1
    dl2 = -(a[0] + j22 * a[1]) - mu * dh2
    return np.array([dl1, dl2])


def _make_backward_rhs(p: PendulumParams, mode: int) -> Callable:
    """Backward-time RHS closure for one frozen control branch (scalar math)."""
    M, m, l, g = p.M, p.m, p.l, p.g
    Mg = M * g

    def rhs(s, y):
        th1, th2, la1, la2 = y
        sn = math.sin(th1)
        cs = math.cos(th1)
        den = l * (M + m * sn * sn)
        if mode == MODE_CONSTRAINED:
            u = (M * l * th2 * th2 - Mg * cs) / sn
            mu = la2 * cs / (sn * den)
        elif mode == MODE_BANG_POS:
            u, mu = 1.0, 0.0
        else:
            u, mu = -1.0, 0.0
        num = -u * cs + (M + m) * g * sn - m * l * th2 * th2 * cs * sn
        f2 = num / den
        dnum1 = u * sn + (M + m) * g * cs - m * l * th2 * th2 * (cs * cs - sn * sn)
        dden1 = 2.0 * l * m * sn * cs
        j21 = (dnum1 * den - num * dden1) / (den * den)
        j22 = -2.0 * m * l * th2 * cs * sn / den
        dh1 = u * cs - Mg * sn
        dh2 = -2.0 * M * l * th2
        dl1 = -(j21 * la2) - mu * dh1
        dl2 = -(la1 + j22 * la2) - mu * dh2
        return np.array([-th2, -f2, -dl1, -dl2])

    return rhs


def _event_functions(p: PendulumParams, opts: ArcOptions, period_index: int = 0):
    """Scalar event functions of the 4-vector y: (name, fn, terminal).

    The theta1 window is shifted by one period per oval index so arcs from
    different ovals are exact 2*pi translates of each other.
    """
    Mg, Ml = p.Mg, p.M * p.l
    shift = TWO_PI * period_index
    th1_lo, th1_hi = opts.theta1_window[0] + shift, opts.theta1_window[1] + shift
    th2_max = opts.resolved_theta2_max(p)

    def ev_switch(y):
        return y[3] * math.cos(y[0])

    def ev_sin(y):
        return math.sin(y[0])

    def ev_mode_hi(y):  # zero-tension control crossing +1 (== -h(q, +1))
        return Ml * y[1] * y[1] - Mg * math.cos(y[0]) - math.sin(y[0])

    def ev_mode_lo(y):  # zero-tension control crossing -1 (== -h(q, -1))
        return Ml * y[1] * y[1] - Mg * math.cos(y[0]) + math.sin(y[0])

    def ev_envelope(y):
        return -abs(math.sin(y[0])) + Mg * math.cos(y[0]) - Ml * y[1] * y[1]

    def ev_win_lo(y):
        return y[0] - th1_lo

    def ev_win_hi(y):
        return th1_hi - y[0]

    def ev_win_v(y):
        return th2_max * th2_max - y[1] * y[1]

    return [
        ("switch", ev_switch, False),
        ("sin-crossing", ev_sin, False),
        ("mode-hi", ev_mode_hi, False),
        ("mode-lo", ev_mode_lo, False),
        ("g0-contact", ev_envelope, True),
        ("window", ev_win_lo, True),
        ("window", ev_win_hi, True),
        ("window", ev_win_v, True),
    ]


def _bisect_event(fn, dense, s_lo, s_hi, v_lo):
    """Bracket a sign change of fn(dense(s)) on [s_lo, s_hi] to EVENT_TIME_TOL.

    Returns ``(a, b)`` with the crossing inside: ``a`` is on the arriving
    (pre-event) side, ``b`` on the departing side.
    """
    a, b = s_lo, s_hi
    fa = v_lo
    while b - a > EVENT_TIME_TOL:
        mid = 0.5 * (a + b)
        fm = fn(dense(mid))
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
    return a, b


def _corner_series_start(p: PendulumParams, tp: TangencyPoint, eps: float):
    """Series expansion of the arc leaving a kink point, at backward offset eps.

    The active-constraint multiplier is singular at the kink itself, so the
    integration starts a short way down the unique locally regular branch of
    the adjoint (lambda2 ~ -lambda1(0) * s).  The state expansion follows from
    riding the zero-tension surface; coefficients from matching powers of the
    backward time s.
    """
    g, l = p.g, p.l
    w = p.free_fall_rate
    th1c = tp.state[0]
    sgn = 1.0 if tp.state[1] > 0 else -1.0
    th1 = th1c + sgn * (-w * eps - (g * w / (24.0 * l)) * eps ** 3)
    th2 = sgn * (w + (g * w / (8.0 * l)) * eps ** 2)
    la1 = sgn * (1.0 - (3.0 * g / (8.0 * l)) * eps ** 2)
    la2 = sgn * (-eps + (3.0 * g / (8.0 * l)) * eps ** 3)
    return np.array([th1, th2, la1, la2])


def _select_mode(p: PendulumParams, y, prev_mode: int) -> int:
    """Hamiltonian-minimizing branch at y; exact ties keep the previous branch."""
    _, _, mode = minimize_hamiltonian(p, y[:2], y[2:])
    return prev_mode if mode == MODE_TIE else mode


def _nearest_interior(interval) -> float:
    """Feasible control nearest zero; the arrival limit at kink points."""
    return min(max(0.0, interval.lo), interval.hi)


def integrate_arc(p: PendulumParams, tp: TangencyPoint, opts: ArcOptions = ArcOptions()) -> BarrierArc:
    """Trace one boundary trajectory backward from a tangency end point."""
    events_spec = _event_functions(p, opts, tp.period_index)
    arc_events: list[ArcEvent] = []
    rows: list[tuple] = []  # (s, y, u, mu, H, mode)

    def record(s, y, mode):
        state, adj = y[:2], y[2:]
        if mode == MODE_CONSTRAINED:
            sn = math.sin(state[0])
            u = float(saturation_control(p, state))
            if abs(u) >= 1.0 - 1e-9:
                # bang junction: the box bound carries the activity, so the
                # mixed-constraint multiplier is zero there
                u = min(max(u, -1.0), 1.0)
                mu = 0.0
            else:
                mu = float(adj[1]) * math.cos(state[0]) / (sn * p.l * (p.M + p.m * sn * sn))
                if -1e-8 < mu < 0.0:
                    # switch events sit where the multiplier crosses zero; the
                    # arriving value is a localization residue of exactly 0
                    mu = 0.0
        else:
            u = 1.0 if mode == MODE_BANG_POS else -1.0
            mu = 0.0
        rows.append((s, np.asarray(y, dtype=float).copy(), u, mu, float(hamiltonian(p, state, adj, u)), mode))

    y_end = np.array([tp.state[0], tp.state[1], tp.final_adjoint[0], tp.final_adjoint[1]])
    if tp.kind == "smooth":
        u0 = tp.final_control.lo
        mode = MODE_BANG_POS if u0 > 0 else MODE_BANG_NEG
        rows.append((0.0, y_end, u0, 0.0, float(hamiltonian(p, tp.state, tp.final_adjoint, u0)), mode))
        s0, y0 = 0.0, y_end.copy()
    else:
        # Kink point: record the exact corner with the arrival-limit control and
        # multiplier, then start the integration from the series expansion.
        u0 = _nearest_interior(tp.final_control)
        mu0 = 1.0 / (p.free_fall_rate * p.l * p.M)
        rows.append((0.0, y_end, u0, mu0, float(hamiltonian(p, tp.state, tp.final_adjoint, u0)), MODE_CONSTRAINED))
        eps = opts.corner_offset * math.sqrt(p.l / p.g)
        y0 = _corner_series_start(p, tp, eps)
        s0, mode = eps, MODE_CONSTRAINED
        record(s0, y0, mode)

    s_max = opts.max_backward_time
    termination = "HorizonReached"

    while True:
        rhs = _make_backward_rhs(p, mode)
        stepper = RK45(rhs, s0, y0, s_max, rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step)
        # Sign each event function is departing from; 0 = still within noise of
        # zero (freshly fired or starting on its zero set), armed on leaving.
        sign_ref = [0 if abs(fn(y0)) <= EVENT_ARM_TOL else (1 if fn(y0) > 0 else -1) for _, fn, _ in events_spec]
        restart = False
        while stepper.status == "running":
            try:
                msg = stepper.step()
            except Exception as exc:
                raise StepFailure(str(exc)) from exc
            if stepper.status == "failed":
                raise StepFailure(msg or "adaptive step failed")
            s1, y1 = stepper.t, stepper.y
            dense = stepper.dense_output()
            crossings = []
            for i, (_, fn, _) in enumerate(events_spec):
                v1 = fn(y1)
                if sign_ref[i] == 0:
                    if abs(v1) > EVENT_ARM_TOL:
                        sign_ref[i] = 1 if v1 > 0 else -1
                    continue
                if v1 * sign_ref[i] < 0.0:
                    s_pre, s_post = _bisect_event(fn, dense, stepper.t_old, s1, sign_ref[i])
                    crossings.append((s_pre, s_post, i))
                elif abs(v1) > EVENT_ARM_TOL:
                    sign_ref[i] = 1 if v1 > 0 else -1
            if crossings:
                s_first = min(c[1] for c in crossings)
                near = [c for c in crossings if c[1] <= s_first + 10 * EVENT_TIME_TOL]
                # Simultaneous crossings: a terminal event takes precedence.
                hit = next((c for c in near if events_spec[c[2]][2]), near[0])
                hit_idx = hit[2]
                name, fn, terminal = events_spec[hit_idx]
                # terminal samples stay on the arriving (feasible) side of the
                # crossing; branch events restart on the departing side
                hit_s = hit[0] if terminal else hit[1]
                y_e = dense(hit_s)
                record(hit_s, y_e, mode)  # arriving branch
                s0, y0 = hit_s, y_e
                if terminal:
                    arc_events.append(ArcEvent(-hit_s, name, tuple(y_e[:2])))
                    termination = "LeftWindow" if name == "window" else "ReachedG0Again"
                    break
                try:
                    new_mode = _select_mode(p, y_e, mode)
                except EmptyControlSet:
                    # Bisection residue put the point a hair beyond the envelope.
                    arc_events.append(ArcEvent(-hit_s, "g0-contact", tuple(y_e[:2])))
                    termination = "ReachedG0Again"
                    break
                arc_events.append(
                    ArcEvent(-hit_s, name, tuple(y_e[:2]),
                             (mode, new_mode) if new_mode != mode else None)
                )
                mode = new_mode
                restart = True
                break
            record(s1, y1, mode)
            if float(np.hypot(y1[2], y1[3])) < ADJOINT_VANISH_TOL:
                termination = "AdjointVanished"
                s0, y0 = s1, y1
                break
        else:
            termination = "HorizonReached"
            break
        if not restart:
            break

    rows.sort(key=lambda r: r[0])
    s_arr = np.array([r[0] for r in rows])
    y_arr = np.array([r[1] for r in rows])
    return BarrierArc(
        source=tp,
        params=p,
        arc_id=tp.label,
        t=-s_arr,
        states=y_arr[:, :2],
        adjoints=y_arr[:, 2:],
        controls=np.array([r[2] for r in rows]),
        multipliers=np.array([r[3] for r in rows]),
        hamiltonians=np.array([r[4] for r in rows]),
        modes=np.array([r[5] for r in rows], dtype=int),
        events=sorted(arc_events, key=lambda e: -e.t),
        termination=termination,
    )


def integrate_all_arcs(p: PendulumParams, endpoints, opts: ArcOptions = ArcOptions()) -> list[BarrierArc]:
    return [integrate_arc(p, tp, opts) for tp in endpoints]


def hamiltonian_drift(arc: BarrierArc) -> float:
    """Maximum |H(t) - H(0)| over the recorded samples."""
    if len(arc) == 0:
        return 0.0
    return float(np.max(np.abs(arc.hamiltonians - arc.hamiltonians[0])))


def replay_forward(p: PendulumParams, arc: BarrierArc, rtol=1e-12, atol=1e-13,
                   corner_skip=0.01, start_index: int = 0):
    """Re-integrate the recorded arc forward in time from one of its samples.

    The control follows the recorded branch schedule: zero-tension feedback on
    active-constraint stretches, constants on bang stretches.
    ``start_index`` counts from the arc's earliest sample (0 = full replay).
    Returns ``(times, states, valid)`` at the arc's own sample times
    (increasing) for comparison against the stored backward samples.

    When the arc runs into a kink point the zero-tension feedback has a 0/0
    corner that forward integration cannot follow exactly; the replay stops
    ``corner_skip`` radians of theta1 short of it and the remaining samples
    are marked invalid (their states are copied from the record).
    """
    ts = np.asarray(arc.t[::-1], dtype=float)
    modes = arc.modes[::-1]
    states = arc.states[::-1]
    n = len(ts)
    out = states.copy()
    valid = np.ones(n, dtype=bool)
    valid[:start_index] = False
    # The forward interval (ts[j-1], ts[j]) is the backward step that ended at
    # the reversed sample j-1, so its governing branch is modes[j-1].
    gov = modes[:-1]

    stop = n - 1
    if n > 1 and int(gov[-1]) == MODE_CONSTRAINED and abs(math.sin(states[-1][0])) < 1e-9:
        corner = states[-1][0]
        while stop > 0 and int(gov[stop - 1]) == MODE_CONSTRAINED and abs(states[stop][0] - corner) < corner_skip:
            stop -= 1
        valid[stop + 1 :] = False

    j = start_index + 1
    y = states[start_index].copy()
    while j <= stop:
        k = j
        while k + 1 <= stop and gov[k] == gov[j - 1]:
            k += 1
        mode = int(gov[j - 1])

        def rhs(t, yy, _mode=mode):
            u = arc.control_of_mode(_mode, yy)
            d1, d2 = dynamics(p, yy, u)
            return [d1, d2]

        t_end = float(ts[k])
        if t_end > ts[j - 1]:
            sol = solve_ivp(
                rhs, (ts[j - 1], t_end), y, dense_output=True,
                rtol=rtol, atol=atol, max_step=arc_max_step(arc),
            )
            t_eval = np.clip(ts[j : k + 1], ts[j - 1], t_end)
            out[j : k + 1] = sol.sol(t_eval).T
            y = sol.y[:, -1].copy()
        else:
            out[j : k + 1] = y
        j = k + 1
    return ts, out, valid


def arc_max_step(arc: BarrierArc) -> float:
    span = float(arc.t[0] - arc.t[-1])
    return max(span / 50.0, 1e-3)
