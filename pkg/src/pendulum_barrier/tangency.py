"""End points of the admissible-set boundary on the zero-envelope curve.

The envelope's zero set is a 2*pi-periodic family of closed ovals around the
upright positions.  Boundary trajectories can only terminate on an oval at
points where the outward motion is tangential: two smooth points at
theta1 = +/- arctan(Mg) on the theta2 = 0 axis, and two kink points at
theta1 = 2 k pi where the envelope is not differentiable, at
theta2 = +/- sqrt(g/l).  Each carries the terminal adjoint used to seed the
backward integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np

from .model import (
    ControlInterval,
    PendulumParams,
    TWO_PI,
    constraint_envelope,
    dynamics,
    envelope_branch_gradient,
)

EndpointKind = Literal["smooth", "nonsmooth"]

ENVELOPE_ZERO_TOL = 1e-10
SMOOTH_RESIDUAL_TOL = 1e-8
NONSMOOTH_RESIDUAL_TOL = -1e-8


class SymmetryValidationFailed(RuntimeError):
    """Mirrored kink-point adjoint failed the tangentiality inequality."""


class SpuriousRootFound(RuntimeError):
    """The tangentiality equation has an unexpected root on the scanned interval."""


@dataclass(frozen=True)
class TangencyPoint:
    """A boundary end point on the zero-envelope curve with its terminal data.

    ``approach_side`` is +/-1 for kink points: the sign of sin(theta1) on the
    side from which boundary trajectories arrive (-1 means theta1 below the
    kink).  ``final_control`` is the limit of the feasible interval along the
    incoming trajectory; for smooth points it degenerates to one control.
    """

    state: tuple
    kind: EndpointKind
    final_adjoint: tuple
    final_control: ControlInterval
    period_index: int
    approach_side: Optional[int] = None
    label: str = ""

    @property
    def theta(self) -> np.ndarray:
        return np.array(self.state, dtype=float)

    @property
    def adjoint(self) -> np.ndarray:
        return np.array(self.final_adjoint, dtype=float)


def smooth_endpoints(p: PendulumParams, k_range: Iterable[int] = (-1, 0, 1)) -> list[TangencyPoint]:
    """End points where the envelope is differentiable: (+/- arctan(Mg) + 2kpi, 0).

    The terminal adjoint is the envelope gradient there; the feasible control
    degenerates to {+1} at the left point and {-1} at the right one.
    """
    theta_star = math.atan(p.Mg)
    out = []
    for k in k_range:
        for side in (-1, 1):
            th1 = side * theta_star + TWO_PI * k
            state = (th1, 0.0)
            # gradient evaluated at the period-reduced angle: exact periodicity
            grad = envelope_branch_gradient(p, (side * theta_star, 0.0), side)
            u_only = -float(side)
            out.append(
                TangencyPoint(
                    state=state,
                    kind="smooth",
                    final_adjoint=(float(grad[0]), float(grad[1])),
                    final_control=ControlInterval(u_only, u_only),
                    period_index=k,
                    approach_side=None,
                    label=f"smooth{'+' if side > 0 else '-'}@{k}",
                )
            )
    return out


def _arrival_control_limit(p: PendulumParams, state) -> float:
    """Limit of the zero-tension control along a trajectory reaching ``state``.

    On an active-constraint arc u equals (M l theta2^2 - Mg cos)/sin, which is
    0/0 at the kink points.  Differentiating numerator and denominator along
    the flow gives a linear equation for the limiting control.
    """
    th1, th2 = float(state[0]), float(state[1])
    sn, cs = math.sin(th1), math.cos(th1)

    def dnum_dt(u):
        _, dth2 = dynamics(p, (th1, th2), u)
        return 2.0 * p.M * p.l * th2 * float(dth2) + p.Mg * sn * th2

    dden_dt = cs * th2
    # dnum is affine in u: dnum(u) = r0 + r1 u.
    r0 = dnum_dt(0.0)
    r1 = dnum_dt(1.0) - r0
    denom = dden_dt - r1
    if denom == 0.0:
        raise ZeroDivisionError("degenerate arrival-control limit")
    return r0 / denom


def nonsmooth_endpoints(p: PendulumParams, k_range: Iterable[int] = (-1, 0, 1)) -> list[TangencyPoint]:
    """Kink end points (2kpi, +/- sqrt(g/l)) with one-sided terminal adjoints.

    The upper point is approached from theta1 < 2kpi, where the valid envelope
    branch has gradient (1, -2 M l sqrt(g/l)).  The lower point follows from
    the symmetry (theta1, theta2, u) -> (-theta1, -theta2, -u); its adjoint is
    validated against the tangentiality inequality before use.
    """
    w = p.free_fall_rate
    out = []
    for k in k_range:
        for sgn in (1, -1):
            th1c = TWO_PI * k
            state = (th1c, sgn * w)
            side = -sgn  # incoming trajectories live where sin(theta1) has this sign
            grad = envelope_branch_gradient(p, (0.0, sgn * w), side)
            u_lim = _arrival_control_limit(p, (0.0, sgn * w))
            if side < 0:
                interval = ControlInterval(u_lim, 1.0)
            else:
                interval = ControlInterval(-1.0, u_lim)
            tp = TangencyPoint(
                state=state,
                kind="nonsmooth",
                final_adjoint=(float(grad[0]), float(grad[1])),
                final_control=interval,
                period_index=k,
                approach_side=side,
                label=f"nonsmooth{'+' if sgn > 0 else '-'}@{k}",
            )
            if sgn < 0:
                residual = verify_tangentiality(p, tp)
                if residual < NONSMOOTH_RESIDUAL_TOL:
                    raise SymmetryValidationFailed(
                        f"mirrored adjoint at {state} violates the tangentiality "
                        f"inequality: residual {residual:.3e}"
                    )
            out.append(tp)
    return out


def all_endpoints(p: PendulumParams, k_range: Iterable[int] = (-1, 0, 1)) -> list[TangencyPoint]:
    ks = tuple(k_range)
    return smooth_endpoints(p, ks) + nonsmooth_endpoints(p, ks)


def verify_tangentiality(p: PendulumParams, tp: TangencyPoint) -> float:
    """Residual of the terminal tangentiality condition at an end point.

    Smooth points must satisfy min over the feasible controls of
    grad . f = 0; the returned value is |min| and must be <= 1e-8.  Kink
    points only need the one-sided min to be >= 0; the returned value is the
    signed min and must be >= -1e-8.
    """
    state = tp.theta
    if abs(float(constraint_envelope(p, state))) > ENVELOPE_ZERO_TOL:
        raise ValueError(f"end point {tp.state} is not on the zero-envelope curve")
    grad = tp.adjoint
    interval = tp.final_control

    def directional(u):
        dth1, dth2 = dynamics(p, state, u)
        return float(grad[0] * dth1 + grad[1] * dth2)

    # grad . f is affine in u, so the minimum sits at an interval endpoint.
    value = min(directional(interval.lo), directional(interval.hi))
    if tp.kind == "smooth":
        return abs(value)
    return value


def _tangency_seed_function(p: PendulumParams, th1):
    """Tangentiality equation on the left envelope branch with theta2 factored out.

    On the zero-envelope curve with theta1 in [-arctan(Mg), 0) the feasible
    control is +1 and theta2^2 = (Mg cos + sin)/(M l).  The full condition is
    theta2 * psi(theta1) = 0; this returns psi, whose only real root lies at
    arctan(1/(Mg)), outside the interval.
    """
    th1 = np.asarray(th1, dtype=float)
    sn, cs = np.sin(th1), np.cos(th1)
    th2_sq = (p.Mg * cs + sn) / (p.M * p.l)
    den = p.l * (p.M + p.m * sn * sn)
    f2 = (-cs + (p.M + p.m) * p.g * sn - p.m * p.l * th2_sq * cs * sn) / den
    return (cs - p.Mg * sn) - 2.0 * p.M * p.l * f2


def reject_spurious_roots(p: PendulumParams, grid_step: float = 1e-4) -> str:
    """Scan the tangentiality equation for extra roots left of the smooth end point.

    Confirms numerically that (-arctan(Mg), 0) is the only solution with
    theta1 in [-arctan(Mg), 0): after factoring out theta2 = 0 the remaining
    function has no sign change on the interval, its algebraic root
    arctan(1/(Mg)) lying outside.  Returns a plain-text log of the scan and
    raises :class:`SpuriousRootFound` if a sign change shows up.
    """
    theta_star = math.atan(p.Mg)
    n = max(4, int(math.ceil(theta_star / grid_step)))
    grid = np.linspace(-theta_star, 0.0, n, endpoint=False)
    values = _tangency_seed_function(p, grid)
    signs = np.sign(values)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    factored_root = math.atan(1.0 / p.Mg)
    lines = [
        "tangency root scan",
        f"params: M={p.M} m={p.m} l={p.l} g={p.g}",
        f"interval: [{-theta_star:.12f}, 0), {n} samples, step <= {grid_step:g}",
        f"factored root arctan(1/(Mg)) = {factored_root:.12f} "
        f"(outside interval: {not (-theta_star <= factored_root < 0.0)})",
        f"min |psi| on grid = {float(np.min(np.abs(values))):.6e}",
        f"sign changes detected: {len(flips)}",
    ]
    if len(flips):
        locs = ", ".join(f"{grid[i]:.9f}" for i in flips[:5])
        lines.append(f"sign-change locations: {locs}")
        raise SpuriousRootFound("\n".join(lines))
    lines.append("result: no root other than theta2 = 0 at the end point itself")
    return "\n".join(lines)
