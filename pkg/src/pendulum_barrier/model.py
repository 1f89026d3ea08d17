"""Cart pendulum with a cable that must stay taut.

The mass hangs from a massless cable attached to a cart; ``theta1`` is the
cable angle measured from the upward vertical (``theta1 = pi`` is the hanging
position), ``theta2`` its angular rate, and the control ``u`` is the
normalized horizontal force on the cart, ``|u| <= 1``.  Requiring nonnegative
cable tension is equivalent to the mixed state-control inequality

    h(theta, u) = u sin(theta1) + M g cos(theta1) - M l theta2**2 <= 0.

This module holds the reduced two-dimensional dynamics, the constraint and
its envelope over the control box, the state-dependent feasible control
interval, cable tension, and the Hamiltonian machinery (minimizer, switching
branches, constraint multiplier) that drives the boundary construction.

All functions are pure and accept scalars or broadcasting numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

TWO_PI = 2.0 * math.pi

# Hamiltonian-minimizer branch tags.
MODE_BANG_NEG = -1
MODE_BANG_POS = 1
MODE_CONSTRAINED = 2
MODE_TIE = 0
MODE_NAMES = {
    MODE_BANG_NEG: "bang-1",
    MODE_BANG_POS: "bang+1",
    MODE_CONSTRAINED: "constrained",
    MODE_TIE: "tie",
}


class EmptyControlSet(ValueError):
    """No admissible control exists at the queried state (envelope > 0)."""


class SingularMultiplier(ValueError):
    """Active-constraint multiplier requested where sin(theta1) = 0."""


@dataclass(frozen=True)
class PendulumParams:
    """Physical constants: cart mass M, pendulum mass m, cable length l, gravity g."""

    M: float
    m: float
    l: float
    g: float

    def __post_init__(self):
        for name in ("M", "m", "l", "g"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def Mg(self) -> float:
        return self.M * self.g

    @property
    def free_fall_rate(self) -> float:
        """Angular rate sqrt(g/l) at which gravity alone curves the mass on the cable circle."""
        return math.sqrt(self.g / self.l)

    def activation_tol(self) -> float:
        """Scale-aware tolerance deciding whether the mixed constraint is active."""
        return 1e-9 * (1.0 + self.Mg)


@dataclass(frozen=True)
class ControlInterval:
    """Feasible control interval [lo, hi] within the box [-1, 1]; may be empty."""

    lo: float
    hi: float
    empty: bool = False

    def contains(self, u: float, tol: float = 0.0) -> bool:
        return (not self.empty) and (self.lo - tol <= u <= self.hi + tol)

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo


@dataclass(frozen=True)
class FullState:
    """Four-dimensional state (cable angle/rate plus cart position/velocity), I/O only."""

    theta1: float
    theta2: float
    x1: float
    x2: float


@runtime_checkable
class ConstrainedControlSystem(Protocol):
    """Minimal surface a system must expose for the boundary machinery.

    The pendulum instance below is the only implementation here; the protocol
    exists so further single-constraint systems can slot in later.
    """

    def dynamics(self, s, u): ...

    def dynamics_jacobian(self, s, u): ...

    def mixed_constraint(self, s, u): ...

    def constraint_envelope(self, s): ...

    def control_set(self, s): ...


def dynamics(p: PendulumParams, s, u):
    """Right-hand side (dtheta1, dtheta2) of the reduced cable-angle dynamics."""
    th1, th2 = s[0], s[1]
    sn = np.sin(th1)
    cs = np.cos(th1)
    den = p.l * (p.M + p.m * sn * sn)
    dth2 = (-u * cs + (p.M + p.m) * p.g * sn - p.m * p.l * th2 * th2 * cs * sn) / den
    return (th2 * np.ones_like(dth2) if np.ndim(dth2) else th2, dth2)


def dynamics_jacobian(p: PendulumParams, s, u):
    """Partial derivatives of the dynamics with respect to (theta1, theta2), 2x2."""
    th1, th2 = s[0], s[1]
    sn = np.sin(th1)
    cs = np.cos(th1)
    den = p.l * (p.M + p.m * sn * sn)
    num = -u * cs + (p.M + p.m) * p.g * sn - p.m * p.l * th2 * th2 * cs * sn
    dnum1 = u * sn + (p.M + p.m) * p.g * cs - p.m * p.l * th2 * th2 * (cs * cs - sn * sn)
    dden1 = 2.0 * p.l * p.m * sn * cs
    j21 = (dnum1 * den - num * dden1) / (den * den)
    j22 = -2.0 * p.m * p.l * th2 * cs * sn / den
    zero = np.zeros_like(j21)
    one = np.ones_like(j21)
    return np.array([[zero, one], [j21, j22]])


def mixed_constraint(p: PendulumParams, s, u):
    """Tension constraint h(theta, u); nonnegative tension is h <= 0."""
    th1, th2 = s[0], s[1]
    return u * np.sin(th1) + p.Mg * np.cos(th1) - p.M * p.l * th2 * th2


def constraint_gradient(p: PendulumParams, s, u):
    """Gradient of the mixed constraint with respect to (theta1, theta2)."""
    th1, th2 = s[0], s[1]
    return np.array([u * np.cos(th1) - p.Mg * np.sin(th1), -2.0 * p.M * p.l * th2])


def constraint_envelope(p: PendulumParams, s):
    """Pointwise minimum of the mixed constraint over the control box.

    Zero level set is the curve where no control can make the tension
    strictly positive; the region where it is positive is unavoidable
    free fall.
    """
    th1, th2 = s[0], s[1]
    return -np.abs(np.sin(th1)) + p.Mg * np.cos(th1) - p.M * p.l * th2 * th2


def envelope_branch_gradient(p: PendulumParams, s, side: int):
    """Gradient of the envelope branch valid on one side of sin(theta1) = 0.

    ``side=+1`` selects the branch for sin(theta1) > 0, ``side=-1`` the one
    for sin(theta1) < 0.  Where sin(theta1) != 0 the branch containing the
    point is the envelope's actual gradient; at the kink the two branches
    give the one-sided limits.
    """
    th1, th2 = s[0], s[1]
    d1 = -side * np.cos(th1) - p.Mg * np.sin(th1)
    return np.array([d1, -2.0 * p.M * p.l * th2])


def saturation_control(p: PendulumParams, s):
    """Control making the tension exactly zero: (M l theta2^2 - M g cos)/sin.

    Unbounded where sin(theta1) -> 0; callers on the active-constraint branch
    must stay clear of that locus.
    """
    th1, th2 = s[0], s[1]
    return (p.M * p.l * th2 * th2 - p.Mg * np.cos(th1)) / np.sin(th1)


def control_set(p: PendulumParams, s) -> ControlInterval:
    """Feasible control interval keeping the cable taut at the given state."""
    th1, th2 = float(s[0]), float(s[1])
    sn = math.sin(th1)
    if sn == 0.0:
        # Constraint is control-independent here; feasible iff envelope <= 0.
        if p.Mg * math.cos(th1) - p.M * p.l * th2 * th2 > 0.0:
            return ControlInterval(math.nan, math.nan, empty=True)
        return ControlInterval(-1.0, 1.0)
    sat = (p.M * p.l * th2 * th2 - p.Mg * math.cos(th1)) / sn
    if sn > 0.0:
        lo, hi = -1.0, min(sat, 1.0)
    else:
        lo, hi = max(sat, -1.0), 1.0
    if lo > hi:
        # collapse roundoff-thin inversions on the zero-envelope curve to the
        # degenerate one-point interval
        if lo - hi <= 1e-11 * (1.0 + p.Mg):
            mid = min(max(0.5 * (lo + hi), -1.0), 1.0)
            return ControlInterval(mid, mid)
        return ControlInterval(math.nan, math.nan, empty=True)
    return ControlInterval(lo, hi)


def tension(p: PendulumParams, s, u):
    """Cable tension in newtons, computed via the constraint identity.

    Equals -m (zddot + g)/cos(theta1) wherever cos(theta1) != 0, but stays
    regular across cos(theta1) = 0.
    """
    th1 = s[0]
    sn = np.sin(th1)
    return -p.m * mixed_constraint(p, s, u) / (p.M + p.m * sn * sn)


def tension_from_accel(p: PendulumParams, s, u):
    """Reference tension from the vertical force balance on the mass.

    Division form; valid only where cos(theta1) != 0.  Kept as an independent
    cross-check of :func:`tension`.
    """
    th1, th2 = s[0], s[1]
    _, dth2 = dynamics(p, s, u)
    zdd = -p.l * (th2 * th2 * np.cos(th1) + dth2 * np.sin(th1))
    return -p.m * (zdd + p.g) / np.cos(th1)


def hamiltonian(p: PendulumParams, s, a, u):
    """lambda . f(theta, u) for the reduced dynamics."""
    _, dth2 = dynamics(p, s, u)
    return a[0] * s[1] + a[1] * dth2


def hamiltonian_u_coefficient(p: PendulumParams, s, a):
    """Coefficient of u in the (u-linear) Hamiltonian."""
    th1 = s[0]
    sn = np.sin(th1)
    return -a[1] * np.cos(th1) / (p.l * (p.M + p.m * sn * sn))


def minimize_hamiltonian(p: PendulumParams, s, a):
    """Minimize the Hamiltonian over the feasible control interval.

    Returns ``(u_star, value, mode)`` where mode is one of the branch tags:
    bang at -1/+1, the active-constraint (zero tension) control, or a tie
    when the Hamiltonian does not depend on u.  Ties return the feasible
    control nearest zero; trajectory code resolves them by keeping the
    previous branch.

    Raises :class:`EmptyControlSet` when no feasible control exists.
    """
    th1, th2 = float(s[0]), float(s[1])
    interval = control_set(p, s)
    if interval.empty:
        raise EmptyControlSet(f"no feasible control at theta=({th1}, {th2})")
    la2 = float(a[1])
    switch = la2 * math.cos(th1)
    sn = math.sin(th1)
    if switch > 0.0:
        # Coefficient of u is negative: take the largest feasible control.
        if sn <= 0.0:
            u = 1.0
            mode = MODE_BANG_POS
        else:
            sat = (p.M * p.l * th2 * th2 - p.Mg * math.cos(th1)) / sn
            if sat < 1.0:
                u, mode = sat, MODE_CONSTRAINED
            else:
                u, mode = 1.0, MODE_BANG_POS
    elif switch < 0.0:
        if sn >= 0.0:
            u = -1.0
            mode = MODE_BANG_NEG
        else:
            sat = (p.M * p.l * th2 * th2 - p.Mg * math.cos(th1)) / sn
            if sat > -1.0:
                u, mode = sat, MODE_CONSTRAINED
            else:
                u, mode = -1.0, MODE_BANG_NEG
    else:
        u = min(max(0.0, interval.lo), interval.hi)
        mode = MODE_TIE
    return u, float(hamiltonian(p, s, a, u)), mode


def multiplier(p: PendulumParams, s, a, u_star):
    """Constraint multiplier accompanying the Hamiltonian minimizer.

    Nonzero only when the tension constraint is active (within the scale-aware
    tolerance) at a control strictly inside the box, i.e. on zero-tension
    arcs; there stationarity pins mu = lambda2 cot(theta1) / (l (M + m sin^2)).
    """
    th1, th2 = float(s[0]), float(s[1])
    h = float(mixed_constraint(p, s, u_star))
    if abs(h) > p.activation_tol() or abs(u_star) >= 1.0:
        return 0.0
    sn = math.sin(th1)
    if sn == 0.0:
        raise SingularMultiplier(
            f"active-constraint multiplier undefined at sin(theta1)=0, theta=({th1}, {th2})"
        )
    mu = float(a[1]) * math.cos(th1) / (sn * p.l * (p.M + p.m * sn * sn))
    return mu


def full_dynamics(p: PendulumParams, q: FullState, u: float) -> tuple:
    """Four-dimensional right-hand side including the cart, for I/O and simulation."""
    th = (q.theta1, q.theta2)
    dth1, dth2 = dynamics(p, th, u)
    sn = math.sin(q.theta1)
    cs = math.cos(q.theta1)
    dx2 = (u + p.m * p.l * q.theta2 ** 2 * sn - p.m * p.g * cs * sn) / (p.M + p.m * sn * sn)
    return (dth1, dth2, q.x2, dx2)


@dataclass(frozen=True)
class CablePendulum:
    """Bundles the parameters with the generic system surface."""

    params: PendulumParams

    def dynamics(self, s, u):
        return dynamics(self.params, s, u)

    def dynamics_jacobian(self, s, u):
        return dynamics_jacobian(self.params, s, u)

    def mixed_constraint(self, s, u):
        return mixed_constraint(self.params, s, u)

    def constraint_envelope(self, s):
        return constraint_envelope(self.params, s)

    def control_set(self, s):
        return control_set(self.params, s)
