import math

import pytest

from pendulum_barrier.model import (
    CablePendulum,
    ConstrainedControlSystem,
    FullState,
    PendulumParams,
    full_dynamics,
)


def test_pendulum_satisfies_system_protocol():
    sys = CablePendulum(PendulumParams(0.1, 0.1, 1.0, 10.0))
    assert isinstance(sys, ConstrainedControlSystem)
    s = (0.4, 4.0)
    d1, d2 = sys.dynamics(s, 0.3)
    assert d1 == 4.0
    assert math.isfinite(float(d2))
    assert math.isfinite(float(sys.mixed_constraint(s, 0.3)))
    assert math.isfinite(float(sys.constraint_envelope(s)))
    assert not sys.control_set(s).empty


def test_full_dynamics_includes_cart():
    p = PendulumParams(0.1, 0.1, 1.0, 10.0)
    q = FullState(theta1=math.pi, theta2=0.0, x1=2.0, x2=0.5)
    d = full_dynamics(p, q, 0.0)
    assert d[0] == 0.0
    assert d[2] == 0.5  # cart position rate is the cart velocity
    # hanging at rest: the pendulum does not accelerate, the cart does not
    # accelerate without force
    assert d[1] == pytest.approx(0.0, abs=1e-12)
    assert d[3] == pytest.approx(0.0, abs=1e-12)


def test_full_dynamics_cart_force():
    p = PendulumParams(0.1, 0.1, 1.0, 10.0)
    q = FullState(theta1=math.pi, theta2=0.0, x1=0.0, x2=0.0)
    d = full_dynamics(p, q, 1.0)
    assert d[3] == pytest.approx(1.0 / p.M, rel=1e-12)  # sin(pi) ~ 0: force over cart mass
