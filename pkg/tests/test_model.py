import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pendulum_barrier.model import (
    EmptyControlSet,
    MODE_BANG_NEG,
    MODE_BANG_POS,
    MODE_CONSTRAINED,
    PendulumParams,
    SingularMultiplier,
    TWO_PI,
    constraint_envelope,
    control_set,
    dynamics,
    dynamics_jacobian,
    hamiltonian,
    hamiltonian_u_coefficient,
    minimize_hamiltonian,
    mixed_constraint,
    multiplier,
    tension,
    tension_from_accel,
)

P = PendulumParams(0.1, 0.1, 1.0, 10.0)
P_BIG = PendulumParams(0.5, 0.1, 1.0, 10.0)

angles = st.floats(-10.0, 10.0)
rates = st.floats(-10.0, 10.0)
controls = st.floats(-1.0, 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        PendulumParams(-0.1, 0.1, 1.0, 10.0)
    with pytest.raises(ValueError):
        PendulumParams(0.1, 0.1, 0.0, 10.0)


def test_dynamics_upright_rest():
    assert dynamics(P, (0.0, 0.0), 0.0) == (0.0, 0.0)


def test_dynamics_at_free_fall_corner():
    d1, d2 = dynamics(P, (0.0, math.sqrt(10.0)), -1.0)
    assert d1 == pytest.approx(3.16227766016838, abs=1e-11)
    assert d2 == pytest.approx(10.0, rel=1e-14)


def test_dynamics_sideways():
    d1, d2 = dynamics(P_BIG, (math.pi / 2, 0.0), 1.0)
    assert d1 == 0.0
    assert d2 == pytest.approx(10.0, rel=1e-12)


def test_jacobian_structure():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = (rng.uniform(-7, 7), rng.uniform(-10, 10))
        J = dynamics_jacobian(P, s, rng.uniform(-1, 1))
        assert J[0][0] == 0.0
        assert J[0][1] == 1.0


def test_jacobian_upright_entry():
    J = dynamics_jacobian(P, (0.0, 0.0), 0.0)
    assert J[1][0] == pytest.approx((P.M + P.m) * P.g / (P.l * P.M), rel=1e-14)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(1000):
        th1 = rng.uniform(-7, 7)
        th2 = rng.uniform(-10, 10)
        u = rng.uniform(-1, 1)
        J = dynamics_jacobian(P, (th1, th2), u)
        for (r, c), analytic in np.ndenumerate(np.asarray(J, dtype=float)):
            e = [0.0, 0.0]
            e[c] = h
            fp = dynamics(P, (th1 + e[0], th2 + e[1]), u)[r]
            fm = dynamics(P, (th1 - e[0], th2 - e[1]), u)[r]
            fd = (fp - fm) / (2 * h)
            assert fd == pytest.approx(analytic, rel=1e-6, abs=1e-6)


def test_mixed_constraint_values():
    assert mixed_constraint(P, (0.0, math.sqrt(10.0)), 0.3) == pytest.approx(0.0, abs=1e-14)
    assert mixed_constraint(P, (math.pi / 2, 0.0), 1.0) == pytest.approx(1.0, rel=1e-12)
    assert mixed_constraint(P, (math.pi, 0.0), 0.0) == pytest.approx(-1.0, rel=1e-12)


def test_envelope_values():
    assert constraint_envelope(P, (0.0, 0.0)) == pytest.approx(1.0)
    assert constraint_envelope(P, (math.pi / 4, 0.0)) == pytest.approx(0.0, abs=1e-14)
    assert constraint_envelope(P, (0.0, math.sqrt(10.0))) == pytest.approx(0.0, abs=1e-14)


def test_envelope_is_vertex_minimum():
    rng = np.random.default_rng(5)
    th1 = rng.uniform(-7, 7, 10_000)
    th2 = rng.uniform(-10, 10, 10_000)
    env = constraint_envelope(P, (th1, th2))
    h_lo = mixed_constraint(P, (th1, th2), -1.0)
    h_hi = mixed_constraint(P, (th1, th2), 1.0)
    assert np.allclose(env, np.minimum(h_lo, h_hi), rtol=0, atol=1e-12)


def test_control_set_full_box_on_sin_zero():
    iv = control_set(P, (0.0, math.sqrt(2 * P.g / P.l)))
    assert (iv.lo, iv.hi, iv.empty) == (-1.0, 1.0, False)


def test_control_set_empty_in_free_fall():
    assert control_set(P, (0.0, 0.0)).empty


def test_control_set_singleton_at_smooth_endpoint():
    iv = control_set(P, (-math.atan(P.Mg), 0.0))
    assert iv.lo == pytest.approx(1.0, abs=1e-12)
    assert iv.hi == 1.0


def test_control_set_partial_interval():
    iv = control_set(P, (math.pi / 2, 2.0))
    assert iv.lo == -1.0
    assert iv.hi == pytest.approx(0.4, abs=1e-12)


def test_control_set_nonempty_iff_envelope_nonpositive():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        s = (rng.uniform(-7, 7), rng.uniform(-6, 6))
        env = float(constraint_envelope(P, s))
        assert control_set(P, s).empty == (env > 0.0)


def test_control_set_degenerates_on_boundary():
    # on the zero-envelope curve the interval collapses to one point
    th1 = -0.3
    th2 = math.sqrt((P.Mg * math.cos(th1) + math.sin(th1)) / (P.M * P.l))
    iv = control_set(P, (th1, th2))
    assert not iv.empty
    assert iv.width == pytest.approx(0.0, abs=1e-9)


def test_tension_zero_on_envelope_with_minimizer():
    th1 = -0.3
    th2 = math.sqrt((P.Mg * math.cos(th1) + math.sin(th1)) / (P.M * P.l))
    assert tension(P, (th1, th2), 1.0) == pytest.approx(0.0, abs=1e-12)


def test_tension_hanging_at_rest():
    assert tension(P, (math.pi, 0.0), 0.0) == pytest.approx(1.0, rel=1e-12)


def test_tension_identity_suite():
    rng = np.random.default_rng(13)
    th1 = rng.uniform(-7, 7, 10_000)
    th2 = rng.uniform(-10, 10, 10_000)
    u = rng.uniform(-1, 1, 10_000)
    T = tension(P, (th1, th2), u)
    h = mixed_constraint(P, (th1, th2), u)
    resid = T * (P.M + P.m * np.sin(th1) ** 2) + P.m * h
    scale = np.maximum(np.abs(T), 1.0)
    assert np.max(np.abs(resid) / scale) < 1e-12
    # nonnegative tension is exactly the mixed constraint
    assert np.all((h <= 0) == (T >= 0))


def test_tension_against_force_balance():
    rng = np.random.default_rng(17)
    n = 0
    while n < 1000:
        s = (rng.uniform(-7, 7), rng.uniform(-10, 10))
        if abs(math.cos(s[0])) < 0.1:
            continue
        u = rng.uniform(-1, 1)
        t1 = float(tension(P, s, u))
        t2 = float(tension_from_accel(P, s, u))
        assert t1 == pytest.approx(t2, rel=1e-9, abs=1e-9)
        h = float(mixed_constraint(P, s, u))
        if abs(h) > 1e-12:
            assert np.sign(t1) == -np.sign(h)
        n += 1


def test_hamiltonian_zero_adjoint():
    assert hamiltonian(P, (1.0, 2.0), (0.0, 0.0), 0.5) == 0.0


def test_hamiltonian_zero_at_smooth_endpoint():
    th1 = -math.atan(P.Mg)
    lam = (math.cos(th1) - P.Mg * math.sin(th1), 0.0)
    assert hamiltonian(P, (th1, 0.0), lam, 1.0) == pytest.approx(0.0, abs=1e-14)


def test_hamiltonian_linear_in_control():
    rng = np.random.default_rng(19)
    for _ in range(200):
        s = (rng.uniform(-7, 7), rng.uniform(-10, 10))
        a = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        h0 = float(hamiltonian(P, s, a, 0.0))
        hp = float(hamiltonian(P, s, a, 1.0))
        hm = float(hamiltonian(P, s, a, -1.0))
        assert hp + hm == pytest.approx(2 * h0, rel=1e-10, abs=1e-10)
        coeff = float(hamiltonian_u_coefficient(P, s, a))
        assert hp - h0 == pytest.approx(coeff, rel=1e-10, abs=1e-12)


def test_minimizer_branches():
    # switching function negative, lower half-plane of sin: bang at -1
    u, _, mode = minimize_hamiltonian(P, (0.3, 6.0), (0.0, -1.0))
    assert (u, mode) == (-1.0, MODE_BANG_NEG)
    u, _, mode = minimize_hamiltonian(P, (-0.3, 6.0), (0.0, 1.0))
    assert (u, mode) == (1.0, MODE_BANG_POS)
    # interior minimum on the zero-tension control
    u, _, mode = minimize_hamiltonian(P, (math.pi / 2, 2.0), (0.0, 1e-3))
    assert mode == MODE_CONSTRAINED
    assert u == pytest.approx(0.4, abs=1e-12)


def test_minimizer_raises_on_empty_set():
    with pytest.raises(EmptyControlSet):
        minimize_hamiltonian(P, (0.0, 0.0), (1.0, 1.0))


def test_minimizer_beats_grid_scan():
    rng = np.random.default_rng(23)
    n = 0
    while n < 1000:
        s = (rng.uniform(-7, 7), rng.uniform(-8, 8))
        iv = control_set(P, s)
        if iv.empty:
            continue
        a = (rng.uniform(-2, 2), rng.uniform(-2, 2))
        u_star, val, _ = minimize_hamiltonian(P, s, a)
        grid = np.linspace(iv.lo, iv.hi, max(2, int(iv.width / 1e-4) + 1))
        vals = hamiltonian(P, s, a, grid)
        assert float(np.min(vals)) >= val - 1e-9
        n += 1


def test_multiplier_inactive_is_zero():
    assert multiplier(P, (math.pi, 0.0), (1.0, 1.0), 0.0) == 0.0


def test_multiplier_active_with_zero_adjoint():
    th1 = -0.3
    th2 = math.sqrt((P.Mg * math.cos(th1) + math.sin(th1)) / (P.M * P.l))
    assert multiplier(P, (th1, th2), (1.0, 0.0), 1.0) == 0.0


def test_multiplier_singular_at_sin_zero():
    with pytest.raises(SingularMultiplier):
        multiplier(P, (0.0, math.sqrt(P.g / P.l)), (1.0, -0.5), 0.0)


def test_multiplier_zero_at_box_vertex():
    # active constraint at a bang control: box bound carries the activity
    th1 = -math.atan(P.Mg)
    assert multiplier(P, (th1, 0.0), (1.4, 0.2), 1.0) == 0.0


@settings(max_examples=300, deadline=None)
@given(angles, rates, controls)
def test_tension_identity_property(th1, th2, u):
    T = float(tension(P, (th1, th2), u))
    h = float(mixed_constraint(P, (th1, th2), u))
    resid = T * (P.M + P.m * math.sin(th1) ** 2) + P.m * h
    assert abs(resid) <= 1e-12 * max(1.0, abs(T))


@settings(max_examples=300, deadline=None)
@given(angles, rates)
def test_envelope_vertex_property(th1, th2):
    env = float(constraint_envelope(P, (th1, th2)))
    vertex_min = min(
        float(mixed_constraint(P, (th1, th2), -1.0)),
        float(mixed_constraint(P, (th1, th2), 1.0)),
    )
    assert env == pytest.approx(vertex_min, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(angles, rates, controls)
def test_periodicity(th1, th2, u):
    s0 = (th1, th2)
    s1 = (th1 + TWO_PI, th2)
    d0 = dynamics(P, s0, u)
    d1 = dynamics(P, s1, u)
    assert d0[1] == pytest.approx(d1[1], rel=1e-9, abs=1e-9)
    assert float(constraint_envelope(P, s0)) == pytest.approx(
        float(constraint_envelope(P, s1)), rel=1e-9, abs=1e-9
    )
    i0, i1 = control_set(P, s0), control_set(P, s1)
    assert i0.empty == i1.empty
    if not i0.empty:
        assert i0.lo == pytest.approx(i1.lo, abs=1e-9)
        assert i0.hi == pytest.approx(i1.hi, abs=1e-9)
