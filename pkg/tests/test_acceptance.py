"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.  Tolerances are fixed here, not configurable.
"""

import math
import time

import numpy as np
import pytest

from pendulum_barrier.assembly import (
    TAG_INTERIOR,
    membership_oracle,
    semi_permeability_check,
)
from pendulum_barrier.integrator import (
    ArcOptions,
    hamiltonian_drift,
    integrate_arc,
    replay_forward,
)
from pendulum_barrier.model import (
    MODE_CONSTRAINED,
    PendulumParams,
    mixed_constraint,
    tension,
)
from pendulum_barrier.tangency import all_endpoints, smooth_endpoints, verify_tangentiality
from tests.conftest import run_pipeline


def report(num, ok, text):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, f"criterion {num} failed: {text}"


def test_criterion_1_endpoint_exactness():
    t0 = time.perf_counter()
    p = PendulumParams(0.1, 0.1, 1.0, 10.0)
    eps = all_endpoints(p, (0,))
    residual_ok = True
    for tp in eps:
        r = verify_tangentiality(p, tp)
        residual_ok &= (r <= 1e-8) if tp.kind == "smooth" else (r >= -1e-8)
    smooth = sorted(tp.state[0] for tp in eps if tp.kind == "smooth")
    kink = sorted(tp.state[1] for tp in eps if tp.kind == "nonsmooth")
    elapsed = time.perf_counter() - t0
    ok = (
        smooth[0] == pytest.approx(-0.785398, abs=1e-6)
        and smooth[1] == pytest.approx(0.785398, abs=1e-6)
        and all(tp.state[1] == 0.0 for tp in eps if tp.kind == "smooth")
        and kink[0] == pytest.approx(-3.162278, abs=1e-6)
        and kink[1] == pytest.approx(3.162278, abs=1e-6)
        and residual_ok
        and elapsed < 1.0
    )
    report(1, ok, f"end points at +-0.785398 / (0, +-3.162278), residuals <= 1e-8 ({elapsed:.2f}s)")


def test_criterion_2_terminal_adjoints():
    t0 = time.perf_counter()
    p = PendulumParams(0.1, 0.1, 1.0, 10.0)
    eps = all_endpoints(p, (0,))
    left = [tp for tp in eps if tp.kind == "smooth" and tp.state[0] < 0][0]
    upper = [tp for tp in eps if tp.kind == "nonsmooth" and tp.state[1] > 0][0]
    w = math.sqrt(p.g / p.l)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(left.final_adjoint[0] - math.sqrt(2.0)) <= 1e-12
        and abs(left.final_adjoint[1]) <= 1e-12
        and abs(upper.final_adjoint[0] - 1.0) <= 1e-12
        and abs(upper.final_adjoint[1] - (-2 * p.M * p.l * w)) <= 1e-12
        and upper.final_adjoint[1] == pytest.approx(-0.632456, abs=1e-6)
        and elapsed < 1.0
    )
    report(2, ok, f"terminal adjoints (sqrt2, 0) and (1, -0.632456) to 1e-12 ({elapsed:.2f}s)")


def test_criterion_3_disjoint_topology():
    t0 = time.perf_counter()
    pipe = run_pipeline(PendulumParams(0.5, 0.1, 1.0, 10.0))
    elapsed = time.perf_counter() - t0
    admissible = [c for c in pipe.model.components if c.tag == TAG_INTERIOR]
    ok = (
        len(pipe.transversal) == 0
        and len(admissible) >= 2
        and sum(1 for c in admissible if c.bounded) == 1
        and elapsed < 30.0
    )
    report(
        3,
        ok,
        f"M=0.5: no transversal intersections, {len(admissible)} admissible components, "
        f"one bounded ({elapsed:.1f}s)",
    )


def test_criterion_4_connected_topology():
    t0 = time.perf_counter()
    pipe = run_pipeline(PendulumParams(0.1, 0.1, 1.0, 10.0))
    elapsed = time.perf_counter() - t0
    per_period = [sp for sp in pipe.transversal if -math.pi <= sp.location[0] < math.pi]
    admissible = [c for c in pipe.model.components if c.tag == TAG_INTERIOR]
    ok = (
        len(per_period) >= 1
        and len(admissible) == 1
        and not admissible[0].bounded
        and elapsed < 30.0
    )
    report(
        4,
        ok,
        f"M=0.1: {len(per_period)} stopping points per period, connected admissible set "
        f"({elapsed:.1f}s)",
    )


def test_criterion_5_switch_locations(pipe_connected):
    half_pi_hits = []
    for arc in pipe_connected.arcs:
        if arc.source.kind != "smooth":
            continue
        for e in arc.events:
            if e.kind == "switch" and e.mode_change is not None:
                half_pi_hits.append(abs(abs(math.remainder(e.state[0], math.pi)) - math.pi / 2))
    kink_ok = all(
        any(e.mode_change and MODE_CONSTRAINED in e.mode_change for e in arc.events)
        for arc in pipe_connected.arcs
        if arc.source.kind == "nonsmooth"
    )
    ok = bool(half_pi_hits) and min(half_pi_hits) <= 1e-6 and kink_ok
    report(
        5,
        ok,
        f"control switches at theta1 = +-pi/2 within 1e-6 "
        f"(closest {min(half_pi_hits):.2e}), zero-tension transitions on kink arcs",
    )


def test_criterion_6_hamiltonian_constancy(pipe_connected, pipe_disjoint):
    worst = 0.0
    for pipe in (pipe_connected, pipe_disjoint):
        for arc in pipe.arcs:
            worst = max(worst, hamiltonian_drift(arc))
    tp = [t for t in smooth_endpoints(pipe_connected.p, (0,)) if t.state[0] < 0][0]
    coarse = integrate_arc(pipe_connected.p, tp, ArcOptions(rtol=1e-3, atol=1e-3, max_step=1.0))
    fine = integrate_arc(pipe_connected.p, tp, ArcOptions())
    shrinks = hamiltonian_drift(coarse) > hamiltonian_drift(fine)
    ok = worst <= 1e-6 and shrinks
    report(6, ok, f"max Hamiltonian drift {worst:.2e} <= 1e-6, shrinking with tolerance")


def test_criterion_7_slackness_and_multiplier_sign(pipe_connected, pipe_disjoint):
    worst_mu, worst_muh = 0.0, 0.0
    for pipe in (pipe_connected, pipe_disjoint):
        for arc in pipe.arcs:
            h = mixed_constraint(pipe.p, (arc.states[:, 0], arc.states[:, 1]), arc.controls)
            worst_mu = min(worst_mu, float(np.min(arc.multipliers)))
            worst_muh = max(worst_muh, float(np.max(np.abs(arc.multipliers * h))))
    ok = worst_mu >= -1e-10 and worst_muh <= 1e-10
    report(7, ok, f"mu >= {worst_mu:.1e} and |mu h| <= {worst_muh:.1e} at every sample")


def test_criterion_8_tension_identity():
    p = PendulumParams(0.1, 0.1, 1.0, 10.0)
    rng = np.random.default_rng(2024)
    th1 = rng.uniform(-7.0, 7.0, 10_000)
    th2 = rng.uniform(-10.0, 10.0, 10_000)
    u = rng.uniform(-1.0, 1.0, 10_000)
    T = tension(p, (th1, th2), u)
    h = mixed_constraint(p, (th1, th2), u)
    resid = T * (p.M + p.m * np.sin(th1) ** 2) + p.m * h
    rel = np.max(np.abs(resid) / np.maximum(np.abs(T), 1.0))
    sign_ok = bool(np.all((h <= 0) == (T >= 0)))
    ok = rel < 1e-12 and sign_ok
    report(8, ok, f"tension identity to {rel:.1e} on 1e4 samples, h <= 0 iff T >= 0")


def test_criterion_9_semi_permeability(pipe_connected):
    t0 = time.perf_counter()
    reportd = semi_permeability_check(
        pipe_connected.model,
        pipe_connected.truncated,
        n_points=50,
        n_policies=20,
        offset=1e-3,
        T=8.0,
        seed=0,
    )
    worst_replay = 0.0
    for arc in pipe_connected.truncated:
        ts, states, valid = replay_forward(pipe_connected.p, arc)
        worst_replay = max(worst_replay, float(np.max(np.abs(states[valid] - arc.states[::-1][valid]))))
    elapsed = time.perf_counter() - t0
    ok = (
        reportd["points"] == 50
        and reportd["policies"] == 20
        and reportd["re_entries"] == 0
        and worst_replay <= 1e-4
        and elapsed < 300.0
    )
    report(
        9,
        ok,
        f"{reportd['points']}x{reportd['policies']} outside starts, {reportd['re_entries']} "
        f"re-entries; replay error {worst_replay:.1e} <= 1e-4 ({elapsed:.0f}s)",
    )


def test_criterion_10_membership_oracle(pipe_connected):
    t0 = time.perf_counter()
    rep = membership_oracle(
        pipe_connected.model, grid_shape=(60, 60), T_max=10.0, dt=2e-3, raise_on_disagreement=False
    )
    elapsed = time.perf_counter() - t0
    n_adm = int(rep.oracle_admissible.sum())
    ok = rep.disagreements == [] and 0 < n_adm < 3600 and elapsed < 600.0
    report(
        10,
        ok,
        f"60x60 oracle, {n_adm} plausibly-admissible points, "
        f"{len(rep.disagreements)} out-of-band disagreements ({elapsed:.0f}s)",
    )
