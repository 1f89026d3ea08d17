import math

import numpy as np
import pytest

from pendulum_barrier.assembly import (
    StitchGap,
    TAG_INADMISSIBLE,
    TAG_INTERIOR,
    WindowExceeded,
    assemble,
    forward_simulate,
    interior_mask,
    membership,
    membership_oracle,
    semi_permeability_check,
)
from pendulum_barrier.model import TWO_PI, constraint_envelope


def _admissible(model):
    return [c for c in model.components if c.tag == TAG_INTERIOR]


def test_connected_case_topology(pipe_connected):
    adm = _admissible(pipe_connected.model)
    assert len(adm) == 1
    assert not adm[0].bounded
    pockets = [c for c in pipe_connected.model.components if c.tag == TAG_INADMISSIBLE]
    assert len(pockets) >= 2
    assert all(c.bounded for c in pockets)


def test_disjoint_case_topology(pipe_disjoint):
    adm = _admissible(pipe_disjoint.model)
    assert len(adm) >= 2
    assert sum(1 for c in adm if c.bounded) == 1


def test_membership_examples(pipe_connected):
    model = pipe_connected.model
    assert membership(model, (0.0, 0.0)).tag == "OutsideG"
    assert membership(model, (math.pi, 0.0)).tag == "Interior"


def test_membership_on_arc_sample_is_boundary(pipe_connected):
    arc = pipe_connected.truncated[0]
    s = tuple(arc.states[len(arc) // 2])
    v = membership(pipe_connected.model, s)
    assert v.tag == "Boundary"
    assert v.distance_estimate <= 1e-6


def test_membership_translation_invariance(pipe_connected):
    model = pipe_connected.model
    rng = np.random.default_rng(31)
    for _ in range(50):
        s = (rng.uniform(-math.pi, math.pi), rng.uniform(-8, 8))
        a = membership(model, s)
        b = membership(model, (s[0] + TWO_PI, s[1]))
        assert a.tag == b.tag


def test_membership_window_exceeded(pipe_connected):
    with pytest.raises(WindowExceeded):
        membership(pipe_connected.model, (0.0, 100.0))


def test_boundary_points_satisfy_envelope(pipe_connected, pipe_disjoint):
    for pipe in (pipe_connected, pipe_disjoint):
        for c in pipe.model.boundary_curves:
            env = constraint_envelope(pipe.p, (c.points[:, 0], c.points[:, 1]))
            assert float(np.max(env)) <= 1e-8


def test_component_translation_count(pipe_disjoint):
    # component counts describe one period cell; repeated assembly is stable
    model = pipe_disjoint.model
    tags = sorted((c.tag, c.bounded) for c in model.components)
    model2 = assemble(pipe_disjoint.p, pipe_disjoint.truncated, pipe_disjoint.endpoints)
    tags2 = sorted((c.tag, c.bounded) for c in model2.components)
    assert tags == tags2


def test_stitch_gap_detection(pipe_connected):
    bad = pipe_connected.arcs[0].truncated(-0.2, termination="StoppedAtIntersection")
    with pytest.raises(StitchGap):
        assemble(pipe_connected.p, [bad], pipe_connected.endpoints, grid_n=61)


def test_degenerate_assembly_without_arcs(p_connected, pipe_connected):
    model = assemble(p_connected, [], pipe_connected.endpoints, grid_n=61)
    assert any("degenerate" in note for note in model.diagnostics["stitching"])
    assert all(c.kind == "g0" for c in model.boundary_curves)


def test_chains_reported(pipe_connected):
    chains = pipe_connected.model.chains
    assert chains
    assert any(ch["closed"] for ch in chains)


def test_forward_simulate_hanging_rest(p_connected):
    res = forward_simulate(p_connected, (math.pi, 0.0), lambda t, s: 0.0, 10.0, dt=2e-3)
    assert res.violation_time is None


def test_forward_simulate_immediate_violation(p_connected):
    res = forward_simulate(p_connected, (0.0, 0.0), lambda t, s: 0.0, 5.0)
    assert res.violation_time == 0.0


def test_forward_simulate_records_crossing(p_connected):
    # a doomed pocket state swings up into free fall after a positive time
    res = forward_simulate(p_connected, (-0.5, 3.0), lambda t, s: 0.0, 5.0, dt=1e-3)
    assert res.violation_time is not None
    assert res.violation_time > 0.0


def test_interior_mask_matches_membership(pipe_connected):
    model = pipe_connected.model
    rng = np.random.default_rng(37)
    pts = np.column_stack([rng.uniform(-math.pi, math.pi, 300), rng.uniform(-9, 9, 300)])
    mask = interior_mask(model, pts)
    for q, m in zip(pts, mask):
        tag = membership(model, q).tag
        if m:
            assert tag == "Interior"


def test_semi_permeability_small(pipe_connected):
    report = semi_permeability_check(
        pipe_connected.model, pipe_connected.truncated, n_points=10, n_policies=5, T=5.0, seed=1
    )
    assert report["re_entries"] == 0
    assert report["points"] == 10


def test_oracle_coarse_grid(pipe_connected):
    report = membership_oracle(pipe_connected.model, grid_shape=(24, 24), T_max=6.0, dt=2e-3)
    assert report.disagreements == []
    assert report.oracle_admissible.any()
    assert (~report.oracle_admissible).any()


def test_no_escape_from_bounded_component(pipe_disjoint):
    # trajectories started in the bounded admissible component never reach an
    # unbounded admissible component
    model = pipe_disjoint.model
    bounded = [c for c in _admissible(model) if c.bounded][0]
    unbounded_ids = {c.comp_id for c in _admissible(model) if not c.bounded}
    from pendulum_barrier.assembly import batch_simulate, greedy_tension_policy

    n1, n2 = model.cell_comp.shape
    w1 = TWO_PI / n1
    w2 = 2 * model.theta2_max / n2
    seeds = np.array([bounded.seed, (bounded.seed[0] + 0.4, bounded.seed[1]), (math.pi, 1.0)])
    visited_unbounded = {"hit": False}

    def observer(t, y, alive):
        th1 = np.mod(y[alive, 0] + math.pi, TWO_PI) - math.pi
        th2 = y[alive, 1]
        ok = np.abs(th2) < model.theta2_max
        i1 = np.clip(((th1[ok] + math.pi) / w1).astype(int), 0, n1 - 1)
        i2 = np.clip(((th2[ok] + model.theta2_max) / w2).astype(int), 0, n2 - 1)
        comps = model.cell_comp[i1, i2]
        if np.isin(comps, list(unbounded_ids)).any():
            visited_unbounded["hit"] = True

    batch_simulate(pipe_disjoint.p, seeds, greedy_tension_policy(pipe_disjoint.p), 10.0, 2e-3, observer=observer)
    assert not visited_unbounded["hit"]
