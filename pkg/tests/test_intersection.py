import math

import numpy as np
from pendulum_barrier.integrator import ArcOptions, integrate_all_arcs
from pendulum_barrier.intersection import find_stopping_points, truncate_at_stopping_points
from pendulum_barrier.tangency import all_endpoints


def _in_base_period(sp):
    return -math.pi <= sp.location[0] < math.pi


def test_connected_case_has_stopping_points(pipe_connected):
    per_period = [sp for sp in pipe_connected.transversal if _in_base_period(sp)]
    assert len(per_period) >= 1


def test_disjoint_case_has_none(pipe_disjoint):
    assert pipe_disjoint.transversal == []


def test_self_pairing_excluded(pipe_connected):
    arc = pipe_connected.arcs[0]
    assert find_stopping_points([arc, arc]) == []


def test_stopping_point_on_both_arcs(pipe_connected):
    by_id = {a.arc_id: a for a in pipe_connected.arcs}
    for sp in pipe_connected.transversal:
        for arc_id, t_sp in ((sp.arc_a, sp.t_a), (sp.arc_b, sp.t_b)):
            arc = by_id[arc_id]
            d = np.hypot(arc.states[:, 0] - sp.location[0], arc.states[:, 1] - sp.location[1])
            assert d.min() <= 0.15  # within one sample spacing of the polyline
            assert arc.t[-1] - 1e-9 <= t_sp <= 1e-12


def test_transversality_determinant(pipe_connected):
    for sp in pipe_connected.transversal:
        assert sp.det >= 1e-8


def test_truncation_cuts_and_synthesizes_shared_end(pipe_connected):
    cut = [a for a in pipe_connected.truncated if a.termination == "StoppedAtIntersection"]
    assert cut
    ends = {}
    for arc in cut:
        key = (round(arc.states[-1][0], 6), round(arc.states[-1][1], 6))
        ends.setdefault(key, []).append(arc)
    # every cut end is shared by exactly one partner arc, at the same point
    for key, arcs in ends.items():
        assert len(arcs) == 2
        d = np.hypot(*(arcs[0].states[-1] - arcs[1].states[-1]))
        assert d <= 1e-8


def test_truncation_idempotent(pipe_connected):
    once = pipe_connected.truncated
    sps = find_stopping_points(once)
    twice = truncate_at_stopping_points(once, sps)
    for a, b in zip(once, twice):
        assert len(a) == len(b)
        assert np.array_equal(a.t, b.t)
        assert np.array_equal(a.states, b.states)


def test_no_interior_crossings_after_truncation(pipe_connected):
    redo = [sp for sp in find_stopping_points(pipe_connected.truncated) if sp.transversal]
    by_id = {a.arc_id: a for a in pipe_connected.truncated}
    for sp in redo:
        # remaining hits coincide with arc terminal samples
        for arc_id in (sp.arc_a, sp.arc_b):
            end = by_id[arc_id].states[-1]
            assert np.hypot(end[0] - sp.location[0], end[1] - sp.location[1]) <= 1e-7


def test_untouched_arc_passes_through(pipe_disjoint):
    for arc, cut in zip(pipe_disjoint.arcs, pipe_disjoint.truncated):
        assert len(arc) == len(cut)
        assert arc.termination == cut.termination


def test_stopping_points_stable_under_tolerance_halving(p_connected):
    eps = all_endpoints(p_connected, (0,))
    base = integrate_all_arcs(p_connected, eps, ArcOptions())
    tight = integrate_all_arcs(
        p_connected, eps, ArcOptions(rtol=0.5e-9, atol=0.5e-10)
    )
    sp_a = [sp for sp in find_stopping_points(base) if sp.transversal]
    sp_b = [sp for sp in find_stopping_points(tight) if sp.transversal]
    assert len(sp_a) == len(sp_b)
    locs_a = sorted((round(sp.location[0], 9), round(sp.location[1], 9)) for sp in sp_a)
    locs_b = sorted((round(sp.location[0], 9), round(sp.location[1], 9)) for sp in sp_b)
    for (x0, y0), (x1, y1) in zip(locs_a, locs_b):
        assert abs(x0 - x1) <= 1e-5 and abs(y0 - y1) <= 1e-5
