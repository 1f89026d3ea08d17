import dataclasses

import pytest

from pendulum_barrier import PendulumParams, all_endpoints, integrate_all_arcs
from pendulum_barrier.assembly import assemble
from pendulum_barrier.intersection import find_stopping_points, truncate_at_stopping_points

# Reference configurations: the small cart mass gives intersecting boundary
# arcs and a connected admissible set; the large cart mass gives disjoint
# components and no intersections.
CONNECTED = dict(M=0.1, m=0.1, l=1.0, g=10.0)
DISJOINT = dict(M=0.5, m=0.1, l=1.0, g=10.0)


@dataclasses.dataclass
class Pipeline:
    p: PendulumParams
    endpoints: list
    arcs: list
    stopping_points: list
    transversal: list
    truncated: list
    model: object


def run_pipeline(p: PendulumParams) -> Pipeline:
    endpoints = all_endpoints(p, (-1, 0, 1))
    arcs = integrate_all_arcs(p, endpoints)
    sps = find_stopping_points(arcs)
    transversal = [sp for sp in sps if sp.transversal]
    truncated = truncate_at_stopping_points(arcs, sps)
    model = assemble(p, truncated, endpoints)
    return Pipeline(p, endpoints, arcs, sps, transversal, truncated, model)


@pytest.fixture(scope="session")
def p_connected():
    return PendulumParams(**CONNECTED)


@pytest.fixture(scope="session")
def p_disjoint():
    return PendulumParams(**DISJOINT)


@pytest.fixture(scope="session")
def pipe_connected(p_connected):
    return run_pipeline(p_connected)


@pytest.fixture(scope="session")
def pipe_disjoint(p_disjoint):
    return run_pipeline(p_disjoint)
