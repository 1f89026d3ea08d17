"""Admissible-set boundary construction for the cart pendulum with a non-rigid cable."""

from .model import (
    CablePendulum,
    ControlInterval,
    EmptyControlSet,
    FullState,
    PendulumParams,
    SingularMultiplier,
    constraint_envelope,
    control_set,
    dynamics,
    dynamics_jacobian,
    hamiltonian,
    minimize_hamiltonian,
    mixed_constraint,
    multiplier,
    tension,
)
from .tangency import (
    SpuriousRootFound,
    SymmetryValidationFailed,
    TangencyPoint,
    all_endpoints,
    nonsmooth_endpoints,
    reject_spurious_roots,
    smooth_endpoints,
    verify_tangentiality,
)
from .integrator import (
    ArcEvent,
    ArcOptions,
    ArcSample,
    BarrierArc,
    StepFailure,
    adjoint_rhs,
    hamiltonian_drift,
    integrate_all_arcs,
    integrate_arc,
    replay_forward,
)

__version__ = "0.1.0"
