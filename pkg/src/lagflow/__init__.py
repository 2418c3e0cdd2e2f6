"""Lagrangian moving-mesh solver for nonlinear degenerate Fokker-Planck equations.

The solution density is represented as the push-forward of a fixed reference
density under a piecewise-affine map on a triangulation; time stepping
minimizes the implicit Euler functional of the underlying gradient flow with
a damped Newton iteration on its exact gradient and Hessian.
"""

from .mesh import (
    LatticeSpec,
    TriangleMesh,
    build_domain_mesh,
    build_hexagonal_patch,
    read_mesh,
    validate,
    write_mesh,
)
from .model import (
    EnergyModel,
    ReferenceDensity,
    init_reference_density,
    make_power_law,
    preset_initial_density,
    quadratic_potential,
    quartic_potential,
    zero_potential,
)
from .assembly import (
    ConstraintProjector,
    LagrangianState,
    OrientationError,
    SparseBlockMatrix,
    hessian,
    internal_energy,
    l2_distance_sq,
    mm_objective,
    potential_energy,
    residual,
    total_energy,
    triangle_matrix,
)
from .stepper import (
    DiagnosticsRecord,
    NewtonError,
    RunError,
    SolverConfig,
    StepError,
    advance,
    newton_solve,
    run,
)
from .analysis import (
    PiecewiseDensity,
    SmoothFlow,
    barenblatt_confined_steady,
    barenblatt_free,
    barenblatt_free_support_radius,
    consistency_probe,
    dilation_flow,
    fit_loglog_slope,
    l1_error,
    lagrangian_velocity,
    lemma_b1_check,
    lemma_b2_b5_checks,
    nonconvexity_witness,
    pushforward_density,
    shear_drift_flow,
    skew_witness_flow,
)

__version__ = "0.1.0"
