"""Numerical laboratory for the cross-coupled competition-diffusion system."""

from .mesh import (
    EigenSystem,
    Field,
    Grid,
    eigensystem,
    harmonic_extension,
    laplacian_apply,
    norms,
    poincare_constant,
    read_field,
    write_field,
)
from .model import (
    BoundarySchedule,
    InitialData,
    ReactionModel,
    make_segregated_bumps,
)
from .evolve import (
    Problem,
    SimState,
    StepperConfig,
    initial_state,
    linear_heat_reference,
    run_until,
    step,
)
from .energy import (
    EnergyBreakdown,
    dissipation_residual,
    energy_auxiliary,
    energy_stationary,
    gronwall_bound,
    h_bound_audit,
    mu_quantity,
)
from .steady import (
    StationaryPair,
    morrey_check,
    solve_stationary,
    stabilization_detect,
    variational_inequality_residual,
)
from .heatkernel import DecayCertificate, certify_decay, semigroup_norm
from .sweeplab import diagonal_extraction, run_single, run_sweep, verify

__version__ = "0.1.0"
