"""relflow: desk-scale laboratory for regularized compressible flow on the
torus and its relative-entropy verification apparatus."""

from .entropy import (
    EntropyConstants,
    EntropyReport,
    TestPair,
    bound_side,
    continuity_residual,
    dissipative_verdict,
    entropy_side,
    essential_residual_masks,
    gronwall_factor,
    growth_rate,
    growth_rate_base,
    momentum_residual,
    relative_energy,
)
from .eos import (
    BoundaryCase,
    ModelParams,
    artificial_potential,
    bregman_gap,
    gap_coercivity_constant,
    pressure,
    pressure_potential,
)
from .fields import Grid, ScalarField, TensorField, VectorField
from .harness import (
    ExperimentConfig,
    calibrate_constants,
    discretization_budget,
    run_dissipative_suite,
    run_eps_sweep,
    run_weak_strong,
)
from .mollify import MollifierSpec, mollify_convergence_report, space_mollify, time_space_mollify
from .solver import (
    FluidState,
    Recipe,
    SolverConfig,
    Trajectory,
    brenner_rhs,
    energy,
    energy_inequality_monitor,
    initial_data,
    integrate,
    manufactured_forcing,
    manufactured_pair,
    renormalized_continuity_residual,
    step,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
