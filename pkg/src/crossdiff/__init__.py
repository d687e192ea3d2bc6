"""Structure-preserving simulation of multi-species size-exclusion cross-diffusion."""

from .algebra import (
    CoercivityBounds,
    ReducedCoercivityBounds,
    TangentVector,
    coercivity_bounds,
    diffusion_matrix,
    dissipation_form,
    dissipation_matrix,
    dual_to_primal,
    find_indefinite_witness,
    hessian_entropy,
    lift,
    lift_tangent,
    mobility,
    primal_to_dual,
    project,
    reduced_coercivity,
    reduced_diffusion,
    reduced_dissipation_matrix,
    reduced_hessian,
    reduced_mobility,
)
from .config import InitialSpec, RunConfig, parse_config
from .entropy import (
    CsiszarKullbackGap,
    EntropyReport,
    csiszar_kullback_gap,
    degenerate_fraction,
    entropy_density,
    grid_dissipation,
    grid_entropy,
    grid_mass,
    grid_relative_entropy,
    lambda_density,
    relative_density,
)
from .experiments import (
    StudyResult,
    Verdict,
    decay_study,
    epsilon_study,
    equilibration_study,
    heat_equivalence_study,
    stability_study,
)
from .grid import (
    FaceFluxes,
    Field,
    Grid1D,
    apply_divergence,
    assemble_fluxes,
    init_field,
    read_snapshot,
    write_snapshot,
)
from .model import (
    HypothesisReport,
    InteractionMatrix,
    ReducedPoint,
    SimplexPoint,
    SpeciesClassification,
    classify_species,
    kappa,
    kappa_alpha,
    regularize,
    validate_hypotheses,
)
from .solver import (
    RunResult,
    SolverConfig,
    StepResult,
    newton_advance,
    project_interior,
    run,
    state_dissipation,
    step_residual,
)

__version__ = "0.1.0"
