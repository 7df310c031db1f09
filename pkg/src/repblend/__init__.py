"""Temporal reduction of energy-system LPs via representative periods with
blended (hard, convex, sub-unit conic, or conic) weights."""

from .clustering import (
    ClusterAssignment,
    GnomonicProjection,
    RepSelection,
    gnomonic_project,
    greedy_hull,
    hull_distance,
    kmeans,
    kmedoids,
)
from .data import (
    Asset,
    ClusteringMatrix,
    DataError,
    EnergySystem,
    Horizon,
    Line,
    RepProfiles,
    Violation,
    build_clustering_matrix,
    extract_rep_profiles,
    load_system,
    validate_profiles,
)
from .harness import (
    ExperimentConfig,
    ExperimentRecord,
    compute_regret,
    emit_plot_data,
    load_records,
    pareto_front,
    run_experiment,
)
from .model import (
    LpModel,
    Solution,
    build_full_model,
    build_model,
    fix_decisions,
    identity_weights,
)
from .solve import (
    SolverError,
    SolverHandle,
    SolverNumericalError,
    SolverUnavailableError,
    SolveTimeLimitError,
    solve,
    write_lp_file,
)
from .weights import (
    PgdParams,
    WeightMatrix,
    canonical_weight_type,
    fit_weights,
    least_squares_init,
    lipschitz_constant,
    pgd,
    project_simplex,
    project_weights,
)

__version__ = "0.1.0"
