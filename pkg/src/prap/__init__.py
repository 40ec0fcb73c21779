"""Phase retrieval by alternating projections.

A small numpy/scipy library for solving phase retrieval problems with the
alternating projections method, plus a Monte Carlo harness for mapping
success probabilities and stagnation-point statistics over (n, m) grids.

Complex vectors and matrices are plain ``numpy.ndarray`` of dtype
``complex128`` throughout; measurement vectors are real ``float64`` arrays.
"""

from prap.linalg import (
    LeastSquaresSolver,
    SingularGramError,
    dist_up_to_phase,
    least_squares_project,
    modulus_vec,
    phase_scalar,
    phase_vec,
    power_iteration,
)
from prap.model import (
    Problem,
    SeedSpec,
    make_problem,
    measure,
    problem_from_json,
    problem_to_json,
    sample_gaussian_matrix,
    sample_signal,
)
from prap.solver import (
    EmptyTruncationError,
    SolverConfig,
    Trajectory,
    ap_step,
    is_almost_orthogonal,
    is_stagnation_point,
    random_isotropic_init,
    run_ap,
    truncated_spectral_init,
)
from prap.experiments import (
    GridResult,
    GridSpec,
    StagnationSpec,
    compute_mn_curve,
    probe_stagnation,
    run_success_grid,
    validate_diff_phase,
    validate_min_f,
)

__version__ = "0.1.0"

__all__ = [
    "LeastSquaresSolver",
    "SingularGramError",
    "phase_scalar",
    "phase_vec",
    "modulus_vec",
    "dist_up_to_phase",
    "least_squares_project",
    "power_iteration",
    "SeedSpec",
    "Problem",
    "sample_gaussian_matrix",
    "sample_signal",
    "measure",
    "make_problem",
    "problem_to_json",
    "problem_from_json",
    "SolverConfig",
    "Trajectory",
    "EmptyTruncationError",
    "ap_step",
    "truncated_spectral_init",
    "random_isotropic_init",
    "is_almost_orthogonal",
    "run_ap",
    "is_stagnation_point",
    "GridSpec",
    "GridResult",
    "StagnationSpec",
    "run_success_grid",
    "probe_stagnation",
    "compute_mn_curve",
    "validate_diff_phase",
    "validate_min_f",
    "__version__",
]
