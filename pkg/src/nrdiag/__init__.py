"""Newton-Raphson equation-system solver with initial-guess diagnostics.

On convergence failure the diagnostics engine computes three indicator
families from the first iteration (higher-order residual share, curvature
factors, first-iterate sensitivity) and ranks which initial guesses are
responsible and in which direction to move them.
"""

from .diagnostics import (
    AlphaSet,
    DiagnosticReport,
    GammaSet,
    NonlinearResidual,
    SensitivityMatrix,
    compute_alpha,
    compute_gamma,
    compute_sigma,
    diagnose,
    nonlinear_residual,
    rank_indicators,
    sigma_fd_oracle,
    sufficient_condition_check,
)
from .errors import (
    DampingExhaustedError,
    DegenerateResidualError,
    InvalidParamsError,
    InvalidPartitionError,
    NonEvaluableError,
    NonPositiveScaleError,
    NrdiagError,
    SingularJacobianError,
    SingularMatrixError,
    UnknownVariableError,
)
from .linops import LuFactors, fd_hessian, fd_jacobian, lu_factor, lu_solve
from .model import (
    EvalOutcome,
    Partition,
    SystemModel,
    canonicalize,
    scale_model,
    verify_structure,
)
from .problems import ProblemCase, get_case, perturb_preset, resolve_case_spec
from .solver import (
    FirstStepResult,
    SolveOptions,
    SolveReport,
    SolveStatus,
    first_step_damped,
    newton_solve,
    newton_step,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaSet", "DiagnosticReport", "GammaSet", "NonlinearResidual",
    "SensitivityMatrix", "compute_alpha", "compute_gamma", "compute_sigma",
    "diagnose", "nonlinear_residual", "rank_indicators", "sigma_fd_oracle",
    "sufficient_condition_check",
    "DampingExhaustedError", "DegenerateResidualError", "InvalidParamsError",
    "InvalidPartitionError", "NonEvaluableError", "NonPositiveScaleError",
    "NrdiagError", "SingularJacobianError", "SingularMatrixError",
    "UnknownVariableError",
    "LuFactors", "fd_hessian", "fd_jacobian", "lu_factor", "lu_solve",
    "EvalOutcome", "Partition", "SystemModel", "canonicalize", "scale_model",
    "verify_structure",
    "ProblemCase", "get_case", "perturb_preset", "resolve_case_spec",
    "FirstStepResult", "SolveOptions", "SolveReport", "SolveStatus",
    "first_step_damped", "newton_solve", "newton_step",
]
