"""Two-level nonconvex nonsmooth optimization with blockwise prox-gradient
updates, a sparse low-rank factorization front end, reference baselines,
fidelity metrics, and dataset utilities."""

from .bilevel import (
    BilevelProblem,
    CombinationWeights,
    DescentConstants,
    SolverConfig,
    SolverState,
    combine,
    compute_descent_constants,
    select_weights,
    solve,
)
from .baselines import PalmProblem, nmf_lee_seung, palm_from_bilevel, palm_solve
from .data import (
    SyntheticInstance,
    SyntheticSpec,
    frames_to_matrix,
    generate,
    load_matrix_csv,
    save_matrix_csv,
)
from .exceptions import (
    BinnoError,
    DegenerateDenominatorError,
    EmptyIntervalError,
    MatrixParseError,
    NoDescentWeightError,
    SvdConvergenceError,
    ZeroReferenceError,
)
from .linalg import (
    SvdFactors,
    as_matrix,
    frobenius_norm,
    matmul,
    nuclear_norm,
    spectral_norm,
    svd,
)
from .metrics import MetricReport, evaluate, mean_squared_error, psnr, relative_error
from .prox import (
    GradientMap,
    ProxOperator,
    l1_prox,
    moreau_envelope_value,
    moreau_gradient,
    nonnegative_prox,
    nuclear_prox,
    prox_gradient_map,
    soft_threshold,
    svt,
    zero_prox,
)
from .report import RunReport
from .slrf import (
    SlrfConstants,
    SlrfParams,
    alpha_interval,
    beta_interval,
    build_problem,
    constants_at,
    default_init,
    nu_min_alpha,
    nu_min_beta,
    solve_slrf,
    stepsize_rule,
)

__version__ = "0.1.0"
