"""Primal-dual splitting solver for composite monotone inclusions.

The package solves inclusions coupling a maximally monotone operator, a
cocoercive operator, and weighted compositions of parallel sums through
linear maps, together with the matching structured convex programs.  See
the README for the data model and the CLI.
"""

from .spaces import (
    BlockVector,
    ShapeMismatchError,
    SpaceLayout,
    axpy_blocks,
    inner_weighted,
    norm_weighted,
)
from .operators import (
    CocoerciveOp,
    Domain,
    LinearOp,
    ProxFunction,
    ResolventOp,
    catalog_prox,
    check_cocoercive,
    diff1d_op,
    estimate_norm,
    grad2d_op,
    identity_op,
    matrix_op,
    prox_conjugate,
    resolvent_from_prox,
    resolvent_of_inverse,
)
from .solver import (
    Block,
    DivergenceError,
    ErrorSchedule,
    InadmissibleStepsError,
    IterState,
    ProblemSpec,
    RunReport,
    StepConfig,
    StoppingRule,
    certified_norms,
    geometric_errors,
    initial_state,
    iterate_once,
    run,
    suggest_steps,
    validate_steps,
    zero_errors,
)
from .convex import (
    ConvexBlock,
    ConvexProblem,
    GapReport,
    QualificationReport,
    SmoothTerm,
    StronglyConvexTerm,
    check_qualification,
    dirac_term,
    evaluate_gap,
    kkt_residual,
    lower_to_inclusion,
    quadratic_smooth,
    quadratic_term,
    solve_convex,
    zero_smooth,
)
from .diagnostics import (
    CertificateReport,
    FejerSeries,
    ProductOps,
    build_product_ops,
    certify_Q_cocoercive,
    certify_skew,
    certify_strong_positivity,
    fejer_monitor,
)

__version__ = "0.1.0"
