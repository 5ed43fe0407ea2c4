"""M-estimators with geometrically decomposable penalties.

Convex-set primitives, penalty construction, certification of exact model
selection, first-order solvers and phase-transition experiments.
"""

from .certify import (
    CertificateReport,
    ConverseReport,
    WitnessReport,
    V_value,
    certify,
    compatibility_constants,
    converse_check,
    dual_certificate,
    irrep_check,
    irrepresentable_map,
    lambda_window,
    theorem_error_bound,
    witness,
)
from .experiments import PhaseConfig, PhaseResult, gen_dataset, run_phase, success_indicator
from .geometry import (
    AtomPolytope,
    CoordBox,
    GroupBall,
    LinearImage,
    MinkowskiSum,
    Subspace,
    SubspaceSet,
    gauge_value,
    project,
    restricted_pinv_apply,
    subspace_intersect,
    support_face,
    support_value,
)
from .losses import LogDetLoss, QuadraticLoss, SquaredLoss, bernoulli_family, gaussian_family
from .penalties import (
    EstimandSpec,
    Penalty,
    analysis,
    group_lasso,
    hybrid,
    lasso,
    make_penalty,
    model_subspace,
    penalty_value,
    prox,
)
from .report import emit_report
from .solvers import EstimateResult, solve, solve_restricted

__version__ = "0.1.0"
