"""Rigorous and first-order perturbation bounds for LU and QR factorizations."""

from .dense import (
    EXPLICIT_THRESHOLD,
    LuFactors,
    NormKind,
    QrFactors,
    abs_matrix,
    lu_factor,
    norm,
    qr_factor,
    smallest_singular_value,
    spectral_norm,
    svd_spectral_norm,
    triangular_inverse,
)
from .errors import (
    AbsOperatorTooLarge,
    BoundNotApplicable,
    DimensionMismatch,
    FperturbError,
    NoConvergence,
    RankDeficient,
    SingularDiagonal,
    SingularLeadingMinor,
    TooLarge,
    ZeroVector,
)
from .lu_bounds import (
    LuComponentwiseReport,
    LuNormwiseReport,
    ScalingMatrix,
    chang_stehle_lu,
    gaussian_elimination_epsilon,
    heuristic_scaling,
    lower_factor_operator,
    lu_componentwise_bounds,
    lu_normwise_bounds,
    upper_factor_operator,
    worst_case_m_norm_perturbation,
)
from .matgen import (
    ComponentwiseLU,
    ComponentwiseQR,
    Normwise,
    PerturbationSpec,
    graded_random,
    kahan,
    random_c_matrix,
    rng_stream,
    sample_perturbation,
)
from .qr_bounds import (
    QrComponentwiseReport,
    QrNormwiseReport,
    chang_stehle_qr,
    qr_componentwise_bounds,
    qr_normwise_bounds,
    r_factor_operator,
    r_quadratic_operator,
    scaling_d_e,
    scaling_d_r,
    zeta,
)
from .structured import (
    SelectionKind,
    SelectionMatrix,
    StructuredOperator,
    abs_operator,
    kronecker_apply,
    operator_materialize,
    operator_spectral_norm,
    selection_matrix,
    structured_extract,
    unvec,
    vec,
    vec_permutation_apply,
)
from .verify import VerificationReport, delta_halving, verify_bounds

__version__ = "0.1.0"
