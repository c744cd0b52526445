"""Algebraic curvature operators, isotropic-curvature cones and the Hamilton ODE."""

from .algebra import (
    CurvatureOperator,
    SymmetricBilinear,
    TransformParams,
    TwoForm,
    d_ab,
    evaluate,
    evaluate_on_2forms,
    extend_flat,
    extend_sphere2,
    from_lambda2,
    inverse_l_ab,
    kulkarni_nomizu,
    l_ab,
    load_operator,
    make_operator,
    max_admissible_b,
    project_bianchi,
    q,
    ricci,
    ricci_traceless,
    save_operator,
    scalar,
    sharp,
    sphere,
    square,
    to_lambda2,
    weyl,
    zero,
)
from .cones import (
    HAT_C,
    PIC,
    SET_E,
    TILDE_C,
    ConeKind,
    ConeSpec,
    FourFrame,
    FrameParams,
    MembershipReport,
    evaluate_condition,
    extension_oracle,
    isotropic_value,
    membership,
    min_isotropic,
    parametric_oracle,
    sharp_boundary_check,
    two_positive_margin,
)
from .errors import (
    BianchiViolation,
    CurvlabError,
    DimensionMismatch,
    NonConvergence,
    OracleMismatch,
    PreconditionViolation,
    SingularTransform,
    StepRejected,
    SymmetryViolation,
    Undefined,
)
from .flow import (
    FlowConfig,
    FlowTrajectory,
    FlowVariant,
    Scheme,
    Variant,
    boundary_derivative_check,
    integrate,
    pinching_ratio,
    step,
)
from .generators import GeneratorSpec, generate

__version__ = "0.1.0"
