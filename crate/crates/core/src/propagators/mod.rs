//! Linear evolution operators: the exact constant-coefficient parabolic
//! flow, frozen-coefficient steppers, and smoothing-estimate checks.

mod constant;
mod smoothing;
mod stepping;

pub use constant::{solve_constant_parabolic, ConstantParabolicOp, ModeDecomposition, ModeMatrices};
pub use smoothing::{
    apply_constant_matrix, verify_ode_lemma, verify_smoothing_estimates, BlockSmoothing, LowBlockSmoothing,
    OdeLemmaReport, SmoothingReport,
};
pub use stepping::{
    check_phase, integrate_hyperbolic, integrate_parabolic, step_linear_hyperbolic, step_linear_parabolic_variable,
    FrozenCoeffStep, HyperbolicCoefficients, ParabolicCoefficients, Scheme, TimeField,
};

pub(crate) use stepping::per_point;
