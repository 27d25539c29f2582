//! Membership in the curvature cones and the set `SET_E`.

mod diagnostics;
mod frame;
mod functional;
mod membership;
mod spec;
pub mod stiefel;

pub use diagnostics::{
    low_dimension_proxies, sharp_boundary_check, sharp_pattern, two_positive_margin,
    LowDimensionProxies, WITNESS_TOL,
};
pub use frame::{FourFrame, FrameParams, FRAME_TOL};
pub use functional::{
    evaluate_condition, isotropic_value, min_quadratic, ConditionObjective, Eval,
    FrameComponents, FrameObjective, Lambda2Form, ParamMode, SectionalObjective,
};
pub use membership::{
    membership, membership_or_undecided, min_isotropic, min_isotropic_with, Decision,
    MembershipOptions, MembershipReport, Method, Witness,
};
pub use spec::{ConeKind, ConeSpec};
