//! Integration of the reaction ODE `dR/dt = Q(R)` and its variants, with cone
//! margins monitored along the way.

mod config;
mod integrate;
mod ode;
mod pinching;

pub use config::{FlowConfig, Scheme, StopRule, Variant};
pub use integrate::{
    column_label, integrate, FlowSample, FlowTrajectory, StopReason, Violation,
};
pub use ode::{
    boundary_derivative, boundary_derivative_check, rhs, step, BOUNDARY_WITNESS_TOL, DRIFT_TOL,
};
pub use pinching::{pinching_ratio, sectional_range};
