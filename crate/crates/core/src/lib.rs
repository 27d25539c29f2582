//! Algebraic curvature operators, membership oracles for the cones preserved
//! by the Hamilton ODE, and an integrator for the ODE itself.

pub mod algebra;
pub mod cones;
pub mod error;
pub mod flow;
pub mod generate;
pub mod io;
pub mod rng;
pub mod tensor;

pub use algebra::{CurvatureOperator, SymmetricBilinear, TransformParams, TwoForm};
pub use cones::{ConeKind, ConeSpec, FourFrame, FrameParams, MembershipReport};
pub use error::{Error, Result};
pub use tensor::Tensor4;
