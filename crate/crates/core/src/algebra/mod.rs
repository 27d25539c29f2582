//! Dense tensor algebra for algebraic curvature operators.

mod bilinear;
mod extensions;
mod operator;
mod products;
mod transforms;

pub use bilinear::{SymmetricBilinear, TwoForm};
pub use extensions::{extend_flat, extend_flat_by, extend_sphere2};
pub use operator::{
    make_operator, project_bianchi, CurvatureOperator, Tolerances, BIANCHI_TOL, SYMMETRY_TOL,
};
pub use products::{kulkarni_nomizu, q, sharp, square};
pub use transforms::{d_ab, inverse_l_ab, l_ab, TransformParams};

pub(crate) use products::sharp_tensor;
