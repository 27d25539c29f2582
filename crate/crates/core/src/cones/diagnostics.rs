use nalgebra::SymmetricEigen;

use crate::algebra::{sharp_tensor, CurvatureOperator};
use crate::error::{Error, Result};

use super::frame::FourFrame;
use super::functional::isotropic_value;
use super::membership::min_isotropic;

/// `lambda_1 + lambda_2` for the curvature operator acting on two-forms,
/// `(R phi)_ij = sum_kl R_ijkl phi_kl`. On the pair basis this endomorphism is
/// twice the `Lambda^2` matrix, so the unit sphere gives 4.
pub fn two_positive_margin(r: &CurvatureOperator) -> f64 {
    let m = r.lambda2_matrix() * 2.0;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.iter().take(2).sum()
}

/// Largest isotropic value accepted at a boundary witness.
pub const WITNESS_TOL: f64 = 1e-6;

/// `R#` summed over the isotropic pattern at `f`:
/// `R#_1313 + R#_1414 + R#_2323 + R#_2424 + 2 R#(e1,e3,e4,e2) + 2 R#(e1,e4,e2,e3)`.
///
/// Only meaningful when `f` minimizes isotropic curvature of a boundary
/// operator; both conditions are checked, the second with `starts` seeded
/// multistarts.
pub fn sharp_boundary_check(
    r: &CurvatureOperator,
    f: &FourFrame,
    starts: usize,
    seed: u64,
) -> Result<f64> {
    let value = isotropic_value(r, f)?;
    if value > WITNESS_TOL {
        return Err(Error::PreconditionViolation(format!(
            "isotropic value {value:e} at the frame exceeds {WITNESS_TOL:e}"
        )));
    }
    let min = min_isotropic(r, starts, seed)?.margin;
    if min < -1e-7 {
        return Err(Error::PreconditionViolation(format!(
            "operator has negative isotropic curvature {min:e}"
        )));
    }
    Ok(sharp_pattern(r, f))
}

/// The `R#` combination of [`sharp_boundary_check`] without the preconditions.
pub fn sharp_pattern(r: &CurvatureOperator, f: &FourFrame) -> f64 {
    let s = sharp_tensor(r.tensor());
    let e = |a: usize| f.e(a);
    s.contract(e(0), e(2), e(0), e(2))
        + s.contract(e(0), e(3), e(0), e(3))
        + s.contract(e(1), e(2), e(1), e(2))
        + s.contract(e(1), e(3), e(1), e(3))
        + 2.0 * s.contract(e(0), e(2), e(3), e(1))
        + 2.0 * s.contract(e(0), e(3), e(1), e(2))
}

/// Curvature signs available in dimension 3, where the four-frame conditions are void.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowDimensionProxies {
    pub min_ricci: f64,
    pub min_sectional: f64,
}

/// Minimum Ricci eigenvalue and minimum sectional curvature; `n = 3` only.
/// In dimension 3 every two-form is decomposable, so the minimum sectional
/// curvature is the smallest eigenvalue of the `Lambda^2` matrix.
pub fn low_dimension_proxies(r: &CurvatureOperator) -> Result<LowDimensionProxies> {
    if r.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: r.dim(),
        });
    }
    let min_sectional = SymmetricEigen::new(r.lambda2_matrix())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(LowDimensionProxies {
        min_ricci: r.ricci().min_eigenvalue(),
        min_sectional,
    })
}
