//! Product extensions of an operator on `R^n`: by a flat line, and by a unit
//! two-sphere.

use crate::tensor::Tensor4;

use super::operator::CurvatureOperator;

/// The operator of `M x R` on `R^{n+1}`: every entry touching the last index vanishes.
pub fn extend_flat(r: &CurvatureOperator) -> CurvatureOperator {
    extend_flat_by(r, 1)
}

/// Flat extension by `extra` dimensions.
pub fn extend_flat_by(r: &CurvatureOperator, extra: usize) -> CurvatureOperator {
    let n = r.dim();
    let t = Tensor4::from_fn(n + extra, |i, j, k, l| {
        if i < n && j < n && k < n && l < n {
            r.get(i, j, k, l)
        } else {
            0.0
        }
    });
    CurvatureOperator::from_tensor_unchecked(t)
}

/// The operator of `M x S^2(1)` on `R^{n+2}`:
/// `S(v1,v2,v3,v4) = R(..) + <x1,x3><x2,x4> - <x1,x4><x2,x3>`.
pub fn extend_sphere2(r: &CurvatureOperator) -> CurvatureOperator {
    let n = r.dim();
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let t = Tensor4::from_fn(n + 2, |i, j, k, l| {
        let inner = [i, j, k, l].iter().filter(|&&x| x < n).count();
        match inner {
            4 => r.get(i, j, k, l),
            0 => d(i, k) * d(j, l) - d(i, l) * d(j, k),
            _ => 0.0,
        }
    });
    CurvatureOperator::from_tensor_unchecked(t)
}
