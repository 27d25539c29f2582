//! Bilinear constructions: the Kulkarni–Nomizu product and the quadratic
//! reaction term `Q(R) = R^2 + R#`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::Tensor4;

use super::bilinear::SymmetricBilinear;
use super::operator::CurvatureOperator;

/// `(A o B)_ijkl = A_ik B_jl - A_il B_jk - A_jk B_il + A_jl B_ik`.
pub fn kulkarni_nomizu(a: &SymmetricBilinear, b: &SymmetricBilinear) -> Result<CurvatureOperator> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let t = Tensor4::from_fn(a.dim(), |i, j, k, l| {
        a.get(i, k) * b.get(j, l) - a.get(i, l) * b.get(j, k) - a.get(j, k) * b.get(i, l)
            + a.get(j, l) * b.get(i, k)
    });
    Ok(CurvatureOperator::from_tensor_unchecked(t))
}

/// `(R^2)_ijkl = sum_pq R_ijpq R_klpq`. Satisfies the pairwise symmetries but
/// in general not the first Bianchi identity.
pub fn square(r: &CurvatureOperator) -> Tensor4 {
    let n = r.dim();
    let nn = n * n;
    let b = DMatrix::from_row_slice(nn, nn, r.tensor().as_slice());
    let g = &b * b.transpose();
    // g is indexed ((i,j),(k,l)), which is exactly the flat tensor layout.
    let data: Vec<f64> = (0..nn)
        .flat_map(|row| (0..nn).map(move |col| (row, col)))
        .map(|(row, col)| g[(row, col)])
        .collect();
    Tensor4::from_vec(n, data).expect("square has n^4 entries")
}

/// `(R#)_ijkl = 2 sum_pq (R_ipkq R_jplq - R_iplq R_jpkq)`.
pub fn sharp(r: &CurvatureOperator) -> Tensor4 {
    sharp_tensor(r.tensor())
}

pub(crate) fn sharp_tensor(t: &Tensor4) -> Tensor4 {
    let n = t.dim();
    let nn = n * n;
    // a[(i,k),(p,q)] = R_ipkq
    let a = DMatrix::from_fn(nn, nn, |row, col| {
        let (i, k) = (row / n, row % n);
        let (p, q) = (col / n, col % n);
        t.get(i, p, k, q)
    });
    let g = &a * a.transpose();
    Tensor4::from_fn(n, |i, j, k, l| {
        2.0 * (g[(i * n + k, j * n + l)] - g[(i * n + l, j * n + k)])
    })
}

/// Hamilton's reaction term `Q(R) = R^2 + R#`, validated as an operator.
pub fn q(r: &CurvatureOperator) -> CurvatureOperator {
    let sum = &square(r) + &sharp(r);
    // Rounding drift only; the sum is an algebraic curvature tensor.
    CurvatureOperator::repair(&sum, 1e-9).expect("Q(R) satisfies the curvature symmetries")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_kn_id_is_twice_sphere() {
        for n in 2..7 {
            let id = SymmetricBilinear::identity(n);
            let p = kulkarni_nomizu(&id, &id).unwrap();
            let two_i = CurvatureOperator::sphere(n).scaled(2.0);
            assert!(p.max_abs_diff(&two_i) < 1e-15);
        }
    }

    #[test]
    fn kn_with_zero_vanishes() {
        let id = SymmetricBilinear::identity(4);
        let z = SymmetricBilinear::zero(4);
        assert_eq!(kulkarni_nomizu(&id, &z).unwrap().tensor().max_abs(), 0.0);
    }

    #[test]
    fn kn_dimension_mismatch() {
        let a = SymmetricBilinear::identity(4);
        let b = SymmetricBilinear::identity(5);
        assert!(matches!(
            kulkarni_nomizu(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn q_of_zero() {
        assert_eq!(q(&CurvatureOperator::zero(4)).tensor().max_abs(), 0.0);
    }
}
