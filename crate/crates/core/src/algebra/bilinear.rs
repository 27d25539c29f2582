use nalgebra::DMatrix;

use crate::error::{Error, Result};

const FORM_TOL: f64 = 1e-12;

fn asymmetry(m: &DMatrix<f64>, sign: f64) -> f64 {
    let n = m.nrows();
    let mut r = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            r = r.max((m[(i, j)] - sign * m[(j, i)]).abs());
        }
    }
    r
}

/// A symmetric bilinear form on `R^n` (Ricci tensors, the metric).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBilinear {
    m: DMatrix<f64>,
}

impl SymmetricBilinear {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidShape("bilinear form must be square".into()));
        }
        let r = asymmetry(&m, 1.0);
        if r > FORM_TOL * m.abs().max().max(1.0) {
            return Err(Error::InvalidShape(format!(
                "bilinear form not symmetric: residual {r:e}"
            )));
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    /// Orthogonal projection onto the first `k` coordinates of `R^n`.
    pub fn coordinate_projection(n: usize, k: usize) -> Self {
        Self {
            m: DMatrix::from_fn(n, n, |i, j| if i == j && i < k { 1.0 } else { 0.0 }),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Frobenius norm squared, `|A|^2 = sum A_ij^2`.
    pub fn norm_squared(&self) -> f64 {
        self.m.iter().map(|x| x * x).sum()
    }

    /// Matrix square `A^2`.
    pub fn squared(&self) -> Self {
        Self { m: &self.m * &self.m }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { m: &self.m * c }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// A 2-form on `R^m`, stored as an antisymmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    m: DMatrix<f64>,
}

impl TwoForm {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidShape("2-form must be square".into()));
        }
        let r = asymmetry(&m, -1.0);
        if r > FORM_TOL * m.abs().max().max(1.0) {
            return Err(Error::InvalidShape(format!(
                "2-form not antisymmetric: residual {r:e}"
            )));
        }
        Ok(Self { m })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    /// `a ^ b` with components `a_i b_j - a_j b_i`.
    pub fn wedge(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        let n = a.len();
        Ok(Self {
            m: DMatrix::from_fn(n, n, |i, j| a[i] * b[j] - a[j] * b[i]),
        })
    }

    /// `e_i ^ e_j` in `R^dim`.
    pub fn basis(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] += 1.0;
        m[(j, i)] -= 1.0;
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

impl std::ops::Add for &TwoForm {
    type Output = TwoForm;
    fn add(self, rhs: &TwoForm) -> TwoForm {
        TwoForm {
            m: &self.m + &rhs.m,
        }
    }
}

impl std::ops::Mul<f64> for &TwoForm {
    type Output = TwoForm;
    fn mul(self, c: f64) -> TwoForm {
        TwoForm { m: &self.m * c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SymmetricBilinear::new(m.clone()).is_err());
        assert!(TwoForm::new(m).is_err());
    }

    #[test]
    fn wedge_is_antisymmetric() {
        let w = TwoForm::wedge(&[1.0, 2.0, 0.5], &[0.0, -1.0, 3.0]).unwrap();
        assert!(TwoForm::new(w.matrix().clone()).is_ok());
        assert_eq!(w.matrix()[(0, 1)], -1.0);
    }
}
