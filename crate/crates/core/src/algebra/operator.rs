use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{pair_list, Tensor4};

use super::bilinear::{SymmetricBilinear, TwoForm};

/// Absolute symmetry residual allowed for an operator with entries of size one.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Absolute first-Bianchi residual allowed for an operator with entries of size one.
pub const BIANCHI_TOL: f64 = 1e-10;

/// Validation thresholds. Residuals are compared against `tol * max(1, max|R_ijkl|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub symmetry: f64,
    pub bianchi: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: SYMMETRY_TOL,
            bianchi: BIANCHI_TOL,
        }
    }
}

/// An algebraic curvature operator: a rank-4 tensor with the symmetries of a
/// Riemann tensor and the first Bianchi identity.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureOperator {
    t: Tensor4,
}

/// Validates `raw` against every operator invariant.
pub fn make_operator(n: usize, raw: Vec<f64>) -> Result<CurvatureOperator> {
    CurvatureOperator::new(Tensor4::from_vec(n, raw)?)
}

/// Orthogonal projection `T - b(T)` onto the kernel of the cyclic-sum map.
///
/// The input must already carry the pairwise symmetries.
pub fn project_bianchi(raw: &Tensor4) -> Result<CurvatureOperator> {
    check_pair_symmetries(raw, Tolerances::default())?;
    let projected = raw - &raw.cyclic_part();
    CurvatureOperator::with_tolerances(projected, Tolerances::default())
}

fn scale_of(t: &Tensor4) -> f64 {
    t.max_abs().max(1.0)
}

fn check_pair_symmetries(t: &Tensor4, tol: Tolerances) -> Result<()> {
    let scale = scale_of(t);
    for (symmetry, residual) in t.symmetry_residuals() {
        if residual > tol.symmetry * scale {
            return Err(Error::SymmetryViolation { symmetry, residual });
        }
    }
    Ok(())
}

impl CurvatureOperator {
    pub fn new(t: Tensor4) -> Result<Self> {
        Self::with_tolerances(t, Tolerances::default())
    }

    pub fn with_tolerances(t: Tensor4, tol: Tolerances) -> Result<Self> {
        if t.dim() < 2 {
            return Err(Error::InvalidShape(format!(
                "dimension must be at least 2, got {}",
                t.dim()
            )));
        }
        if t.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidShape("non-finite entry".into()));
        }
        check_pair_symmetries(&t, tol)?;
        let residual = t.bianchi_residual();
        if residual > tol.bianchi * scale_of(&t) {
            return Err(Error::BianchiViolation { residual });
        }
        Ok(Self { t })
    }

    /// Symmetrizes and projects a tensor that is valid up to rounding drift.
    ///
    /// Fails if the drift exceeds `drift_tol * max(1, max|T|)`.
    pub fn repair(t: &Tensor4, drift_tol: f64) -> Result<Self> {
        let scale = scale_of(t);
        let worst_pair = t
            .symmetry_residuals()
            .iter()
            .fold(0.0f64, |m, (_, r)| m.max(*r));
        let bianchi = t.bianchi_residual();
        let drift = worst_pair.max(bianchi);
        if drift > drift_tol * scale {
            return Err(Error::StepRejected {
                t: f64::NAN,
                residual: drift,
            });
        }
        let sym = t.symmetrize_pairs();
        let projected = &sym - &sym.cyclic_part();
        Ok(Self { t: projected })
    }

    /// Crate-internal constructor for results that hold the invariants by construction.
    pub(crate) fn from_tensor_unchecked(t: Tensor4) -> Self {
        Self { t }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            t: Tensor4::zeros(n),
        }
    }

    /// The unit sphere operator `I_ijkl = d_ik d_jl - d_il d_jk`.
    pub fn sphere(n: usize) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Self {
            t: Tensor4::from_fn(n, |i, j, k, l| d(i, k) * d(j, l) - d(i, l) * d(j, k)),
        }
    }

    /// Builds the operator whose `Lambda^2` matrix is `m`, with
    /// `m[(ij),(kl)] = R_ijkl` for `i < j`, `k < l`.
    pub fn from_lambda2(n: usize, m: &DMatrix<f64>) -> Result<Self> {
        let pairs = pair_list(n);
        let np = pairs.len();
        if m.nrows() != np || m.ncols() != np {
            return Err(Error::InvalidShape(format!(
                "lambda2 matrix for n = {n} must be {np} x {np}"
            )));
        }
        Self::new(Tensor4::from_lambda2(n, m))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.t.get(i, j, k, l)
    }

    pub fn tensor(&self) -> &Tensor4 {
        &self.t
    }

    pub fn into_tensor(self) -> Tensor4 {
        self.t
    }

    /// Frobenius norm of the full `n^4` array.
    pub fn norm(&self) -> f64 {
        self.t.norm()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { t: self.t.scaled(c) }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &CurvatureOperator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            t: self.t.add_scaled(c, &other.t),
        })
    }

    /// The symmetric `N x N` matrix on `Lambda^2`, `N = n(n-1)/2`, with
    /// `R(e_i ^ e_j, e_i ^ e_j) = R_ijij` on the diagonal.
    pub fn lambda2_matrix(&self) -> DMatrix<f64> {
        let pairs = pair_list(self.dim());
        let np = pairs.len();
        DMatrix::from_fn(np, np, |a, b| {
            let (i, j) = pairs[a];
            let (k, l) = pairs[b];
            self.get(i, j, k, l)
        })
    }

    /// `Ric_ik = sum_j R_ijkj`.
    pub fn ricci(&self) -> SymmetricBilinear {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, k| (0..n).map(|j| self.get(i, j, k, j)).sum());
        SymmetricBilinear::from_matrix_unchecked(m)
    }

    pub fn scalar(&self) -> f64 {
        self.ricci().trace()
    }

    /// `Ric - (scal/n) id`.
    pub fn ricci_traceless(&self) -> SymmetricBilinear {
        let ric = self.ricci();
        let n = self.dim() as f64;
        let scal = ric.trace();
        SymmetricBilinear::from_matrix_unchecked(
            ric.matrix() - DMatrix::identity(self.dim(), self.dim()) * (scal / n),
        )
    }

    /// `R(phi, phi) = 1/4 sum R_ijkl phi_ij phi_kl`.
    pub fn evaluate_on_2forms(&self, phi: &TwoForm) -> Result<f64> {
        self.bilinear_on_2forms(phi, phi)
    }

    /// `R(phi, psi) = 1/4 sum R_ijkl phi_ij psi_kl`.
    pub fn bilinear_on_2forms(&self, phi: &TwoForm, psi: &TwoForm) -> Result<f64> {
        let n = self.dim();
        for f in [phi, psi] {
            if f.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.dim(),
                });
            }
        }
        let (a, b) = (phi.matrix(), psi.matrix());
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] == 0.0 {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        s += self.get(i, j, k, l) * a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        Ok(s / 4.0)
    }

    /// `R(a, b, c, d)` for vectors in `R^n`.
    pub fn at(&self, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
        self.t.contract(a, b, c, d)
    }

    /// Pull-back by an orthogonal matrix, `(g . R)_ijkl = g_ia g_jb g_kc g_ld R_abcd`.
    pub fn rotated(&self, g: &DMatrix<f64>) -> Self {
        Self {
            t: self.t.transform(g),
        }
    }

    pub fn max_abs_diff(&self, other: &CurvatureOperator) -> f64 {
        self.t.max_abs_diff(&other.t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_and_zero_validate() {
        let n = 4;
        let i = CurvatureOperator::sphere(n);
        assert!(make_operator(n, i.tensor().as_slice().to_vec()).is_ok());
        assert!(make_operator(n, vec![0.0; 256]).is_ok());
    }

    #[test]
    fn inconsistent_antisymmetry_rejected() {
        let mut t = Tensor4::zeros(4);
        t.set(0, 1, 0, 1, 1.0);
        t.set(1, 0, 0, 1, 1.0);
        match CurvatureOperator::new(t) {
            Err(Error::SymmetryViolation { residual, .. }) => assert!(residual >= 1.0),
            other => panic!("expected symmetry violation, got {other:?}"),
        }
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(make_operator(4, vec![0.0; 255]), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn totally_antisymmetric_tensor_projects_to_zero() {
        let eps = Tensor4::from_fn(4, |i, j, k, l| levi_civita([i, j, k, l]));
        assert!(matches!(
            CurvatureOperator::new(eps.clone()),
            Err(Error::BianchiViolation { .. })
        ));
        let p = project_bianchi(&eps).unwrap();
        assert!(p.tensor().max_abs() < 1e-15);
    }

    #[test]
    fn projection_fixes_sphere() {
        let i = CurvatureOperator::sphere(5);
        let p = project_bianchi(i.tensor()).unwrap();
        assert!(p.max_abs_diff(&i) < 1e-15);
    }

    #[test]
    fn sphere_contractions() {
        for n in 2..8 {
            let i = CurvatureOperator::sphere(n);
            let ric = i.ricci();
            let expected = DMatrix::<f64>::identity(n, n) * (n as f64 - 1.0);
            assert!((ric.matrix() - expected).abs().max() < 1e-15);
            assert_eq!(i.scalar(), (n * (n - 1)) as f64);
            assert!(i.ricci_traceless().matrix().abs().max() < 1e-15);
        }
    }

    #[test]
    fn lambda2_round_trip() {
        let n = 4;
        let i = CurvatureOperator::sphere(n);
        let m = i.lambda2_matrix();
        assert!((&m - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-15);
        let back = CurvatureOperator::from_lambda2(n, &m).unwrap();
        assert_eq!(back, i);
    }

    fn levi_civita(idx: [usize; 4]) -> f64 {
        let mut p = idx;
        let mut sign = 1.0;
        for a in 0..4 {
            for b in a + 1..4 {
                if idx[a] == idx[b] {
                    return 0.0;
                }
            }
        }
        for a in 0..4 {
            for b in a + 1..4 {
                if p[a] > p[b] {
                    p.swap(a, b);
                    sign = -sign;
                }
            }
        }
        sign
    }
}
