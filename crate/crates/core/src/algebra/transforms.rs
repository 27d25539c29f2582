//! The linear maps `l_{a,b}` and the modified reaction term `D_{a,b}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::bilinear::SymmetricBilinear;
use super::operator::CurvatureOperator;
use super::products::kulkarni_nomizu;

const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub a: f64,
    pub b: f64,
}

impl TransformParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Largest admissible `b` in dimension `n`: `(sqrt(2n(n-2)+4) - 2) / (n(n-2))`.
    pub fn max_b(n: usize) -> f64 {
        let nf = n as f64;
        ((2.0 * nf * (nf - 2.0) + 4.0).sqrt() - 2.0) / (nf * (nf - 2.0))
    }

    /// The admissible pair for a given `b`, with `2a = 2b + (n-2) b^2`.
    pub fn admissible(n: usize, b: f64) -> Result<Self> {
        let p = Self {
            a: Self::admissible_a(n, b),
            b,
        };
        p.check_admissible(n)?;
        Ok(p)
    }

    fn admissible_a(n: usize, b: f64) -> f64 {
        b + 0.5 * (n as f64 - 2.0) * b * b
    }

    pub fn check_admissible(&self, n: usize) -> Result<()> {
        if n < 3 {
            return Err(Error::Inadmissible(format!("n = {n} has no admissible range")));
        }
        let bmax = Self::max_b(n);
        if !(self.b > 0.0 && self.b <= bmax * (1.0 + 1e-12)) {
            return Err(Error::Inadmissible(format!(
                "b = {} outside (0, {bmax}]",
                self.b
            )));
        }
        let relation = 2.0 * self.a - 2.0 * self.b - (n as f64 - 2.0) * self.b * self.b;
        if relation.abs() > 1e-12 * (1.0 + self.a.abs()) {
            return Err(Error::Inadmissible(format!(
                "2a - 2b - (n-2)b^2 = {relation:e} != 0"
            )));
        }
        Ok(())
    }

    /// Coefficient of `Ric_0 o Ric_0` in `D_{a,b}`: `(n-2) b^2 - 2(a-b)`, written as
    /// `2 (b + (n-2) b^2 / 2 - a)` so it is exactly zero for pairs built by [`Self::admissible`].
    pub fn ric0_sq_coefficient(&self, n: usize) -> f64 {
        2.0 * (Self::admissible_a(n, self.b) - self.a)
    }

    /// Coefficient of `|Ric_0|^2 id o id` in `D_{a,b}`.
    pub fn trace_coefficient(&self, n: usize) -> Result<f64> {
        let (a, b, nf) = (self.a, self.b, n as f64);
        let denom = nf + 2.0 * nf * (nf - 1.0) * a;
        if denom.abs() <= SINGULAR_TOL {
            return Err(Error::SingularTransform(format!(
                "n + 2n(n-1)a = {denom:e}"
            )));
        }
        let num = nf * b * b * (1.0 - 2.0 * b) - 2.0 * (a - b) * (1.0 - 2.0 * b + nf * b * b);
        Ok(num / denom)
    }
}

/// `l_{a,b}(R) = R + b Ric_0 o id + (a/n) scal id o id`.
pub fn l_ab(r: &CurvatureOperator, p: TransformParams) -> CurvatureOperator {
    let n = r.dim();
    let id = SymmetricBilinear::identity(n);
    let ric0 = r.ricci_traceless();
    let scal = r.scalar();
    add_terms(r, &ric0, p.b, &id, (p.a / n as f64) * scal)
}

/// Inverse of [`l_ab`]. `l_{a,b}` scales `Ric_0` by `1 + (n-2)b` and `scal` by
/// `1 + 2(n-1)a` and fixes the Weyl part, so the inverse subtracts the same
/// two directions with rescaled coefficients.
pub fn inverse_l_ab(r: &CurvatureOperator, p: TransformParams) -> Result<CurvatureOperator> {
    let n = r.dim();
    let nf = n as f64;
    let ric0_factor = 1.0 + (nf - 2.0) * p.b;
    let scal_factor = 1.0 + 2.0 * (nf - 1.0) * p.a;
    if ric0_factor.abs() <= SINGULAR_TOL {
        return Err(Error::SingularTransform(format!(
            "1 + (n-2)b = {ric0_factor:e}"
        )));
    }
    if scal_factor.abs() <= SINGULAR_TOL {
        return Err(Error::SingularTransform(format!(
            "1 + 2(n-1)a = {scal_factor:e}"
        )));
    }
    let id = SymmetricBilinear::identity(n);
    let ric0 = r.ricci_traceless();
    let scal = r.scalar();
    Ok(add_terms(
        r,
        &ric0,
        -p.b / ric0_factor,
        &id,
        -(p.a / (nf * scal_factor)) * scal,
    ))
}

fn add_terms(
    r: &CurvatureOperator,
    ric0: &SymmetricBilinear,
    ric0_coef: f64,
    id: &SymmetricBilinear,
    id_coef: f64,
) -> CurvatureOperator {
    let kn_ric0 = kulkarni_nomizu(ric0, id).expect("same dimension");
    let kn_id = kulkarni_nomizu(id, id).expect("same dimension");
    r.add_scaled(ric0_coef, &kn_ric0)
        .and_then(|x| x.add_scaled(id_coef, &kn_id))
        .expect("same dimension")
}

/// The extra reaction term of the `l_{a,b}`-conjugated ODE:
///
/// `D = ((n-2)b^2 - 2(a-b)) Ric_0 o Ric_0 + 2a Ric o Ric + 2b^2 Ric_0^2 o id
///      + c |Ric_0|^2 id o id`,
/// with `c = (n b^2 (1-2b) - 2(a-b)(1-2b+n b^2)) / (n + 2n(n-1)a)`.
pub fn d_ab(r: &CurvatureOperator, p: TransformParams) -> Result<CurvatureOperator> {
    let n = r.dim();
    let c_trace = p.trace_coefficient(n)?;
    let c_ric0 = p.ric0_sq_coefficient(n);
    let id = SymmetricBilinear::identity(n);
    let ric = r.ricci();
    let ric0 = r.ricci_traceless();
    let ric0_sq = ric0.squared();

    let mut out = kulkarni_nomizu(&ric, &ric)?.scaled(2.0 * p.a);
    if c_ric0 != 0.0 {
        out = out.add_scaled(c_ric0, &kulkarni_nomizu(&ric0, &ric0)?)?;
    }
    out = out.add_scaled(2.0 * p.b * p.b, &kulkarni_nomizu(&ric0_sq, &id)?)?;
    out = out.add_scaled(c_trace * ric0.norm_squared(), &kulkarni_nomizu(&id, &id)?)?;
    Ok(out)
}
