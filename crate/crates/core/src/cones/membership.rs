//! Membership oracles.
//!
//! The parametric oracle minimizes the defining functional over four-frames of
//! `R^n` with `(lambda, mu)` minimized out exactly. The extension oracle
//! minimizes plain isotropic curvature of the product extension (`M x R` for
//! `TILDE_C`, `M x S^2` for `SET_E` and `LAB_E`). For `SET_E` the extension
//! minimum is `min(parametric, 0)`: frames mixing the two factors always give 0.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::algebra::{extend_flat, extend_sphere2, inverse_l_ab, CurvatureOperator};
use crate::error::{Error, Result};

use super::frame::{FourFrame, FrameParams};
use super::functional::{ConditionObjective, Lambda2Form, ParamMode};
use super::spec::{ConeKind, ConeSpec};
use super::stiefel::{multistart, orthonormalize_rows, LocalSettings, MultistartResult, StartSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain isotropic minimization over frames.
    Isotropic,
    Parametric,
    Extension,
    /// Parametric margin, cross-checked by the extension oracle.
    ParametricChecked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Member,
    NonMember,
    Undecided,
}

impl Decision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Decision::Member => "MEMBER",
            Decision::NonMember => "NON_MEMBER",
            Decision::Undecided => "UNDECIDED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub vectors: Vec<Vec<f64>>,
    pub lambda: f64,
    pub mu: f64,
}

impl Witness {
    pub fn frame(&self) -> Result<FourFrame> {
        match self.vectors.as_slice() {
            [a, b, c, d] => FourFrame::new([a.clone(), b.clone(), c.clone(), d.clone()]),
            _ => Err(Error::InvalidFrame("witness needs four vectors".into())),
        }
    }

    pub fn params(&self) -> FrameParams {
        FrameParams::new(self.lambda, self.mu)
    }

    fn from_rows(m: usize, rows: &[f64], lambda: f64, mu: f64) -> Self {
        Self {
            vectors: rows.chunks(m).map(|c| c.to_vec()).collect(),
            lambda,
            mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub margin: f64,
    pub kind: String,
    pub witness: Witness,
    pub method: Method,
    pub starts: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parametric_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_margin: Option<f64>,
    pub decision: Decision,
}

impl MembershipReport {
    pub fn is_member(&self) -> bool {
        self.decision == Decision::Member
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipOptions {
    pub starts: usize,
    pub seed: u64,
    /// Largest accepted disagreement between the two oracles.
    pub band: f64,
    /// Member iff margin >= threshold.
    pub threshold: f64,
    /// Run the extension oracle where one exists.
    pub cross_check: bool,
    /// Number of times the start count is multiplied by 4 after a disagreement.
    pub escalations: u32,
    /// Extra starting frames in `R^n` for the parametric oracle.
    pub warm: Vec<FourFrame>,
    pub local: LocalSettings,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        Self {
            starts: 64,
            seed: 0,
            band: 5e-6,
            threshold: -1e-7,
            cross_check: true,
            escalations: 1,
            warm: Vec::new(),
            local: LocalSettings::default(),
        }
    }
}

impl MembershipOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }

    pub fn cross_check(mut self, on: bool) -> Self {
        self.cross_check = on;
        self
    }

    pub fn decide(&self, margin: f64) -> Decision {
        if margin.is_nan() {
            Decision::Undecided
        } else if margin >= self.threshold {
            Decision::Member
        } else {
            Decision::NonMember
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::DimensionTooSmall(n));
    }
    Ok(())
}

fn converged_or_err(res: &MultistartResult) -> Result<()> {
    if res.any_converged {
        Ok(())
    } else {
        Err(Error::NonConvergence { starts: res.starts })
    }
}

fn warm_rows(warm: &[FourFrame], m: usize) -> Vec<Vec<f64>> {
    warm.iter()
        .filter(|f| f.dim() == m)
        .map(|f| f.to_rows())
        .collect()
}

/// Approximate minimum of isotropic curvature over orthonormal four-frames of `R^m`.
pub fn min_isotropic(r: &CurvatureOperator, starts: usize, seed: u64) -> Result<MembershipReport> {
    min_isotropic_with(r, starts, seed, &[], &LocalSettings::default())
}

pub fn min_isotropic_with(
    r: &CurvatureOperator,
    starts: usize,
    seed: u64,
    warm: &[FourFrame],
    local: &LocalSettings,
) -> Result<MembershipReport> {
    let m = r.dim();
    check_dim(m)?;
    let obj = ConditionObjective::isotropic(Lambda2Form::new(r));
    let res = multistart(
        &obj,
        &warm_rows(warm, m),
        starts,
        seed,
        StartSampler::Uniform,
        local,
    );
    converged_or_err(&res)?;
    let margin = res.best.eval.value;
    Ok(MembershipReport {
        margin,
        kind: ConeSpec::PIC.label(),
        witness: Witness::from_rows(m, &res.best.x, 1.0, 1.0),
        method: Method::Isotropic,
        starts: res.starts,
        converged: res.best.converged,
        parametric_margin: None,
        extension_margin: None,
        decision: MembershipOptions::default().decide(margin),
    })
}

/// Operator the `SET_E` functional is evaluated on: `R` itself, or its
/// pullback under `l_{a,b}` for `LAB_E`.
fn base_operator(r: &CurvatureOperator, spec: &ConeSpec) -> Result<CurvatureOperator> {
    match spec.params() {
        Some(p) => inverse_l_ab(r, p),
        None => Ok(r.clone()),
    }
}

fn param_mode(kind: ConeKind) -> (ParamMode, f64) {
    match kind {
        ConeKind::Pic => (ParamMode::Fixed(1.0, 1.0), 0.0),
        ConeKind::TildeC => (ParamMode::Lambda, 0.0),
        ConeKind::HatC => (ParamMode::Box, 0.0),
        ConeKind::SetE | ConeKind::LabE => (ParamMode::Box, 1.0),
    }
}

struct OracleRun {
    value: f64,
    rows: Vec<f64>,
    lambda: f64,
    mu: f64,
    starts: usize,
    converged: bool,
}

fn parametric(
    base: &CurvatureOperator,
    kind: ConeKind,
    starts: usize,
    extra: &[Vec<f64>],
    opts: &MembershipOptions,
) -> Result<OracleRun> {
    let (mode, constant) = param_mode(kind);
    let obj = ConditionObjective::new(Lambda2Form::new(base), mode, constant);
    let n = base.dim();
    let mut warm = warm_rows(&opts.warm, n);
    warm.extend_from_slice(extra);
    let res = multistart(
        &obj,
        &warm,
        starts,
        opts.seed,
        StartSampler::Uniform,
        &opts.local,
    );
    converged_or_err(&res)?;
    Ok(OracleRun {
        value: res.best.eval.value,
        lambda: res.best.eval.lambda,
        mu: res.best.eval.mu,
        rows: res.best.x,
        starts: res.starts,
        converged: res.best.converged,
    })
}

fn extension(
    base: &CurvatureOperator,
    kind: ConeKind,
    starts: usize,
    warm: &[Vec<f64>],
    opts: &MembershipOptions,
) -> Result<Option<OracleRun>> {
    let ext = match kind {
        ConeKind::TildeC => extend_flat(base),
        ConeKind::SetE | ConeKind::LabE => extend_sphere2(base),
        ConeKind::Pic | ConeKind::HatC => return Ok(None),
    };
    let obj = ConditionObjective::isotropic(Lambda2Form::new(&ext));
    // a separate stream family so the two oracles never share starts
    let seed = crate::rng::derive_seed(opts.seed, 0x5e7e);
    let sampler = StartSampler::Tilted { base: base.dim() };
    let res = multistart(&obj, warm, starts, seed, sampler, &opts.local);
    converged_or_err(&res)?;
    Ok(Some(OracleRun {
        value: res.best.eval.value,
        lambda: 1.0,
        mu: 1.0,
        rows: res.best.x,
        starts: res.starts,
        converged: res.best.converged,
    }))
}

/// Extension frame realizing the parametric value at `(rows, lambda, mu)`:
/// the missing length of `e_2` and `e_4` goes into the extra factor.
fn lift_witness(kind: ConeKind, n: usize, rows: &[f64], lambda: f64, mu: f64) -> Option<Vec<f64>> {
    let extra = match kind {
        ConeKind::TildeC => 1,
        ConeKind::SetE | ConeKind::LabE => 2,
        ConeKind::Pic | ConeKind::HatC => return None,
    };
    let m = n + extra;
    let mut x = vec![0.0; 4 * m];
    for a in 0..4 {
        let s = match a {
            1 => mu,
            3 => lambda,
            _ => 1.0,
        };
        for i in 0..n {
            x[a * m + i] = s * rows[a * n + i];
        }
    }
    if extra == 2 {
        x[m + n] = (1.0 - mu * mu).max(0.0).sqrt();
    }
    x[3 * m + m - 1] = (1.0 - lambda * lambda).max(0.0).sqrt();
    orthonormalize_rows(&mut x, 4, m).then_some(x)
}

/// Unit eigenvector for the smaller eigenvalue of the Hermitian `[[p, q], [q*, r]]`.
fn low_eigvec(p: f64, q: Complex<f64>, r: f64) -> [Complex<f64>; 2] {
    let low = 0.5 * (p + r) - (0.25 * (p - r) * (p - r) + q.norm_sqr()).sqrt();
    let a = [q, Complex::from(low - p)];
    let b = [Complex::from(low - r), q.conj()];
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    let (v, nv) = if na >= nb { (a, na) } else { (b, nb) };
    if nv < 1e-300 {
        return [Complex::from(1.0), Complex::from(0.0)];
    }
    let s = nv.sqrt();
    [v[0] / s, v[1] / s]
}

/// Parametric starting frame from an extension frame.
///
/// With `z = e_1 + i e_2`, `w = e_3 + i e_4`, a unitary change of basis of
/// `span(z, w)` (which keeps isotropic curvature) moves as much of the
/// extra-factor part as possible into `Im w`; the `R^n` parts are then
/// orthonormalized. `None` when they do not span four dimensions.
fn project_witness(n: usize, m: usize, rows: &[f64]) -> Option<Vec<f64>> {
    let row = |a: usize| &rows[a * m..(a + 1) * m];
    let z: Vec<Complex<f64>> = (0..m).map(|i| Complex::new(row(0)[i], row(1)[i])).collect();
    let w: Vec<Complex<f64>> = (0..m).map(|i| Complex::new(row(2)[i], row(3)[i])).collect();
    // Gram matrix of the extra-factor parts of z and w
    let (mut p, mut q, mut r) = (0.0, Complex::from(0.0), 0.0);
    for i in n..m {
        p += z[i].norm_sqr();
        r += w[i].norm_sqr();
        q += z[i].conj() * w[i];
    }
    let u = low_eigvec(p, q, r);
    let v = [-u[1].conj(), u[0].conj()];
    let z1: Vec<Complex<f64>> = (0..m).map(|i| u[0] * z[i] + u[1] * w[i]).collect();
    let mut w1: Vec<Complex<f64>> = (0..m).map(|i| v[0] * z[i] + v[1] * w[i]).collect();
    // phase of w1 leaving the least extra-factor mass in its real part
    let (mut aa, mut ab, mut bb) = (0.0, 0.0, 0.0);
    for c in &w1[n..] {
        aa += c.re * c.re;
        ab += c.re * c.im;
        bb += c.im * c.im;
    }
    let t = 0.5 * (2.0 * ab).atan2(aa - bb);
    // Re(e^{i theta} w1) = cos(theta) a - sin(theta) b is smallest at theta = pi/2 - t
    let phase = Complex::from_polar(1.0, std::f64::consts::FRAC_PI_2 - t);
    for c in &mut w1 {
        *c *= phase;
    }
    let mut x = Vec::with_capacity(4 * n);
    x.extend(z1[..n].iter().map(|c| c.re));
    x.extend(z1[..n].iter().map(|c| c.im));
    x.extend(w1[..n].iter().map(|c| c.re));
    x.extend(w1[..n].iter().map(|c| c.im));
    orthonormalize_rows(&mut x, 4, n).then_some(x)
}

/// The value the extension oracle should reproduce given the parametric margin.
fn expected_extension(kind: ConeKind, parametric: f64) -> f64 {
    match kind {
        ConeKind::SetE | ConeKind::LabE => parametric.min(0.0),
        _ => parametric,
    }
}

/// Decides membership of `r` in `spec`.
///
/// The reported margin and witness come from the parametric oracle, so the
/// witness reproduces the margin under `evaluate_condition`. When cross-checking,
/// a disagreement beyond `band` first reruns both oracles warm-started from
/// each other's best frame, then multiplies the start count by 4 per
/// escalation; persisting disagreement is an `OracleMismatch`.
pub fn membership(
    r: &CurvatureOperator,
    spec: &ConeSpec,
    opts: &MembershipOptions,
) -> Result<MembershipReport> {
    let n = r.dim();
    check_dim(n)?;
    let base = base_operator(r, spec)?;
    let kind = spec.kind();
    let mut starts = opts.starts.max(1);
    let mut attempt = 0;
    let mut par_warm: Vec<Vec<f64>> = Vec::new();
    let mut ext_warm: Vec<Vec<f64>> = Vec::new();
    let mut reseeded = false;
    loop {
        let par = parametric(&base, kind, starts, &par_warm, opts)?;
        let ext = if opts.cross_check {
            extension(&base, kind, starts, &ext_warm, opts)?
        } else {
            None
        };
        let mismatch = ext.as_ref().and_then(|e| {
            let expected = expected_extension(kind, par.value);
            ((e.value - expected).abs() > opts.band).then_some(e.value)
        });
        if let (Some(ext_value), Some(e)) = (mismatch, &ext) {
            if !reseeded {
                reseeded = true;
                let m = e.rows.len() / 4;
                par_warm.extend(project_witness(n, m, &e.rows));
                ext_warm.extend(lift_witness(kind, n, &par.rows, par.lambda, par.mu));
                continue;
            }
            if attempt < opts.escalations {
                attempt += 1;
                starts *= 4;
                continue;
            }
            return Err(Error::OracleMismatch {
                kind: spec.label(),
                extension: ext_value,
                parametric: par.value,
            });
        }
        let mut decision = opts.decide(par.value);
        if let Some(e) = &ext {
            let expected_sign = opts.decide(expected_extension(kind, par.value));
            if opts.decide(e.value) != expected_sign {
                decision = Decision::Undecided;
            }
        }
        let method = if ext.is_some() {
            Method::ParametricChecked
        } else {
            Method::Parametric
        };
        let ext_starts = ext.as_ref().map_or(0, |e| e.starts);
        let converged = par.converged && ext.as_ref().is_none_or(|e| e.converged);
        return Ok(MembershipReport {
            margin: par.value,
            kind: spec.label(),
            witness: Witness::from_rows(n, &par.rows, par.lambda, par.mu),
            method,
            starts: par.starts + ext_starts,
            converged,
            parametric_margin: Some(par.value),
            extension_margin: ext.map(|e| e.value),
            decision,
        });
    }
}

/// Like [`membership`], but oracle failures become an `UNDECIDED` report
/// with a NaN margin instead of an error.
pub fn membership_or_undecided(
    r: &CurvatureOperator,
    spec: &ConeSpec,
    opts: &MembershipOptions,
) -> std::result::Result<MembershipReport, (MembershipReport, Error)> {
    match membership(r, spec, opts) {
        Ok(rep) => Ok(rep),
        Err(e) => {
            let margin = match &e {
                Error::OracleMismatch { parametric, .. } => *parametric,
                _ => f64::NAN,
            };
            Err((
                MembershipReport {
                    margin,
                    kind: spec.label(),
                    witness: Witness {
                        vectors: Vec::new(),
                        lambda: f64::NAN,
                        mu: f64::NAN,
                    },
                    method: Method::ParametricChecked,
                    starts: 0,
                    converged: false,
                    parametric_margin: None,
                    extension_margin: None,
                    decision: Decision::Undecided,
                },
                e,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::functional::evaluate_condition;

    #[test]
    fn sphere_isotropic_margin() {
        let rep = min_isotropic(&CurvatureOperator::sphere(4), 8, 1).unwrap();
        assert!((rep.margin - 4.0).abs() < 1e-12);
    }

    #[test]
    fn low_dimension_rejected() {
        let r = CurvatureOperator::sphere(3);
        assert!(matches!(
            membership(&r, &ConeSpec::PIC, &MembershipOptions::default()),
            Err(Error::DimensionTooSmall(3))
        ));
    }

    #[test]
    fn witness_reproduces_margin() {
        let r = CurvatureOperator::sphere(4).scaled(-1.0);
        let opts = MembershipOptions::with_seed(2).starts(8);
        for spec in [ConeSpec::PIC, ConeSpec::TILDE_C, ConeSpec::HAT_C, ConeSpec::SET_E] {
            let rep = membership(&r, &spec, &opts).unwrap();
            let f = rep.witness.frame().unwrap();
            let v = evaluate_condition(&r, &f, rep.witness.params(), &spec).unwrap();
            assert!((v - rep.margin).abs() < 1e-8, "{spec}: {v} vs {}", rep.margin);
            assert_eq!(rep.decision, Decision::NonMember);
        }
    }

    #[test]
    fn report_json_fields() {
        let rep = membership(
            &CurvatureOperator::sphere(4),
            &ConeSpec::PIC,
            &MembershipOptions::with_seed(0).starts(2),
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        for key in ["margin", "kind", "witness", "method", "starts", "converged"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["witness"]["vectors"].as_array().unwrap().len(), 4);
    }

    fn random_operator(seed: u64) -> CurvatureOperator {
        let g = crate::generate::gaussian_bianchi(&mut crate::rng::stream(seed, 0), 5).unwrap();
        CurvatureOperator::sphere(5).add_scaled(0.8, &g).unwrap()
    }

    #[test]
    fn lifted_witness_keeps_value() {
        let r = random_operator(11);
        let rows = crate::cones::stiefel::random_start(4, 5, 4, 0, StartSampler::Uniform);
        let f = FourFrame::from_rows(5, &rows).unwrap();
        for (spec, l, m) in [(ConeSpec::TILDE_C, 0.3, 1.0), (ConeSpec::SET_E, -0.6, 0.4)] {
            let v = evaluate_condition(&r, &f, FrameParams::new(l, m), &spec).unwrap();
            let x = lift_witness(spec.kind(), 5, &rows, l, m).unwrap();
            let ext = match spec.kind() {
                ConeKind::TildeC => extend_flat(&r),
                _ => extend_sphere2(&r),
            };
            let fx = FourFrame::from_rows(ext.dim(), &x).unwrap();
            let iso = evaluate_condition(&ext, &fx, FrameParams::new(1.0, 1.0), &ConeSpec::PIC).unwrap();
            assert!((iso - v).abs() < 1e-12, "{spec}: {iso} vs {v}");
        }
    }

    #[test]
    fn projection_inverts_flat_lift() {
        let rows = crate::cones::stiefel::random_start(4, 5, 9, 0, StartSampler::Uniform);
        let x = lift_witness(ConeKind::TildeC, 5, &rows, 0.45, 1.0).unwrap();
        let back = project_witness(5, 6, &x).unwrap();
        // equal up to the sign of each vector
        for (a, b) in rows.chunks(5).zip(back.chunks(5)) {
            let d: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            assert!((d.abs() - 1.0).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn projection_undoes_unitary_mixing() {
        // rotate (z, w) by a unitary before projecting
        let rows = crate::cones::stiefel::random_start(4, 5, 5, 0, StartSampler::Uniform);
        let x = lift_witness(ConeKind::TildeC, 5, &rows, 0.45, 1.0).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let m = 6;
        let mut y = vec![0.0; 4 * m];
        for i in 0..m {
            let z = Complex::new(x[i], x[m + i]);
            let w = Complex::new(x[2 * m + i], x[3 * m + i]);
            let z1 = z * c + w * Complex::new(0.0, s);
            let w1 = z * Complex::new(0.0, s) + w * c;
            y[i] = z1.re;
            y[m + i] = z1.im;
            y[2 * m + i] = w1.re;
            y[3 * m + i] = w1.im;
        }
        let r = random_operator(3);
        let ext = extend_flat(&r);
        let iso = |v: &[f64]| {
            let f = FourFrame::from_rows(m, v).unwrap();
            evaluate_condition(&ext, &f, FrameParams::new(1.0, 1.0), &ConeSpec::PIC).unwrap()
        };
        assert!((iso(&x) - iso(&y)).abs() < 1e-12);
        let back = project_witness(5, m, &y).unwrap();
        let f = FourFrame::from_rows(5, &back).unwrap();
        let v = evaluate_condition(&r, &f, FrameParams::new(0.45, 1.0), &ConeSpec::TILDE_C).unwrap();
        let w = evaluate_condition(&r, &f, FrameParams::new(-0.45, 1.0), &ConeSpec::TILDE_C).unwrap();
        assert!((v.min(w) - iso(&x)).abs() < 1e-10, "{v} {w} {}", iso(&x));
    }
}
