//! The frame functionals that define the cones, in two forms: a direct
//! evaluation by tensor contraction, and a `Lambda^2` matrix form with a
//! closed-form frame gradient used by the optimizers.

use nalgebra::DMatrix;

use crate::algebra::{inverse_l_ab, CurvatureOperator};
use crate::error::{Error, Result};
use crate::tensor::{pair_list, wedge, Tensor4};

use super::frame::{FourFrame, FrameParams};
use super::spec::{ConeKind, ConeSpec};

/// The five frame components entering every condition:
/// `R_1313, R_1414, R_2323, R_2424, R_1234`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameComponents {
    pub k13: f64,
    pub k14: f64,
    pub k23: f64,
    pub k24: f64,
    pub x1234: f64,
}

impl FrameComponents {
    pub fn of_tensor(t: &Tensor4, f: &FourFrame) -> Self {
        let e = |a: usize| f.e(a);
        Self {
            k13: t.contract(e(0), e(2), e(0), e(2)),
            k14: t.contract(e(0), e(3), e(0), e(3)),
            k23: t.contract(e(1), e(2), e(1), e(2)),
            k24: t.contract(e(1), e(3), e(1), e(3)),
            x1234: t.contract(e(0), e(1), e(2), e(3)),
        }
    }

    /// `R_1313 + l^2 R_1414 + m^2 R_2323 + l^2 m^2 R_2424 - 2 l m R_1234`.
    #[inline]
    pub fn hat(&self, lambda: f64, mu: f64) -> f64 {
        let (l2, m2) = (lambda * lambda, mu * mu);
        self.k13 + l2 * self.k14 + m2 * self.k23 + l2 * m2 * self.k24
            - 2.0 * lambda * mu * self.x1234
    }

    /// The `SET_E` functional: [`Self::hat`] plus `(1 - l^2)(1 - m^2)`.
    #[inline]
    pub fn set_e(&self, lambda: f64, mu: f64) -> f64 {
        self.hat(lambda, mu) + (1.0 - lambda * lambda) * (1.0 - mu * mu)
    }
}

fn check_frame_dim(r: &CurvatureOperator, f: &FourFrame) -> Result<()> {
    if f.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: f.dim(),
        });
    }
    Ok(())
}

/// `R(e1,e3,e1,e3) + R(e1,e4,e1,e4) + R(e2,e3,e2,e3) + R(e2,e4,e2,e4) - 2 R(e1,e2,e3,e4)`.
pub fn isotropic_value(r: &CurvatureOperator, f: &FourFrame) -> Result<f64> {
    check_frame_dim(r, f)?;
    Ok(FrameComponents::of_tensor(r.tensor(), f).hat(1.0, 1.0))
}

/// The defining functional of `spec` at `(frame, lambda, mu)`.
pub fn evaluate_condition(
    r: &CurvatureOperator,
    f: &FourFrame,
    p: FrameParams,
    spec: &ConeSpec,
) -> Result<f64> {
    check_frame_dim(r, f)?;
    let (l, m) = (p.lambda(), p.mu());
    let value = match spec.kind() {
        ConeKind::Pic => FrameComponents::of_tensor(r.tensor(), f).hat(1.0, 1.0),
        ConeKind::TildeC => FrameComponents::of_tensor(r.tensor(), f).hat(l, 1.0),
        ConeKind::HatC => FrameComponents::of_tensor(r.tensor(), f).hat(l, m),
        ConeKind::SetE => FrameComponents::of_tensor(r.tensor(), f).set_e(l, m),
        ConeKind::LabE => {
            let params = spec.params().expect("LAB_E carries parameters");
            let pulled = inverse_l_ab(r, params)?;
            FrameComponents::of_tensor(pulled.tensor(), f).set_e(l, m)
        }
    };
    Ok(value)
}

/// How the `(lambda, mu)` pair is handled inside a frame objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamMode {
    /// Both parameters fixed.
    Fixed(f64, f64),
    /// `mu = 1`, `lambda` minimized over `[-1, 1]`.
    Lambda,
    /// Both minimized over the box `[-1, 1]^2`.
    Box,
}

const LAMBDA_GRID: usize = 24;

/// Exact minimizer of `alpha + beta t^2 - 2 gamma t` over `t in [-1, 1]`.
#[inline]
pub fn min_quadratic(alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    let at = |t: f64| alpha + beta * t * t - 2.0 * gamma * t;
    let mut best = (-1.0, at(-1.0));
    let right = at(1.0);
    if right < best.1 {
        best = (1.0, right);
    }
    if beta > 0.0 {
        let t = gamma / beta;
        if t.abs() < 1.0 {
            let v = at(t);
            if v < best.1 {
                best = (t, v);
            }
        }
    }
    best
}

impl FrameComponents {
    /// `min over mu` of the functional at fixed `lambda`.
    #[inline]
    fn min_over_mu(&self, lambda: f64, constant: f64) -> (f64, f64) {
        let l2 = lambda * lambda;
        let alpha = self.k13 + l2 * self.k14 + constant * (1.0 - l2);
        let beta = self.k23 + l2 * self.k24 - constant * (1.0 - l2);
        let gamma = lambda * self.x1234;
        min_quadratic(alpha, beta, gamma)
    }

    #[inline]
    fn min_over_lambda(&self, mu: f64, constant: f64) -> (f64, f64) {
        let m2 = mu * mu;
        let alpha = self.k13 + m2 * self.k23 + constant * (1.0 - m2);
        let beta = self.k14 + m2 * self.k24 - constant * (1.0 - m2);
        let gamma = mu * self.x1234;
        min_quadratic(alpha, beta, gamma)
    }

    /// Minimizes over `(lambda, mu)` according to `mode`. `constant` is the weight of
    /// `(1 - l^2)(1 - m^2)`: 1 for `SET_E`, 0 otherwise. Returns `(value, lambda, mu)`.
    pub fn minimize_params(&self, mode: ParamMode, constant: f64) -> (f64, f64, f64) {
        let full = |l: f64, m: f64| self.hat(l, m) + constant * (1.0 - l * l) * (1.0 - m * m);
        match mode {
            ParamMode::Fixed(l, m) => (full(l, m), l, m),
            ParamMode::Lambda => {
                let (l, _) = self.min_over_lambda(1.0, constant);
                (full(l, 1.0), l, 1.0)
            }
            ParamMode::Box => {
                // f(l, m) = f(-l, -m), so lambda >= 0 covers the box.
                let h = |l: f64| self.min_over_mu(l, constant).1;
                let mut best_i = 0;
                let mut best_v = f64::INFINITY;
                for i in 0..=LAMBDA_GRID {
                    let v = h(i as f64 / LAMBDA_GRID as f64);
                    if v < best_v {
                        best_v = v;
                        best_i = i;
                    }
                }
                let step = 1.0 / LAMBDA_GRID as f64;
                let lo = (best_i as f64 - 1.0).max(0.0) * step;
                let hi = (best_i as f64 + 1.0).min(LAMBDA_GRID as f64) * step;
                let mut l = golden_min(h, lo, hi, 1e-11);
                if h(best_i as f64 * step) < h(l) {
                    l = best_i as f64 * step;
                }
                let (mut m, _) = self.min_over_mu(l, constant);
                // polish by exact coordinate descent
                for _ in 0..8 {
                    let (l_new, _) = self.min_over_lambda(m, constant);
                    let (m_new, _) = self.min_over_mu(l_new, constant);
                    let moved = (l_new - l).abs() + (m_new - m).abs();
                    if full(l_new, m_new) <= full(l, m) {
                        l = l_new;
                        m = m_new;
                    }
                    if moved < 1e-15 {
                        break;
                    }
                }
                (full(l, m), l, m)
            }
        }
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// The quadratic form of an operator on `Lambda^2 R^m`, stored densely.
#[derive(Debug, Clone)]
pub struct Lambda2Form {
    dim: usize,
    np: usize,
    m: Vec<f64>,
    scale: f64,
}

impl Lambda2Form {
    pub fn new(r: &CurvatureOperator) -> Self {
        Self::from_matrix(r.dim(), &r.lambda2_matrix())
    }

    pub fn from_matrix(dim: usize, m: &DMatrix<f64>) -> Self {
        let np = pair_list(dim).len();
        assert_eq!(m.nrows(), np);
        let mut data = Vec::with_capacity(np * np);
        for a in 0..np {
            for b in 0..np {
                data.push(m[(a, b)]);
            }
        }
        let scale = data.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        Self {
            dim,
            np,
            m: data,
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> usize {
        self.np
    }

    /// Largest absolute matrix entry.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let np = self.np;
        for (a, o) in out.iter_mut().enumerate().take(np) {
            let row = &self.m[a * np..(a + 1) * np];
            *o = row.iter().zip(w).map(|(x, y)| x * y).sum();
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Accumulates `coef * d/d(a,b) [g . (a ^ b)]` into `ga`, `gb`.
#[inline]
fn wedge_grad(g: &[f64], a: &[f64], b: &[f64], coef: f64, ga: &mut [f64], gb: &mut [f64]) {
    let n = a.len();
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            let c = coef * g[p];
            p += 1;
            if c == 0.0 {
                continue;
            }
            ga[i] += c * b[j];
            ga[j] -= c * b[i];
            gb[j] += c * a[i];
            gb[i] -= c * a[j];
        }
    }
}

/// Result of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eval {
    pub value: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// A smooth function of a `k x m` row-orthonormal frame.
pub trait FrameObjective: Sync {
    /// Number of frame vectors `k`.
    fn rows(&self) -> usize;
    /// Ambient dimension `m`.
    fn dim(&self) -> usize;
    /// Value at `x` (row-major `k x m`); fills the Euclidean gradient if asked.
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Eval;
    /// Typical magnitude of the objective, used to scale stopping tests.
    fn scale(&self) -> f64;
}

/// The four-frame condition functionals, with `(lambda, mu)` minimized out.
pub struct ConditionObjective {
    form: Lambda2Form,
    mode: ParamMode,
    constant: f64,
}

impl ConditionObjective {
    pub fn new(form: Lambda2Form, mode: ParamMode, constant: f64) -> Self {
        Self {
            form,
            mode,
            constant,
        }
    }

    /// Plain isotropic curvature of `form`.
    pub fn isotropic(form: Lambda2Form) -> Self {
        Self::new(form, ParamMode::Fixed(1.0, 1.0), 0.0)
    }

    pub fn form(&self) -> &Lambda2Form {
        &self.form
    }
}

impl FrameObjective for ConditionObjective {
    fn rows(&self) -> usize {
        4
    }

    fn dim(&self) -> usize {
        self.form.dim
    }

    fn scale(&self) -> f64 {
        self.form.scale.max(self.constant).max(1e-300)
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Eval {
        let m = self.form.dim;
        let np = self.form.np;
        let e = |a: usize| &x[a * m..(a + 1) * m];
        let mut buf = [[0.0f64; 64]; 12];
        debug_assert!(np <= 64, "Lambda2Form supports m <= 11");
        let [w12, w13, w14, w23, w24, w34, m12, m13, m14, m23, m24, m34] = &mut buf;
        let (w12, w13, w14) = (&mut w12[..np], &mut w13[..np], &mut w14[..np]);
        let (w23, w24, w34) = (&mut w23[..np], &mut w24[..np], &mut w34[..np]);
        wedge(e(0), e(1), w12);
        wedge(e(0), e(2), w13);
        wedge(e(0), e(3), w14);
        wedge(e(1), e(2), w23);
        wedge(e(1), e(3), w24);
        wedge(e(2), e(3), w34);
        let (m13, m14, m23) = (&mut m13[..np], &mut m14[..np], &mut m23[..np]);
        let (m24, m34) = (&mut m24[..np], &mut m34[..np]);
        self.form.apply(w13, m13);
        self.form.apply(w14, m14);
        self.form.apply(w23, m23);
        self.form.apply(w24, m24);
        self.form.apply(w34, m34);
        let comps = FrameComponents {
            k13: dot(w13, m13),
            k14: dot(w14, m14),
            k23: dot(w23, m23),
            k24: dot(w24, m24),
            x1234: dot(w12, m34),
        };
        let (value, lambda, mu) = comps.minimize_params(self.mode, self.constant);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            let m12 = &mut m12[..np];
            self.form.apply(w12, m12);
            let (l2, mu2) = (lambda * lambda, mu * mu);
            let (g0, rest) = g.split_at_mut(m);
            let (g1, rest) = rest.split_at_mut(m);
            let (g2, g3) = rest.split_at_mut(m);
            wedge_grad(m13, e(0), e(2), 2.0, g0, g2);
            wedge_grad(m14, e(0), e(3), 2.0 * l2, g0, g3);
            wedge_grad(m23, e(1), e(2), 2.0 * mu2, g1, g2);
            wedge_grad(m24, e(1), e(3), 2.0 * l2 * mu2, g1, g3);
            let cx = -2.0 * lambda * mu;
            wedge_grad(m34, e(0), e(1), cx, g0, g1);
            wedge_grad(m12, e(2), e(3), cx, g2, g3);
        }
        Eval { value, lambda, mu }
    }
}

/// `sign * K(u, v)` over orthonormal 2-frames; `sign = -1` turns maximization
/// of sectional curvature into minimization.
pub struct SectionalObjective {
    form: Lambda2Form,
    sign: f64,
}

impl SectionalObjective {
    pub fn new(form: Lambda2Form, sign: f64) -> Self {
        Self { form, sign }
    }
}

impl FrameObjective for SectionalObjective {
    fn rows(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.form.dim
    }

    fn scale(&self) -> f64 {
        self.form.scale.max(1e-300)
    }

    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> Eval {
        let m = self.form.dim;
        let np = self.form.np;
        let mut w = [0.0f64; 64];
        let mut mw = [0.0f64; 64];
        let (w, mw) = (&mut w[..np], &mut mw[..np]);
        wedge(&x[..m], &x[m..2 * m], w);
        self.form.apply(w, mw);
        let value = self.sign * dot(w, mw);
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            let (g0, g1) = g.split_at_mut(m);
            wedge_grad(mw, &x[..m], &x[m..2 * m], 2.0 * self.sign, g0, g1);
        }
        Eval {
            value,
            lambda: f64::NAN,
            mu: f64::NAN,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_minimizer() {
        // 1 + 2t^2 - 2t: vertex at t = 0.5
        let (t, v) = min_quadratic(1.0, 2.0, 1.0);
        assert!((t - 0.5).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        // concave: endpoint
        let (t, v) = min_quadratic(0.0, -1.0, 0.1);
        assert_eq!((t, v), (1.0, -1.0 - 0.2));
    }

    #[test]
    fn box_minimization_matches_brute_force() {
        let comps = FrameComponents {
            k13: 0.3,
            k14: -0.7,
            k23: 0.4,
            k24: 1.1,
            x1234: 0.9,
        };
        for constant in [0.0, 1.0] {
            let (v, l, m) = comps.minimize_params(ParamMode::Box, constant);
            let full = |l: f64, m: f64| comps.hat(l, m) + constant * (1.0 - l * l) * (1.0 - m * m);
            assert!((full(l, m) - v).abs() < 1e-15);
            let mut brute = f64::INFINITY;
            let k = 800;
            for i in 0..=k {
                for j in 0..=k {
                    let l = -1.0 + 2.0 * i as f64 / k as f64;
                    let m = -1.0 + 2.0 * j as f64 / k as f64;
                    brute = brute.min(full(l, m));
                }
            }
            assert!(v <= brute + 1e-12, "constant {constant}: {v} vs grid {brute}");
            assert!(v > brute - 1e-4);
        }
    }
}
