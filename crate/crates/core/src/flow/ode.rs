//! The reaction ODE `dR/dt = Q(R) [+ eps I] [+ D_{a,b}(R)]` and its explicit steps.

use crate::algebra::{d_ab, q, CurvatureOperator};
use crate::cones::{
    evaluate_condition, membership, ConeSpec, FourFrame, FrameComponents, FrameParams,
    MembershipOptions,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

use super::config::Variant;

/// Accepted symmetry drift after a step, relative to `max(1, max|R|)`.
pub const DRIFT_TOL: f64 = 1e-9;

/// The vector field of `variant` at `r`.
pub fn rhs(r: &CurvatureOperator, variant: &Variant) -> Result<CurvatureOperator> {
    let base = q(r);
    match variant {
        Variant::Plain => Ok(base),
        Variant::Epsilon { epsilon } => {
            base.add_scaled(*epsilon, &CurvatureOperator::sphere(r.dim()))
        }
        Variant::BohmWilking { params } => base.add_scaled(1.0, &d_ab(r, *params)?),
    }
}

fn field(t: &Tensor4, variant: &Variant) -> Result<Tensor4> {
    let r = CurvatureOperator::from_tensor_unchecked(t.clone());
    Ok(rhs(&r, variant)?.into_tensor())
}

fn combine(y: &Tensor4, h: f64, terms: &[(f64, &Tensor4)]) -> Tensor4 {
    let mut out = y.clone();
    for (c, k) in terms {
        if *c != 0.0 {
            out = out.add_scaled(h * c, k);
        }
    }
    out
}

fn finish(t: &Tensor4, time: f64) -> Result<CurvatureOperator> {
    CurvatureOperator::repair(t, DRIFT_TOL).map_err(|e| match e {
        Error::StepRejected { residual, .. } => Error::StepRejected { t: time, residual },
        other => other,
    })
}

/// One classical Runge–Kutta step of size `h`, re-projected onto the
/// curvature symmetries.
pub fn step(r: &CurvatureOperator, h: f64, variant: &Variant) -> Result<CurvatureOperator> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step size {h} must be positive")));
    }
    let y = r.tensor();
    let k1 = field(y, variant)?;
    let k2 = field(&combine(y, h, &[(0.5, &k1)]), variant)?;
    let k3 = field(&combine(y, h, &[(0.5, &k2)]), variant)?;
    let k4 = field(&combine(y, h, &[(1.0, &k3)]), variant)?;
    let out = combine(
        y,
        h,
        &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
    );
    finish(&out, f64::NAN)
}

// Dormand–Prince 5(4) tableau; the system is autonomous, so stage times are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus the embedded fourth-order ones
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// A Dormand–Prince step: the fifth-order solution and the scaled error norm
/// (`<= 1` means acceptable).
pub(crate) fn dopri_step(
    r: &CurvatureOperator,
    h: f64,
    variant: &Variant,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(Tensor4, f64)> {
    let y = r.tensor();
    let k1 = field(y, variant)?;
    let k2 = field(&combine(y, h, &[(A21, &k1)]), variant)?;
    let k3 = field(&combine(y, h, &[(A31, &k1), (A32, &k2)]), variant)?;
    let k4 = field(&combine(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), variant)?;
    let k5 = field(
        &combine(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        variant,
    )?;
    let k6 = field(
        &combine(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        variant,
    )?;
    let y5 = combine(
        y,
        h,
        &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = field(&y5, variant)?;
    let zero = Tensor4::zeros(y.dim());
    let err = combine(
        &zero,
        h,
        &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
    );
    let mut norm = 0.0f64;
    for ((e, a), b) in err.as_slice().iter().zip(y.as_slice()).zip(y5.as_slice()) {
        let sc = abs_tol + rel_tol * a.abs().max(b.abs());
        norm = norm.max(e.abs() / sc);
    }
    if !norm.is_finite() {
        norm = f64::INFINITY;
    }
    Ok((y5, norm))
}

pub(crate) fn accept(y: &Tensor4, time: f64) -> Result<CurvatureOperator> {
    finish(y, time)
}

/// The `HAT_C` functional of the vector field at `(f, lambda, mu)`: the rate of
/// change of the `SET_E` functional at a fixed frame.
pub fn boundary_derivative(
    r: &CurvatureOperator,
    f: &FourFrame,
    p: FrameParams,
    variant: &Variant,
) -> Result<f64> {
    if f.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: r.dim(),
            found: f.dim(),
        });
    }
    let v = rhs(r, variant)?;
    Ok(FrameComponents::of_tensor(v.tensor(), f).hat(p.lambda(), p.mu()))
}

/// Largest `SET_E` functional value accepted at a boundary witness.
pub const BOUNDARY_WITNESS_TOL: f64 = 1e-6;

/// [`boundary_derivative`] of the plain flow, after checking that `R` lies in
/// `SET_E` and that `(f, p)` nearly attains the boundary value 0.
pub fn boundary_derivative_check(
    r: &CurvatureOperator,
    f: &FourFrame,
    p: FrameParams,
    opts: &MembershipOptions,
) -> Result<f64> {
    let value = evaluate_condition(r, f, p, &ConeSpec::SET_E)?;
    if value > BOUNDARY_WITNESS_TOL {
        return Err(Error::PreconditionViolation(format!(
            "functional {value:e} at the witness exceeds {BOUNDARY_WITNESS_TOL:e}"
        )));
    }
    let rep = membership(r, &ConeSpec::SET_E, opts)?;
    if rep.margin < opts.threshold {
        return Err(Error::PreconditionViolation(format!(
            "operator is outside SET_E: margin {:e}",
            rep.margin
        )));
    }
    boundary_derivative(r, f, p, &Variant::Plain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_fixed() {
        let z = CurvatureOperator::zero(4);
        assert_eq!(step(&z, 0.1, &Variant::Plain).unwrap(), z);
    }

    #[test]
    fn sphere_step_matches_closed_form() {
        let n = 4;
        let h = 1e-3;
        let r = step(&CurvatureOperator::sphere(n), h, &Variant::Plain).unwrap();
        let exact = 1.0 / (1.0 - 2.0 * (n as f64 - 1.0) * h);
        let d = r.max_abs_diff(&CurvatureOperator::sphere(n).scaled(exact));
        assert!(d / exact <= 1e-10, "{d}");
    }

    #[test]
    fn epsilon_forcing_from_zero() {
        let (eps, h) = (0.3, 1e-3);
        let r = step(&CurvatureOperator::zero(4), h, &Variant::Epsilon { epsilon: eps }).unwrap();
        let target = CurvatureOperator::sphere(4).scaled(eps * h);
        assert!(r.max_abs_diff(&target) < 1e-5 * h);
    }

    #[test]
    fn dopri_error_estimate_is_small_for_small_steps() {
        let r = CurvatureOperator::sphere(4);
        let (_, e1) = dopri_step(&r, 1e-2, &Variant::Plain, 1e-10, 1e-12).unwrap();
        let (_, e2) = dopri_step(&r, 5e-3, &Variant::Plain, 1e-10, 1e-12).unwrap();
        // fifth-order local error: halving the step shrinks it about 32x
        assert!(e2 < e1 / 20.0, "{e1} {e2}");
    }

    #[test]
    fn zero_boundary_derivative() {
        let z = CurvatureOperator::zero(4);
        let f = FourFrame::standard(4).unwrap();
        let opts = MembershipOptions::with_seed(0).starts(4);
        let v = boundary_derivative_check(&z, &f, FrameParams::ones(), &opts).unwrap();
        assert_eq!(v, 0.0);
    }
}
