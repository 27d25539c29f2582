use nalgebra::SymmetricEigen;

use crate::algebra::CurvatureOperator;
use crate::cones::stiefel::{multistart, LocalSettings, StartSampler};
use crate::cones::{Lambda2Form, SectionalObjective};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Minimum and maximum sectional curvature over 2-planes.
pub fn sectional_range(r: &CurvatureOperator, starts: usize, seed: u64) -> Result<(f64, f64)> {
    let n = r.dim();
    if n == 2 {
        let k = r.get(0, 1, 0, 1);
        return Ok((k, k));
    }
    if n == 3 {
        // every two-form is decomposable
        let ev = SymmetricEigen::new(r.lambda2_matrix()).eigenvalues;
        return Ok((ev.min(), ev.max()));
    }
    let settings = LocalSettings::default();
    let mut out = [0.0; 2];
    for (slot, sign) in [(0usize, 1.0f64), (1, -1.0)] {
        let obj = SectionalObjective::new(Lambda2Form::new(r), sign);
        let res = multistart(
            &obj,
            &[],
            starts.max(1),
            derive_seed(seed, slot as u64),
            StartSampler::Uniform,
            &settings,
        );
        if !res.any_converged {
            return Err(Error::NonConvergence { starts: res.starts });
        }
        out[slot] = sign * res.best.eval.value;
    }
    Ok((out[0], out[1]))
}

/// `min K / max K` over 2-planes.
pub fn pinching_ratio(r: &CurvatureOperator, starts: usize, seed: u64) -> Result<f64> {
    let (lo, hi) = sectional_range(r, starts, seed)?;
    if !(hi > 0.0) {
        return Err(Error::Undefined(format!(
            "maximum sectional curvature {hi:e} is not positive"
        )));
    }
    Ok(lo / hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::product_sphere;

    #[test]
    fn sphere_is_fully_pinched() {
        for n in 3..6 {
            let p = pinching_ratio(&CurvatureOperator::sphere(n).scaled(2.5), 8, 0).unwrap();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cylinder_has_zero_pinching() {
        let p = pinching_ratio(&product_sphere(4, 3), 16, 1).unwrap();
        assert!(p.abs() < 1e-10, "{p}");
    }

    #[test]
    fn nonpositive_curvature_undefined() {
        assert!(matches!(
            pinching_ratio(&CurvatureOperator::zero(4), 4, 0),
            Err(Error::Undefined(_))
        ));
    }
}
