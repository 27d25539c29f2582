//! Seeded operator generators and boundary-adjacent sampling.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{kulkarni_nomizu, project_bianchi, CurvatureOperator, SymmetricBilinear};
use crate::cones::{membership, two_positive_margin, ConeSpec, MembershipOptions};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, gaussian, stream};
use crate::tensor::{pair_list, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Bianchi projection of a tensor with Gaussian `Lambda^2` matrix.
    GaussianBianchi,
    /// A Gaussian operator shifted by multiples of `I / 4` until `lambda_1 + lambda_2 > 0`.
    TwoPositive,
    /// `I + sigma * G` with `G` Gaussian.
    SpherePerturbed { sigma: f64 },
    /// `(1/2) P o P` for the projection onto the first `k` coordinates.
    ProductSphere { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, count: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n = {} must be at least 2", self.n)));
        }
        if self.count < 1 {
            return Err(Error::Config("count must be at least 1".into()));
        }
        match self.kind {
            GeneratorKind::SpherePerturbed { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::Config(format!("sigma = {sigma} must be finite and >= 0")))
            }
            GeneratorKind::ProductSphere { k } if k > self.n => {
                Err(Error::Config(format!("k = {k} exceeds n = {}", self.n)))
            }
            _ => Ok(()),
        }
    }
}

/// Operator `index` of the family; independent of the other indices.
pub fn generate_one(spec: &GeneratorSpec, index: u64) -> Result<CurvatureOperator> {
    spec.validate()?;
    let mut rng = stream(spec.seed, index);
    let n = spec.n;
    match spec.kind {
        GeneratorKind::GaussianBianchi => gaussian_bianchi(&mut rng, n),
        GeneratorKind::TwoPositive => {
            let g = gaussian_bianchi(&mut rng, n)?;
            let id = CurvatureOperator::sphere(n);
            let mut c = 0.0;
            loop {
                let r = g.add_scaled(c, &id)?;
                if two_positive_margin(&r) > 0.0 {
                    return Ok(r);
                }
                c += 0.25;
            }
        }
        GeneratorKind::SpherePerturbed { sigma } => {
            let g = gaussian_bianchi(&mut rng, n)?;
            CurvatureOperator::sphere(n).add_scaled(sigma, &g)
        }
        GeneratorKind::ProductSphere { k } => Ok(product_sphere(n, k)),
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Vec<CurvatureOperator>> {
    (0..spec.count as u64).map(|i| generate_one(spec, i)).collect()
}

/// Bianchi projection of a pair-symmetric tensor whose `Lambda^2` matrix is
/// `(A + A^T) / 2`, `A` with independent standard normal entries.
pub fn gaussian_bianchi<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CurvatureOperator> {
    let np = pair_list(n).len();
    let a = DMatrix::from_fn(np, np, |_, _| gaussian(rng));
    let sym = (&a + a.transpose()) * 0.5;
    project_bianchi(&Tensor4::from_lambda2(n, &sym))
}

/// `(1/2) P_k o P_k`: curvature 1 on planes inside the first `k` coordinates, 0 elsewhere.
pub fn product_sphere(n: usize, k: usize) -> CurvatureOperator {
    let p = SymmetricBilinear::coordinate_projection(n, k);
    kulkarni_nomizu(&p, &p)
        .expect("same dimension")
        .scaled(0.5)
}

/// Finds `t` in `[0, 1]` with `margin((1 - t) inside + t outside)` in `[lo, hi]`.
///
/// `margin(inside)` must be `>= lo` and `margin(outside)` must be `< lo`; the
/// margin is assumed concave along the segment. Returns the operator and its margin.
pub fn bisect_segment(
    inside: &CurvatureOperator,
    outside: &CurvatureOperator,
    lo: f64,
    hi: f64,
    mut margin: impl FnMut(&CurvatureOperator) -> Result<f64>,
) -> Result<(CurvatureOperator, f64)> {
    let at = |t: f64| inside.scaled(1.0 - t).add_scaled(t, outside);
    let m0 = margin(inside)?;
    if m0 < lo {
        return Err(Error::PreconditionViolation(format!(
            "segment start has margin {m0:e} < {lo:e}"
        )));
    }
    if m0 <= hi {
        return Ok((inside.clone(), m0));
    }
    let m1 = margin(outside)?;
    if m1 >= lo {
        return Err(Error::PreconditionViolation(format!(
            "segment end has margin {m1:e} >= {lo:e}"
        )));
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let t = 0.5 * (a + b);
        let r = at(t)?;
        let m = margin(&r)?;
        if m < lo {
            b = t;
        } else if m > hi {
            a = t;
        } else {
            return Ok((r, m));
        }
        if b - a < 1e-16 {
            break;
        }
    }
    Err(Error::NonConvergence { starts: 0 })
}

/// A seeded operator of `spec` whose margin lies in `[lo, hi]`.
///
/// A random member `I + G/2` and a random non-member `2 G'` are joined by a
/// segment, which is bisected on the parametric margin. Draws that do not
/// give a member/non-member pair are skipped, deterministically.
pub fn boundary_adjacent(
    spec: &ConeSpec,
    n: usize,
    seed: u64,
    index: u64,
    lo: f64,
    hi: f64,
) -> Result<(CurvatureOperator, f64)> {
    let opts = MembershipOptions::with_seed(derive_seed(seed, index))
        .starts(BISECTION_STARTS)
        .cross_check(false);
    let margin = |r: &CurvatureOperator| Ok(membership(r, spec, &opts)?.margin);
    for attempt in 0..64u64 {
        let mut rng = stream(derive_seed(seed, index), attempt);
        let inside = CurvatureOperator::sphere(n).add_scaled(0.5, &gaussian_bianchi(&mut rng, n)?)?;
        let outside = gaussian_bianchi(&mut rng, n)?.scaled(2.0);
        if margin(&inside)? < hi || margin(&outside)? >= lo {
            continue;
        }
        return bisect_segment(&inside, &outside, lo, hi, margin);
    }
    Err(Error::NonConvergence { starts: 64 })
}

/// Multistarts per margin evaluation during bisection.
pub const BISECTION_STARTS: usize = 32;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_sphere_family() {
        let spec = GeneratorSpec::new(GeneratorKind::SpherePerturbed { sigma: 0.0 }, 5, 3, 9);
        for r in generate(&spec).unwrap() {
            assert_eq!(r, CurvatureOperator::sphere(5));
        }
    }

    #[test]
    fn full_product_sphere_is_sphere() {
        for n in 2..7 {
            let d = product_sphere(n, n).max_abs_diff(&CurvatureOperator::sphere(n));
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn generators_are_deterministic_and_valid() {
        for kind in [
            GeneratorKind::GaussianBianchi,
            GeneratorKind::TwoPositive,
            GeneratorKind::SpherePerturbed { sigma: 0.3 },
        ] {
            let spec = GeneratorSpec::new(kind, 4, 4, 11);
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            assert_eq!(a, b);
            assert_ne!(a[0], a[1]);
            for r in &a {
                assert!(CurvatureOperator::new(r.tensor().clone()).is_ok());
            }
        }
    }

    #[test]
    fn two_positive_outputs_are_two_positive() {
        let spec = GeneratorSpec::new(GeneratorKind::TwoPositive, 5, 10, 3);
        for r in generate(&spec).unwrap() {
            assert!(two_positive_margin(&r) > 0.0);
        }
    }

    #[test]
    fn spec_json_shape() {
        let s: GeneratorSpec =
            serde_json::from_str(r#"{"kind":"product_sphere","k":3,"n":4,"count":2}"#).unwrap();
        assert_eq!(s.kind, GeneratorKind::ProductSphere { k: 3 });
        assert!(serde_json::from_str::<GeneratorSpec>(r#"{"kind":"bogus","n":4}"#).is_err());
    }

    #[test]
    fn bisection_on_scalar_margin() {
        // margin = scal / 12 on the segment from I to -I (n = 4)
        let i = CurvatureOperator::sphere(4);
        let (r, m) = bisect_segment(&i, &i.scaled(-1.0), 1e-4, 1e-3, |r| Ok(r.scalar() / 12.0))
            .unwrap();
        assert!((1e-4..=1e-3).contains(&m));
        assert!((r.scalar() / 12.0 - m).abs() < 1e-15);
    }
}
