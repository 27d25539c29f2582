//! Named property suites with measured residuals.

use std::fmt;

use curvlab_core::algebra::{
    d_ab, extend_sphere2, q, sharp, square, CurvatureOperator, TransformParams,
};
use curvlab_core::cones::{membership, ConeSpec, MembershipOptions, MembershipReport};
use curvlab_core::flow::{
    boundary_derivative, boundary_derivative_check, integrate, FlowConfig, Scheme, StopReason,
    StopRule, Variant,
};
use curvlab_core::generate::{boundary_adjacent, gaussian_bianchi, generate, GeneratorKind, GeneratorSpec};
use curvlab_core::rng::{derive_seed, random_orthogonal, stream};
use curvlab_core::tensor::Tensor4;
use curvlab_core::Error;
use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, ErrorKind};

pub const SUITES: [&str; 5] = ["algebra", "equivalence", "inclusions", "invariance", "integrator"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub relation: Relation,
    pub bound: f64,
    pub detail: String,
}

impl PropertyResult {
    fn new(suite: &'static str, name: &'static str, measured: f64, relation: Relation, bound: f64, detail: String) -> Self {
        let passed = match relation {
            Relation::AtMost => measured <= bound,
            Relation::AtLeast => measured >= bound,
        };
        Self {
            suite,
            name,
            passed,
            measured,
            relation,
            bound,
            detail,
        }
    }
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(
            f,
            "{} {}/{} measured={:.3e} {} bound={:.3e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            rel,
            self.bound,
            self.detail
        )
    }
}

pub fn run_suite(name: &str, cfg: &ExperimentConfig) -> CliResult<Vec<PropertyResult>> {
    match name {
        "algebra" => Ok(algebra(cfg)),
        "equivalence" => Ok(equivalence(cfg)),
        "inclusions" => Ok(inclusions(cfg)),
        "invariance" => invariance(cfg),
        "integrator" => integrator(cfg),
        _ => Err(CliError::new(
            ErrorKind::UnknownSuite,
            format!("unknown suite '{name}'; available: {}", SUITES.join(", ")),
        )),
    }
}

fn samples(cfg: &ExperimentConfig, default: usize) -> usize {
    cfg.samples.unwrap_or(default)
}

fn gaussian(seed: u64, index: u64, n: usize) -> CurvatureOperator {
    gaussian_bianchi(&mut stream(seed, index), n).expect("projection of a finite tensor")
}

fn perturbed_sphere(seed: u64, index: u64, n: usize, sigma: f64) -> CurvatureOperator {
    CurvatureOperator::sphere(n)
        .add_scaled(sigma, &gaussian(seed, index, n))
        .expect("same dimension")
}

/// `Q(R) = R^2 + R#` written out as index sums.
pub fn brute_force_q(r: &CurvatureOperator) -> Tensor4 {
    let n = r.dim();
    Tensor4::from_fn(n, |i, j, k, l| {
        let mut s = 0.0;
        for p in 0..n {
            for qq in 0..n {
                s += r.get(i, j, p, qq) * r.get(k, l, p, qq);
                s += 2.0 * (r.get(i, p, k, qq) * r.get(j, p, l, qq) - r.get(i, p, l, qq) * r.get(j, p, k, qq));
            }
        }
        s
    })
}

fn algebra(cfg: &ExperimentConfig) -> Vec<PropertyResult> {
    const S: &str = "algebra";
    let mut out = Vec::new();

    let sphere_err = (3..=8)
        .map(|n| {
            let i = CurvatureOperator::sphere(n);
            let expected = i.scaled(2.0 * (n as f64 - 1.0));
            brute_force_q(&i).max_abs_diff(expected.tensor())
        })
        .fold(0.0, f64::max);
    out.push(PropertyResult::new(S, "q_of_sphere", sphere_err, Relation::AtMost, 1e-12, "q(I) = 2(n-1) I by index sums, n = 3..8".into()));

    let count = samples(cfg, 100);
    let seed = derive_seed(cfg.seed, 1);
    let rows: Vec<(f64, bool)> = (0..count as u64)
        .into_par_iter()
        .map(|s| {
            let n = [4, 5, 6][(s % 3) as usize];
            let r = gaussian(seed, s, n);
            let norm2 = r.norm().powi(2);
            let qb = q(&r).tensor().bianchi_residual() / norm2;
            let parts = square(&r).bianchi_residual() >= 1e-3 * norm2 && sharp(&r).bianchi_residual() >= 1e-3 * norm2;
            (qb, parts)
        })
        .collect();
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    out.push(PropertyResult::new(S, "q_bianchi", worst, Relation::AtMost, 1e-9, format!("relative to |R|^2 over {count} samples, n = 4..6")));
    let frac = rows.iter().filter(|r| r.1).count() as f64 / count.max(1) as f64;
    out.push(PropertyResult::new(S, "square_and_sharp_not_bianchi", frac, Relation::AtLeast, 0.95, "fraction with both cyclic sums >= 1e-3 |R|^2".into()));

    let brute = (0..10u64)
        .map(|s| {
            let r = gaussian(seed, 1000 + s, 4 + (s % 2) as usize);
            brute_force_q(&r).max_abs_diff(q(&r).tensor()) / r.norm().powi(2)
        })
        .fold(0.0, f64::max);
    out.push(PropertyResult::new(S, "q_matches_index_sums", brute, Relation::AtMost, 1e-12, "relative, 10 samples".into()));

    let seed = derive_seed(cfg.seed, 2);
    let ext = (0..count as u64)
        .into_par_iter()
        .map(|s| {
            let n = 4 + (s % 2) as usize;
            let r = gaussian(seed, s, n);
            let restricted = sharp(&extend_sphere2(&r)).restrict(n);
            restricted.max_abs_diff(&sharp(&r)) / r.norm().powi(2)
        })
        .reduce(|| 0.0, f64::max);
    out.push(PropertyResult::new(S, "sphere_extension_sharp", ext, Relation::AtMost, 1e-9, format!("relative to |R|^2 over {count} samples, n = 4, 5")));

    let mut coef = 0.0f64;
    for n in 4..=8 {
        for k in 0..=20 {
            let b = TransformParams::max_b(n) * k as f64 / 20.0;
            if let Ok(p) = TransformParams::admissible(n, b) {
                coef = coef.max(p.ric0_sq_coefficient(n).abs());
            }
        }
    }
    out.push(PropertyResult::new(S, "admissible_ric0_coefficient", coef, Relation::AtMost, 0.0, "exact zero for n = 4..8, 21 values of b".into()));
    out
}

/// Margins of both oracles, also when they disagree beyond the band.
fn both_margins(r: &CurvatureOperator, spec: &ConeSpec, opts: &MembershipOptions) -> Result<(f64, f64), Error> {
    match membership(r, spec, opts) {
        Ok(rep) => Ok((
            rep.parametric_margin.unwrap_or(rep.margin),
            rep.extension_margin.unwrap_or(f64::NAN),
        )),
        Err(Error::OracleMismatch { extension, parametric, .. }) => Ok((parametric, extension)),
        Err(e) => Err(e),
    }
}

fn equivalence(cfg: &ExperimentConfig) -> Vec<PropertyResult> {
    const S: &str = "equivalence";
    let count = samples(cfg, 200);
    let seed = derive_seed(cfg.seed, 3);
    let sigmas = [0.3, 0.6, 1.0, 1.5];
    let specs = [ConeSpec::TILDE_C, ConeSpec::SET_E];
    let opts = |i: u64| MembershipOptions {
        cross_check: true,
        ..cfg.membership_options(derive_seed(seed, i))
    };
    let rows: Vec<Vec<Result<(f64, f64), Error>>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let r = perturbed_sphere(seed, i, 4, sigmas[i as usize % sigmas.len()]);
            specs.iter().map(|s| both_margins(&r, s, &opts(i))).collect()
        })
        .collect();
    let mut out = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let mut worst = 0.0f64;
        let mut sign = 0usize;
        let mut errors = 0usize;
        let mut members = 0usize;
        for row in &rows {
            match &row[k] {
                Ok((par, ext)) => {
                    let expected = if *spec == ConeSpec::SET_E { par.min(0.0) } else { *par };
                    worst = worst.max((ext - expected).abs());
                    if ext.is_nan() {
                        worst = f64::INFINITY;
                    }
                    if (*par > 1e-6 && *ext < -1e-6) || (*par < -1e-6 && *ext > 1e-6) {
                        sign += 1;
                    }
                    if *par >= -cfg.tol {
                        members += 1;
                    }
                }
                Err(_) => errors += 1,
            }
        }
        let detail = format!("{spec}: {count} samples, {members} members, {errors} oracle errors");
        let name_diff = if *spec == ConeSpec::SET_E { "set_e_agreement" } else { "tilde_c_agreement" };
        let name_sign = if *spec == ConeSpec::SET_E { "set_e_sign" } else { "tilde_c_sign" };
        let worst = if errors > 0 { f64::INFINITY } else { worst };
        out.push(PropertyResult::new(S, name_diff, worst, Relation::AtMost, cfg.band, detail));
        out.push(PropertyResult::new(S, name_sign, sign as f64, Relation::AtMost, 0.0, "sign disagreements outside +-1e-6".into()));
    }
    out
}

fn margin_of(r: &CurvatureOperator, spec: &ConeSpec, opts: &MembershipOptions) -> f64 {
    membership(r, spec, opts).map(|rep| rep.margin).unwrap_or(f64::NAN)
}

fn inclusions(cfg: &ExperimentConfig) -> Vec<PropertyResult> {
    const S: &str = "inclusions";
    let tol = cfg.tol;
    let held = |m: f64| m >= -tol;
    let mut out = Vec::new();
    let seed = derive_seed(cfg.seed, 4);
    let sigmas = [0.3, 0.6, 0.9, 1.2];

    let count = samples(cfg, 500);
    let chain: Vec<[f64; 3]> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let n = if i % 5 == 4 { 5 } else { 4 };
            let r = perturbed_sphere(seed, i, n, sigmas[i as usize % 4]);
            let opts = cfg.membership_options(derive_seed(seed, i));
            [
                margin_of(&r, &ConeSpec::HAT_C, &opts),
                margin_of(&r, &ConeSpec::SET_E, &opts),
                margin_of(&r, &ConeSpec::TILDE_C, &opts),
            ]
        })
        .collect();
    let failed = chain.iter().filter(|m| m.iter().any(|x| x.is_nan())).count();
    let bad = chain
        .iter()
        .filter(|m| (held(m[0]) && !held(m[1])) || (held(m[1]) && !held(m[2])))
        .count()
        + failed;
    let hats = chain.iter().filter(|m| held(m[0])).count();
    let es = chain.iter().filter(|m| held(m[1])).count();
    let tcs = chain.iter().filter(|m| held(m[2])).count();
    out.push(PropertyResult::new(S, "hat_c_in_set_e_in_tilde_c", bad as f64, Relation::AtMost, 0.0,
        format!("{count} samples: {hats} in HAT_C, {es} in SET_E, {tcs} in TILDE_C, {failed} oracle errors")));

    // member pools for the remaining properties
    let pool_size = samples(cfg, 100);
    let pool_seed = derive_seed(cfg.seed, 5);
    let mut e_pool = Vec::new();
    let mut hat_pool = Vec::new();
    let mut next = 0u64;
    while (e_pool.len() < pool_size || hat_pool.len() < pool_size) && next < 100 * pool_size as u64 + 100 {
        let batch: Vec<(CurvatureOperator, f64, f64)> = (next..next + 64)
            .into_par_iter()
            .map(|i| {
                let r = perturbed_sphere(pool_seed, i, 4, [0.4, 0.7][i as usize % 2]);
                let opts = cfg.membership_options(derive_seed(pool_seed, i));
                let e = margin_of(&r, &ConeSpec::SET_E, &opts);
                let h = margin_of(&r, &ConeSpec::HAT_C, &opts);
                (r, e, h)
            })
            .collect();
        next += 64;
        for (r, e, h) in batch {
            if held(e) && e_pool.len() < pool_size {
                e_pool.push(r.clone());
            }
            if held(h) && hat_pool.len() < pool_size {
                hat_pool.push(r);
            }
        }
    }

    let shifted: Vec<f64> = e_pool
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let opts = cfg.membership_options(derive_seed(pool_seed, 10_000 + i as u64));
            margin_of(&r.add_scaled(1.0, &CurvatureOperator::sphere(4)).expect("n = 4"), &ConeSpec::HAT_C, &opts)
        })
        .collect();
    let bad = shifted.iter().filter(|m| !held(**m)).count();
    out.push(PropertyResult::new(S, "set_e_plus_sphere_in_hat_c", bad as f64, Relation::AtMost, 0.0,
        format!("{} SET_E members (wanted {pool_size})", shifted.len())));
    if shifted.len() < pool_size {
        out.push(PropertyResult::new(S, "set_e_pool_size", shifted.len() as f64, Relation::AtLeast, pool_size as f64, "members found".into()));
    }

    let pairs = e_pool.len().min(hat_pool.len());
    let sums: Vec<f64> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            // pair each SET_E member with a different HAT_C member
            let p = &hat_pool[(i * 7 + 3) % hat_pool.len()];
            let opts = cfg.membership_options(derive_seed(pool_seed, 20_000 + i as u64));
            margin_of(&e_pool[i].add_scaled(1.0, p).expect("n = 4"), &ConeSpec::SET_E, &opts)
        })
        .collect();
    let bad = sums.iter().filter(|m| !held(**m)).count();
    out.push(PropertyResult::new(S, "set_e_plus_hat_c_in_set_e", bad as f64, Relation::AtMost, 0.0, format!("{pairs} pairs")));

    let tp = GeneratorSpec::new(GeneratorKind::TwoPositive, 4, pool_size, derive_seed(cfg.seed, 6));
    let tp_ops = generate(&tp).unwrap_or_default();
    let tp_margins: Vec<(f64, f64)> = tp_ops
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let opts = cfg.membership_options(derive_seed(tp.seed, i as u64));
            (margin_of(r, &ConeSpec::SET_E, &opts), margin_of(r, &ConeSpec::TILDE_C, &opts))
        })
        .collect();
    let bad = tp_margins.iter().filter(|(e, t)| !held(*e) || !held(*t)).count();
    let min_e = tp_margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    out.push(PropertyResult::new(S, "two_positive_in_set_e", bad as f64, Relation::AtMost, 0.0,
        format!("{} samples, smallest SET_E margin {min_e:.3e}", tp_margins.len())));

    let tc_seed = derive_seed(cfg.seed, 7);
    let mut ricci = Vec::new();
    let mut next = 0u64;
    while ricci.len() < pool_size && next < 100 * pool_size as u64 + 100 {
        let batch: Vec<Option<f64>> = (next..next + 64)
            .into_par_iter()
            .map(|i| {
                let r = perturbed_sphere(tc_seed, i, 4, 0.6);
                let m = margin_of(&r, &ConeSpec::TILDE_C, &cfg.membership_options(derive_seed(tc_seed, i)));
                held(m).then(|| r.ricci().min_eigenvalue())
            })
            .collect();
        next += 64;
        ricci.extend(batch.into_iter().flatten());
    }
    ricci.truncate(pool_size);
    let min_ric = ricci.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(PropertyResult::new(S, "tilde_c_ricci_nonnegative", min_ric, Relation::AtLeast, -tol, format!("{} TILDE_C members", ricci.len())));
    out
}

fn plain_flow_config(seed: u64, variant: Variant) -> FlowConfig {
    FlowConfig {
        variant,
        monitors: vec![ConeSpec::SET_E],
        seed,
        ..FlowConfig::default()
    }
}

fn invariance(cfg: &ExperimentConfig) -> CliResult<Vec<PropertyResult>> {
    const S: &str = "invariance";
    let mut out = Vec::new();
    let n = 4;
    let params = TransformParams::admissible(n, 0.5 * TransformParams::max_b(n))?;

    for (name, variant, count, label) in [
        ("plain_flow_keeps_set_e", Variant::Plain, samples(cfg, 20), 8u64),
        ("modified_flow_keeps_set_e", Variant::BohmWilking { params }, samples(cfg, 10), 9),
    ] {
        let seed = derive_seed(cfg.seed, label);
        let runs: Vec<CliResult<(f64, bool)>> = (0..count as u64)
            .into_par_iter()
            .map(|i| {
                let (r0, _) = boundary_adjacent(&ConeSpec::SET_E, n, seed, i, 1e-4, 1e-3)?;
                let traj = integrate(&r0, &plain_flow_config(derive_seed(seed, i), variant))?;
                Ok((traj.min_margin(0), traj.terminated_by == StopReason::MaxTrace))
            })
            .collect();
        let runs = runs.into_iter().collect::<CliResult<Vec<_>>>()?;
        let min = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let reached = runs.iter().filter(|r| r.1).count();
        let measured = if reached == runs.len() { min } else { f64::NEG_INFINITY };
        out.push(PropertyResult::new(S, name, measured, Relation::AtLeast, -1e-5,
            format!("min SET_E margin over {count} boundary-adjacent starts, {reached} reached trace x1e3")));
    }

    let count = samples(cfg, 50);
    let seed = derive_seed(cfg.seed, 10);
    let witnesses: Vec<CliResult<(CurvatureOperator, MembershipReport)>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let (r, _) = boundary_adjacent(&ConeSpec::SET_E, n, seed, i, 0.0, 1e-8)?;
            let rep = membership(&r, &ConeSpec::SET_E, &cfg.membership_options(derive_seed(seed, i)))?;
            Ok((r, rep))
        })
        .collect();
    let witnesses = witnesses.into_iter().collect::<CliResult<Vec<_>>>()?;
    let mut min_d = f64::INFINITY;
    let mut eps_err = 0.0f64;
    for (i, (r, rep)) in witnesses.iter().enumerate() {
        let f = rep.witness.frame()?;
        let p = rep.witness.params();
        let opts = cfg.membership_options(derive_seed(seed, 1000 + i as u64));
        min_d = min_d.min(boundary_derivative_check(r, &f, p, &opts)?);
        if i < 10 {
            let plain = boundary_derivative(r, &f, p, &Variant::Plain)?;
            let forced = boundary_derivative(r, &f, p, &Variant::Epsilon { epsilon: 0.5 })?;
            let expected = 0.5 * (1.0 + p.lambda().powi(2)) * (1.0 + p.mu().powi(2));
            eps_err = eps_err.max((forced - plain - expected).abs() / plain.abs().max(1.0));
        }
    }
    out.push(PropertyResult::new(S, "boundary_derivative", min_d, Relation::AtLeast, -1e-4, format!("{count} bisection-generated boundary witnesses")));
    out.push(PropertyResult::new(S, "epsilon_forcing", eps_err, Relation::AtMost, 1e-10, "eps (1 + l^2)(1 + m^2) added, 10 witnesses".into()));

    let count = samples(cfg, 100);
    let seed = derive_seed(cfg.seed, 11);
    let mut mins = Vec::new();
    let mut next = 0u64;
    while mins.len() < count && next < 100 * count as u64 + 100 {
        let batch: Vec<CliResult<Option<f64>>> = (next..next + 64)
            .into_par_iter()
            .map(|i| {
                let r = perturbed_sphere(seed, i, n, 0.5);
                let m = margin_of(&r, &ConeSpec::SET_E, &cfg.membership_options(derive_seed(seed, i)));
                if !(m >= -cfg.tol) {
                    return Ok(None);
                }
                let d = d_ab(&r, params)?;
                Ok(Some(SymmetricEigen::new(d.lambda2_matrix()).eigenvalues.min()))
            })
            .collect();
        next += 64;
        for b in batch {
            if let Some(v) = b? {
                mins.push(v);
            }
        }
    }
    mins.truncate(count);
    let min = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let measured = if mins.len() == count { min } else { f64::NEG_INFINITY };
    out.push(PropertyResult::new(S, "d_ab_positive_semidefinite", measured, Relation::AtLeast, -1e-7,
        format!("min Lambda^2 eigenvalue over {} SET_E members, (a, b) = ({:.4}, {:.4})", mins.len(), params.a, params.b)));
    Ok(out)
}

fn rk4_config(h: f64, max_time: f64) -> FlowConfig {
    FlowConfig {
        scheme: Scheme::Rk4Fixed { h },
        stop: StopRule {
            max_time,
            ..StopRule::default()
        },
        ..FlowConfig::default()
    }
}

/// Largest relative deviation of a flow from `I` from `I / (1 - 2(n-1)t)`.
fn sphere_flow_error(n: usize, cfg: &FlowConfig) -> CliResult<(f64, f64)> {
    let id = CurvatureOperator::sphere(n);
    let traj = integrate(&id, cfg)?;
    let err = traj
        .samples
        .iter()
        .map(|s| {
            let u = 1.0 / (1.0 - 2.0 * (n as f64 - 1.0) * s.t);
            s.r.max_abs_diff(&id.scaled(u)) / u
        })
        .fold(0.0, f64::max);
    Ok((err, traj.last().t))
}

fn integrator(cfg: &ExperimentConfig) -> CliResult<Vec<PropertyResult>> {
    const S: &str = "integrator";
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for n in [4, 5, 6] {
        let end = 0.9 / (2.0 * (n as f64 - 1.0));
        worst = worst.max(sphere_flow_error(n, &rk4_config(1e-4, end))?.0);
    }
    out.push(PropertyResult::new(S, "rk4_closed_form", worst, Relation::AtMost, 1e-6, "h = 1e-4 up to t = 0.9 / (2(n-1)), n = 4..6".into()));

    let end_err = |h: f64| -> CliResult<f64> {
        let traj = integrate(&CurvatureOperator::sphere(4), &rk4_config(h, 0.1))?;
        let s = traj.last();
        let u = 1.0 / (1.0 - 6.0 * s.t);
        Ok(s.r.max_abs_diff(&CurvatureOperator::sphere(4).scaled(u)) / u)
    };
    let (e1, e2) = (end_err(0.01)?, end_err(0.005)?);
    out.push(PropertyResult::new(S, "rk4_order", (e1 / e2).log2(), Relation::AtLeast, 3.9, format!("end errors {e1:.3e} (h = 0.01), {e2:.3e} (h = 0.005) at t = 0.1")));

    let (err, t) = sphere_flow_error(4, &FlowConfig::default())?;
    out.push(PropertyResult::new(S, "adaptive_closed_form", err, Relation::AtMost, 1e-6, format!("until scal x1e3, t_end = {t:.9}")));

    let seed = derive_seed(cfg.seed, 12);
    let mut eq = 0.0f64;
    for i in 0..3u64 {
        let r0 = perturbed_sphere(seed, i, 4, 0.3);
        let g = random_orthogonal(&mut stream(seed, 100 + i), 4);
        let c = rk4_config(1e-3, 0.05);
        let a = integrate(&r0, &c)?;
        let b = integrate(&r0.rotated(&g), &c)?;
        eq = eq.max(a.last().r.rotated(&g).max_abs_diff(&b.last().r) / a.last().r.norm());
    }
    out.push(PropertyResult::new(S, "rotation_equivariance", eq, Relation::AtMost, 1e-7, "3 random starts and rotations".into()));
    Ok(out)
}
