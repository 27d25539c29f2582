//! `flow`: one trajectory per operator, CSV plus JSON sidecar each.

use curvlab_core::algebra::CurvatureOperator;
use curvlab_core::flow::{integrate, FlowConfig, FlowTrajectory, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{atomic_write, write_json, write_sidecar};

/// Largest relative deviation accepted by the closed-form check.
pub const CLOSED_FORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormCheck {
    pub max_rel_error: f64,
    pub passed: bool,
}

/// For a plain flow started at `c I`, the deviation from `c / (1 - 2(n-1) c t) I`.
/// `None` when the start is not a multiple of `I` or the variant is not plain.
pub fn closed_form_check(r0: &CurvatureOperator, cfg: &FlowConfig, traj: &FlowTrajectory) -> Option<ClosedFormCheck> {
    if cfg.variant != Variant::Plain {
        return None;
    }
    let n = r0.dim();
    let nf = n as f64;
    let c = r0.scalar() / (nf * (nf - 1.0));
    let id = CurvatureOperator::sphere(n);
    if r0.max_abs_diff(&id.scaled(c)) > 1e-14 * c.abs().max(1.0) {
        return None;
    }
    let max_rel_error = traj
        .samples
        .iter()
        .map(|s| {
            let u = c / (1.0 - 2.0 * (nf - 1.0) * c * s.t);
            s.r.max_abs_diff(&id.scaled(u)) / u.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    Some(ClosedFormCheck {
        max_rel_error,
        passed: max_rel_error <= CLOSED_FORM_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationRecord {
    pub spec: String,
    pub t: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub source: String,
    pub seed: u64,
    pub csv: String,
    pub terminated_by: &'static str,
    pub steps: usize,
    pub samples: usize,
    pub t_end: f64,
    pub scal_start: f64,
    pub scal_end: f64,
    pub min_margins: Vec<(String, f64)>,
    pub monitor_failures: usize,
    pub violations: Vec<ViolationRecord>,
    pub closed_form: Option<ClosedFormCheck>,
}

#[derive(Serialize)]
struct TrajectorySidecar<'a> {
    flow: &'a FlowConfig,
    summary: &'a TrajectorySummary,
}

pub fn run_flows(
    cfg: &ExperimentConfig,
    ops: &[(String, CurvatureOperator)],
) -> CliResult<Vec<(FlowTrajectory, TrajectorySummary, FlowConfig)>> {
    ops.par_iter()
        .enumerate()
        .map(|(i, (source, r0))| {
            let flow = FlowConfig {
                seed: cfg.item_seed(i),
                ..cfg.flow.clone()
            };
            let traj = integrate(r0, &flow).map_err(|e| {
                let e = CliError::from(e);
                CliError::new(e.kind, format!("trajectory {i} ({source}): {}", e.message))
            })?;
            let violations = traj
                .violations(-cfg.tol, cfg.violation_tol)
                .into_iter()
                .map(|v| ViolationRecord {
                    spec: v.spec.label(),
                    t: v.t,
                    margin: v.margin,
                })
                .collect();
            let summary = TrajectorySummary {
                index: i,
                source: source.clone(),
                seed: flow.seed,
                csv: format!("flow_{i:04}.csv"),
                terminated_by: traj.terminated_by.as_str(),
                steps: traj.steps,
                samples: traj.samples.len(),
                t_end: traj.last().t,
                scal_start: traj.samples[0].scal,
                scal_end: traj.last().scal,
                min_margins: traj
                    .monitors
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s.label(), traj.min_margin(k)))
                    .collect(),
                monitor_failures: traj
                    .samples
                    .iter()
                    .flat_map(|s| s.monitor_errors.iter())
                    .filter(|e| e.is_some())
                    .count(),
                violations,
                closed_form: closed_form_check(r0, &flow, &traj),
            };
            Ok((traj, summary, flow))
        })
        .collect()
}

/// Writes every trajectory; fails with `InvarianceViolated` after writing if
/// any monitored set that held at the start was left.
pub fn cmd_flow(cfg: &ExperimentConfig) -> CliResult<Vec<TrajectorySummary>> {
    let ops = cfg.collect_operators()?;
    let runs = run_flows(cfg, &ops)?;
    let out = &cfg.out;
    let mut summaries = Vec::with_capacity(runs.len());
    for (traj, summary, flow) in runs {
        atomic_write(&out.join(&summary.csv), traj.to_csv().as_bytes())?;
        let sidecar = TrajectorySidecar {
            flow: &flow,
            summary: &summary,
        };
        write_sidecar(
            &out.join(format!("flow_{:04}.json", summary.index)),
            "flow",
            cfg,
            &sidecar,
        )?;
        summaries.push(summary);
    }
    write_json(&out.join("flow.json"), &summaries)?;
    let bad: Vec<String> = summaries
        .iter()
        .flat_map(|s| {
            s.violations
                .iter()
                .map(move |v| format!("trajectory {} left {} at t = {:e} (margin {:e})", s.index, v.spec, v.t, v.margin))
        })
        .collect();
    if !bad.is_empty() {
        return Err(CliError::new(
            ErrorKind::InvarianceViolated,
            format!("{} violation(s): {}", bad.len(), bad.join("; ")),
        ));
    }
    Ok(summaries)
}
