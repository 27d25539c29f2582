//! `check`: membership of every operator in every cone spec.

use curvlab_core::algebra::CurvatureOperator;
use curvlab_core::cones::{membership_or_undecided, ConeSpec, Decision, MembershipReport};
use curvlab_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{csv_table, fmt_f64, fmt_opt, write_json, write_sidecar};

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub id: usize,
    pub operator: usize,
    pub source: String,
    pub n: usize,
    pub spec: String,
    pub margin: f64,
    pub decision: Decision,
    pub method: String,
    pub starts: usize,
    pub converged: bool,
    pub parametric_margin: Option<f64>,
    pub extension_margin: Option<f64>,
    /// Witness file relative to the output directory; empty when there is none.
    pub witness: String,
    pub error: String,
    #[serde(skip)]
    pub report: Option<MembershipReport>,
}

pub const CSV_HEADER: [&str; 14] = [
    "id",
    "operator",
    "source",
    "n",
    "spec",
    "margin",
    "decision",
    "method",
    "starts",
    "converged",
    "parametric_margin",
    "extension_margin",
    "witness",
    "error",
];

impl CheckRow {
    fn csv(&self) -> Vec<String> {
        vec![
            self.id.to_string(),
            self.operator.to_string(),
            self.source.clone(),
            self.n.to_string(),
            self.spec.clone(),
            fmt_f64(self.margin),
            self.decision.as_str().into(),
            self.method.clone(),
            self.starts.to_string(),
            self.converged.to_string(),
            fmt_opt(self.parametric_margin),
            fmt_opt(self.extension_margin),
            self.witness.clone(),
            self.error.clone(),
        ]
    }
}

/// Runs the queries; oracle failures become `UNDECIDED` rows.
pub fn check_rows(
    cfg: &ExperimentConfig,
    ops: &[(String, CurvatureOperator)],
    specs: &[ConeSpec],
) -> Vec<CheckRow> {
    let jobs: Vec<(usize, usize)> = (0..ops.len())
        .flat_map(|o| (0..specs.len()).map(move |s| (o, s)))
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(id, &(o, s))| {
            let (source, r) = &ops[o];
            let spec = &specs[s];
            let opts = cfg.membership_options(derive_seed(cfg.item_seed(o), s as u64));
            let (rep, error) = match membership_or_undecided(r, spec, &opts) {
                Ok(rep) => (rep, String::new()),
                Err((rep, e)) => (rep, e.to_string()),
            };
            let has_witness = !rep.witness.vectors.is_empty();
            CheckRow {
                id,
                operator: o,
                source: source.clone(),
                n: r.dim(),
                spec: spec.label(),
                margin: rep.margin,
                decision: rep.decision,
                method: serde_json::to_value(rep.method)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                starts: rep.starts,
                converged: rep.converged,
                parametric_margin: rep.parametric_margin,
                extension_margin: rep.extension_margin,
                witness: if has_witness {
                    format!("witnesses/row_{id:05}.json")
                } else {
                    String::new()
                },
                error,
                report: has_witness.then_some(rep),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct WitnessFile<'a> {
    row: usize,
    operator: usize,
    spec: &'a str,
    margin: f64,
    witness: &'a curvlab_core::cones::Witness,
}

#[derive(Serialize)]
pub struct CheckSummary {
    pub operators: usize,
    pub rows: usize,
    pub members: usize,
    pub non_members: usize,
    pub undecided: usize,
}

pub fn cmd_check(cfg: &ExperimentConfig) -> CliResult<Vec<CheckRow>> {
    let ops = cfg.collect_operators()?;
    let rows = check_rows(cfg, &ops, &cfg.specs);
    let out = &cfg.out;
    for row in &rows {
        if let Some(rep) = &row.report {
            write_json(
                &out.join(&row.witness),
                &WitnessFile {
                    row: row.id,
                    operator: row.operator,
                    spec: &row.spec,
                    margin: row.margin,
                    witness: &rep.witness,
                },
            )?;
        }
    }
    let table: Vec<Vec<String>> = rows.iter().map(CheckRow::csv).collect();
    crate::output::atomic_write(&out.join("check.csv"), &csv_table(&CSV_HEADER, &table)?)?;
    write_json(&out.join("check.json"), &rows)?;
    let count = |d: Decision| rows.iter().filter(|r| r.decision == d).count();
    let summary = CheckSummary {
        operators: ops.len(),
        rows: rows.len(),
        members: count(Decision::Member),
        non_members: count(Decision::NonMember),
        undecided: count(Decision::Undecided),
    };
    write_sidecar(&out.join("check.meta.json"), "check", cfg, &summary)?;
    Ok(rows)
}
