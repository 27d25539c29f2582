//! `sweep`: membership statistics over the product of dimensions, perturbation sizes and specs.

use curvlab_core::cones::{membership_or_undecided, Decision};
use curvlab_core::generate::{generate, GeneratorKind, GeneratorSpec};
use curvlab_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::output::{atomic_write, csv_table, fmt_f64, write_json, write_sidecar};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub sigma: f64,
    pub spec: String,
    pub count: usize,
    pub members: usize,
    pub non_members: usize,
    pub undecided: usize,
    /// Over decided operators; NaN when there are none.
    pub min_margin: f64,
    pub mean_margin: f64,
    pub max_margin: f64,
}

const HEADER: [&str; 10] = [
    "n",
    "sigma",
    "spec",
    "count",
    "members",
    "non_members",
    "undecided",
    "min_margin",
    "mean_margin",
    "max_margin",
];

pub fn sweep_rows(cfg: &ExperimentConfig) -> CliResult<Vec<SweepRow>> {
    let sw = &cfg.sweep;
    let specs = if sw.specs.is_empty() { &cfg.specs } else { &sw.specs };
    let mut cells = Vec::new();
    for &n in &sw.n {
        for &sigma in &sw.sigma {
            let id = cells.len() as u64;
            let gen = GeneratorSpec::new(GeneratorKind::SpherePerturbed { sigma }, n, sw.count, derive_seed(cfg.seed, id));
            cells.push((n, sigma, gen.seed, generate(&gen)?));
        }
    }
    let mut tasks = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for s in 0..specs.len() {
            for o in 0..cell.3.len() {
                tasks.push((c, s, o));
            }
        }
    }
    let margins: Vec<(Decision, f64)> = tasks
        .par_iter()
        .map(|&(c, s, o)| {
            let seed = derive_seed(derive_seed(cells[c].2, o as u64), s as u64);
            let opts = cfg.membership_options(seed);
            let rep = match membership_or_undecided(&cells[c].3[o], &specs[s], &opts) {
                Ok(r) => r,
                Err((r, _)) => r,
            };
            (rep.decision, rep.margin)
        })
        .collect();
    let mut rows = Vec::new();
    let mut k = 0;
    for (n, sigma, _, ops) in &cells {
        for spec in specs {
            let chunk = &margins[k..k + ops.len()];
            k += ops.len();
            let count = |d: Decision| chunk.iter().filter(|(x, _)| *x == d).count();
            let decided: Vec<f64> = chunk
                .iter()
                .filter(|(d, _)| *d != Decision::Undecided)
                .map(|(_, m)| *m)
                .collect();
            let (min, max, mean) = if decided.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                (
                    decided.iter().copied().fold(f64::INFINITY, f64::min),
                    decided.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    decided.iter().sum::<f64>() / decided.len() as f64,
                )
            };
            rows.push(SweepRow {
                n: *n,
                sigma: *sigma,
                spec: spec.label(),
                count: ops.len(),
                members: count(Decision::Member),
                non_members: count(Decision::NonMember),
                undecided: count(Decision::Undecided),
                min_margin: min,
                mean_margin: mean,
                max_margin: max,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<SweepRow>> {
    let rows = sweep_rows(cfg)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.sigma),
                r.spec.clone(),
                r.count.to_string(),
                r.members.to_string(),
                r.non_members.to_string(),
                r.undecided.to_string(),
                fmt_f64(r.min_margin),
                fmt_f64(r.mean_margin),
                fmt_f64(r.max_margin),
            ]
        })
        .collect();
    atomic_write(&cfg.out.join("sweep.csv"), &csv_table(&HEADER, &table)?)?;
    write_json(&cfg.out.join("sweep.json"), &rows)?;
    write_sidecar(&cfg.out.join("sweep.meta.json"), "sweep", cfg, rows.len())?;
    Ok(rows)
}
