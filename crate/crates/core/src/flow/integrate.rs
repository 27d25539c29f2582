use std::fmt::Write as _;

use crate::algebra::CurvatureOperator;
use crate::cones::{membership, ConeSpec, FourFrame, MembershipOptions};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

use super::config::{FlowConfig, Scheme};
use super::ode::{accept, dopri_step, step};
use super::pinching::pinching_ratio;

/// Why integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxTime,
    MaxTrace,
    MaxSteps,
    /// The solution left the range of finite doubles.
    BlowUp,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::MaxTime => "max_time",
            StopReason::MaxTrace => "max_trace",
            StopReason::MaxSteps => "max_steps",
            StopReason::BlowUp => "blow_up",
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    pub r: CurvatureOperator,
    pub scal: f64,
    pub ric0_norm: f64,
    /// One entry per monitor, NaN where the oracle failed.
    pub margins: Vec<f64>,
    pub monitor_errors: Vec<Option<String>>,
    /// NaN when not tracked or undefined.
    pub pinching: f64,
    /// Size of the step that produced this sample (0 at the start).
    pub step_size: f64,
    pub validated: bool,
}

impl FlowSample {
    /// The sample rescaled to unit-sphere normalization, `R / (scal / n(n-1))`.
    pub fn normalized(&self) -> Option<CurvatureOperator> {
        let n = self.r.dim() as f64;
        let c = self.scal / (n * (n - 1.0));
        (c != 0.0).then(|| self.r.scaled(1.0 / c))
    }
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub monitors: Vec<ConeSpec>,
    pub samples: Vec<FlowSample>,
    pub terminated_by: StopReason,
    pub steps: usize,
}

/// A monitored cone that the flow left.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub spec: ConeSpec,
    pub t: f64,
    pub margin: f64,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Smallest recorded margin of monitor `i` (ignoring failed evaluations).
    pub fn min_margin(&self, i: usize) -> f64 {
        self.samples
            .iter()
            .map(|s| s.margins[i])
            .filter(|m| !m.is_nan())
            .fold(f64::INFINITY, f64::min)
    }

    /// Samples where a monitor that held at `t = 0` (margin `>= threshold`) has
    /// margin below `-tol`.
    pub fn violations(&self, threshold: f64, tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        let first = &self.samples[0];
        for (i, spec) in self.monitors.iter().enumerate() {
            if !(first.margins[i] >= threshold) {
                continue;
            }
            if let Some(s) = self.samples.iter().find(|s| s.margins[i] < -tol) {
                out.push(Violation {
                    spec: *spec,
                    t: s.t,
                    margin: s.margins[i],
                });
            }
        }
        out
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string(), "scal".into(), "ric0_norm".into()];
        for m in &self.monitors {
            cols.push(format!("margin_{}", column_label(m)));
        }
        cols.extend(["pinching".into(), "step_size".into(), "validated".into()]);
        cols.join(",")
    }

    /// Header plus one row per sample, every float with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for s in &self.samples {
            let mut row = String::new();
            let _ = write!(row, "{:.16e},{:.16e},{:.16e}", s.t, s.scal, s.ric0_norm);
            for m in &s.margins {
                let _ = write!(row, ",{m:.16e}");
            }
            let _ = write!(
                row,
                ",{:.16e},{:.16e},{}",
                s.pinching, s.step_size, s.validated
            );
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}

/// `LAB_E(0.24,0.2)` becomes `LAB_E_0.24_0.2` so CSV headers stay comma-free.
pub fn column_label(spec: &ConeSpec) -> String {
    spec.label()
        .replace(['(', ','], "_")
        .replace(')', "")
}

struct Monitor {
    warm: Vec<Option<FourFrame>>,
}

impl Monitor {
    fn sample(
        &mut self,
        cfg: &FlowConfig,
        t: f64,
        r: &CurvatureOperator,
        step_size: f64,
    ) -> FlowSample {
        let mut margins = Vec::with_capacity(cfg.monitors.len());
        let mut errors = Vec::with_capacity(cfg.monitors.len());
        for (i, spec) in cfg.monitors.iter().enumerate() {
            let opts = MembershipOptions {
                starts: cfg.monitor_starts,
                seed: derive_seed(cfg.seed, i as u64),
                cross_check: false,
                escalations: 0,
                warm: self.warm[i].iter().cloned().collect(),
                ..MembershipOptions::default()
            };
            match membership(r, spec, &opts) {
                Ok(rep) => {
                    self.warm[i] = rep.witness.frame().ok();
                    margins.push(rep.margin);
                    errors.push(None);
                }
                Err(e) => {
                    margins.push(f64::NAN);
                    errors.push(Some(e.to_string()));
                }
            }
        }
        let pinching = if cfg.track_pinching {
            pinching_ratio(r, cfg.pinching_starts, derive_seed(cfg.seed, u64::MAX))
                .unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        FlowSample {
            t,
            r: r.clone(),
            scal: r.scalar(),
            ric0_norm: r.ricci_traceless().norm_squared().sqrt(),
            margins,
            monitor_errors: errors,
            pinching,
            step_size,
            validated: CurvatureOperator::new(r.tensor().clone()).is_ok(),
        }
    }
}

/// Integrates from `r0` until a stop condition holds.
pub fn integrate(r0: &CurvatureOperator, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let scal0 = r0.scalar();
    let max_trace = cfg
        .stop
        .max_trace
        .or_else(|| (scal0 > 0.0).then_some(1e3 * scal0));
    let max_time = cfg.stop.max_time;
    let mut monitor = Monitor {
        warm: vec![None; cfg.monitors.len()],
    };

    let mut r = r0.clone();
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut samples = vec![monitor.sample(cfg, t, &r, 0.0)];
    let mut sampled_last = true;
    let mut last_h = 0.0;
    let mut h_next = match cfg.scheme {
        Scheme::Rk4Fixed { h } => h,
        Scheme::Rk45Adaptive { .. } => cfg.step_cap / r.norm().max(1e-300),
    };

    let reason = loop {
        if max_trace.is_some_and(|m| r.scalar() >= m) {
            break StopReason::MaxTrace;
        }
        let remaining = max_time - t;
        if remaining <= 1e-13 * t.abs().max(1.0) {
            break StopReason::MaxTime;
        }
        if steps >= cfg.stop.max_steps {
            break StopReason::MaxSteps;
        }
        let (next, h) = match cfg.scheme {
            Scheme::Rk4Fixed { h } => {
                let h = h.min(remaining);
                let next = step(&r, h, &cfg.variant).map_err(|e| with_time(e, t))?;
                (next, h)
            }
            Scheme::Rk45Adaptive { rel_tol, abs_tol } => {
                let cap = cfg.step_cap / r.norm();
                let mut h = h_next.min(cap).min(remaining);
                if !h.is_finite() {
                    h = 1.0;
                }
                loop {
                    let (y, err) = dopri_step(&r, h, &cfg.variant, rel_tol, abs_tol)?;
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if err <= 1.0 {
                        h_next = h * factor;
                        break (accept(&y, t + h)?, h);
                    }
                    h *= factor.min(0.9);
                    if h <= 1e-15 * t.abs().max(1.0) {
                        return Err(Error::StepRejected {
                            t,
                            residual: err,
                        });
                    }
                }
            }
        };
        if !next.tensor().as_slice().iter().all(|x| x.is_finite()) {
            break StopReason::BlowUp;
        }
        steps += 1;
        t = match cfg.scheme {
            Scheme::Rk4Fixed { h: fixed } if h == fixed => steps as f64 * fixed,
            _ => t + h,
        };
        r = next;
        last_h = h;
        sampled_last = steps % cfg.sample_every == 0;
        if sampled_last {
            samples.push(monitor.sample(cfg, t, &r, h));
        }
    };
    if !sampled_last {
        samples.push(monitor.sample(cfg, t, &r, last_h));
    }
    Ok(FlowTrajectory {
        monitors: cfg.monitors.clone(),
        samples,
        terminated_by: reason,
        steps,
    })
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::StepRejected { residual, .. } => Error::StepRejected { t, residual },
        other => other,
    }
}
