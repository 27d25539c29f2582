//! Experiment configuration: defaults, overlaid by a JSON file, overlaid by flags.

use std::path::{Path, PathBuf};

use curvlab_core::algebra::CurvatureOperator;
use curvlab_core::cones::{ConeSpec, MembershipOptions};
use curvlab_core::flow::FlowConfig;
use curvlab_core::generate::{boundary_adjacent, generate, product_sphere, GeneratorSpec};
use curvlab_core::io::{read_operators, OperatorFile};
use curvlab_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, ErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedKind {
    Sphere,
    Zero,
    ProductSphere,
}

/// A closed-form operator, scaled: `{"named": "sphere", "n": 4, "scale": -1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedOperator {
    pub named: NamedKind,
    pub n: usize,
    #[serde(default = "one")]
    pub scale: f64,
    /// Curved factor dimension for `product_sphere`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSource {
    Named(NamedOperator),
    Inline(OperatorFile),
}

impl OperatorSource {
    /// Short label such as `sphere(n=4)`; inline tensors are `operators[i]`.
    pub fn label(&self, index: usize) -> String {
        match self {
            OperatorSource::Inline(_) => format!("operators[{index}]"),
            OperatorSource::Named(op) => {
                let name = match op.named {
                    NamedKind::Sphere => "sphere",
                    NamedKind::Zero => "zero",
                    NamedKind::ProductSphere => "product_sphere",
                };
                let mut s = format!("{name}(n={}", op.n);
                if let Some(k) = op.k {
                    s.push_str(&format!(",k={k}"));
                }
                if op.scale != 1.0 {
                    s.push_str(&format!(",scale={}", op.scale));
                }
                s.push(')');
                s
            }
        }
    }

    pub fn build(&self) -> CliResult<CurvatureOperator> {
        match self {
            OperatorSource::Inline(f) => Ok(f.to_operator()?),
            OperatorSource::Named(op) => {
                if op.n < 2 {
                    return Err(CliError::config(format!("n = {} must be at least 2", op.n)));
                }
                let base = match op.named {
                    NamedKind::Sphere => CurvatureOperator::sphere(op.n),
                    NamedKind::Zero => CurvatureOperator::zero(op.n),
                    NamedKind::ProductSphere => {
                        let k = op.k.ok_or_else(|| CliError::config("product_sphere needs k"))?;
                        if k > op.n {
                            return Err(CliError::config(format!("k = {k} exceeds n = {}", op.n)));
                        }
                        product_sphere(op.n, k)
                    }
                };
                Ok(base.scaled(op.scale))
            }
        }
    }
}

/// Seeded operators with margin in `[lo, hi]` for `spec`, by bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default = "set_e")]
    pub spec: ConeSpec,
    pub n: usize,
    #[serde(default = "one_usize")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
}

fn set_e() -> ConeSpec {
    ConeSpec::SET_E
}

fn one_usize() -> usize {
    1
}

fn default_lo() -> f64 {
    1e-4
}

fn default_hi() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n: Vec<usize>,
    pub sigma: Vec<f64>,
    /// Empty means the top-level `specs`.
    pub specs: Vec<ConeSpec>,
    /// Operators per `(n, sigma)` cell.
    pub count: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: vec![4],
            sigma: vec![0.0, 0.5, 1.0],
            specs: Vec::new(),
            count: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Multistarts per membership query.
    pub starts: usize,
    /// Member iff margin >= -tol.
    pub tol: f64,
    /// Largest accepted disagreement between the two oracles.
    pub band: f64,
    pub cross_check: bool,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    pub operators: Vec<OperatorSource>,
    /// JSON operator files, relative to the config file.
    pub operator_files: Vec<PathBuf>,
    pub generators: Vec<GeneratorSpec>,
    pub boundary_adjacent: Vec<BoundarySpec>,
    pub specs: Vec<ConeSpec>,
    /// Per-trajectory seeds are derived from `seed`; `flow.seed` is overwritten.
    pub flow: FlowConfig,
    /// A flow violates a monitor when a margin drops below `-violation_tol`.
    pub violation_tol: f64,
    pub sweep: SweepConfig,
    /// Overrides every sample count of a verification suite.
    pub samples: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 64,
            tol: 1e-7,
            band: 5e-6,
            cross_check: true,
            jobs: None,
            out: PathBuf::from("curvlab-out"),
            operators: Vec::new(),
            operator_files: Vec::new(),
            generators: Vec::new(),
            boundary_adjacent: Vec::new(),
            specs: vec![ConeSpec::PIC, ConeSpec::TILDE_C, ConeSpec::HAT_C, ConeSpec::SET_E],
            flow: FlowConfig::default(),
            violation_tol: 1e-5,
            sweep: SweepConfig::default(),
            samples: None,
        }
    }
}

/// Values given on the command line; `None` leaves the config value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub starts: Option<usize>,
    pub tol: Option<f64>,
    pub jobs: Option<usize>,
    pub samples: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    /// Reads a config file; relative operator file paths are resolved against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(&format!("reading {}", path.display()), e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            for p in &mut cfg.operator_files {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Defaults, then `path`, then `flags`.
    pub fn resolve(path: Option<&Path>, flags: &Overrides) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &Overrides) {
        if let Some(s) = flags.seed {
            self.seed = s;
        }
        if let Some(o) = &flags.out {
            self.out = o.clone();
        }
        if let Some(s) = flags.starts {
            self.starts = s;
        }
        if let Some(t) = flags.tol {
            self.tol = t;
        }
        if let Some(j) = flags.jobs {
            self.jobs = Some(j);
        }
        if let Some(s) = flags.samples {
            self.samples = Some(s);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.starts < 1 {
            return Err(CliError::config("starts must be at least 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(CliError::config(format!("tol = {} must be finite and >= 0", self.tol)));
        }
        if !(self.band > 0.0) {
            return Err(CliError::config("band must be positive"));
        }
        if !(self.violation_tol >= 0.0) {
            return Err(CliError::config("violation_tol must be >= 0"));
        }
        if self.jobs == Some(0) {
            return Err(CliError::config("jobs must be at least 1"));
        }
        for g in &self.generators {
            g.validate()?;
        }
        for b in &self.boundary_adjacent {
            if b.n < 4 || b.count < 1 || !(b.lo < b.hi) {
                return Err(CliError::config(format!(
                    "boundary_adjacent needs n >= 4, count >= 1 and lo < hi (got n = {}, count = {}, [{}, {}])",
                    b.n, b.count, b.lo, b.hi
                )));
            }
        }
        if self.sweep.count < 1 {
            return Err(CliError::config("sweep.count must be at least 1"));
        }
        if let Some(n) = self.sweep.n.iter().find(|&&n| n < 2) {
            return Err(CliError::config(format!("sweep dimension {n} must be at least 2")));
        }
        if let Some(s) = self.sweep.sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(CliError::config(format!("sweep sigma {s} must be finite and >= 0")));
        }
        self.flow.validate()?;
        Ok(())
    }

    pub fn membership_options(&self, seed: u64) -> MembershipOptions {
        MembershipOptions {
            starts: self.starts,
            seed,
            band: self.band,
            threshold: -self.tol,
            cross_check: self.cross_check,
            ..MembershipOptions::default()
        }
    }

    /// Every operator the config names, in order: inline, files, generators,
    /// boundary-adjacent families. Each comes with a short source label.
    pub fn collect_operators(&self) -> CliResult<Vec<(String, CurvatureOperator)>> {
        let mut out = Vec::new();
        for (i, src) in self.operators.iter().enumerate() {
            out.push((src.label(i), src.build()?));
        }
        for path in &self.operator_files {
            let ops = read_operators(path).map_err(|e| match e {
                curvlab_core::Error::Io(io) => CliError::io(&format!("reading {}", path.display()), io),
                other => CliError::new(ErrorKind::Input, format!("{}: {other}", path.display())),
            })?;
            for (i, r) in ops.into_iter().enumerate() {
                out.push((format!("{}[{i}]", path.display()), r));
            }
        }
        for g in &self.generators {
            let label = serde_json::to_value(g.kind)
                .ok()
                .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_owned))
                .unwrap_or_else(|| "generator".into());
            for (i, r) in generate(g)?.into_iter().enumerate() {
                out.push((format!("{label}[{i}]"), r));
            }
        }
        for b in &self.boundary_adjacent {
            for i in 0..b.count as u64 {
                let (r, _) = boundary_adjacent(&b.spec, b.n, b.seed, i, b.lo, b.hi)?;
                out.push((format!("boundary_adjacent({})[{i}]", b.spec), r));
            }
        }
        Ok(out)
    }

    /// Seed for item `index` of a run.
    pub fn item_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, index as u64)
    }
}
