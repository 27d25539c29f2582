//! Command-line harness around `curvlab-core`: membership tables, flow
//! experiments, parameter sweeps and property suites.

pub mod check;
pub mod config;
pub mod error;
pub mod flows;
pub mod output;
pub mod sweep;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "curvlab", version, about = "Curvature cone membership and reaction ODE experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Multistarts per membership query.
    #[arg(long, value_name = "N")]
    pub starts: Option<usize>,
    /// Membership tolerance: member iff margin >= -tol.
    #[arg(long, value_name = "REAL")]
    pub tol: Option<f64>,
    /// Worker threads.
    #[arg(long, value_name = "N", env = "CURVLAB_JOBS")]
    pub jobs: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self, samples: Option<usize>) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            starts: self.starts,
            tol: self.tol,
            jobs: self.jobs,
            samples,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership of every operator in every cone spec.
    Check(CommonArgs),
    /// Integrate the reaction ODE from every operator.
    Flow(CommonArgs),
    /// Membership statistics over dimensions, perturbation sizes and specs.
    Sweep(CommonArgs),
    /// Run a property suite: algebra, equivalence, inclusions, invariance, integrator.
    Verify {
        suite: String,
        /// Override every sample count of the suite.
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn resolve(common: &CommonArgs, samples: Option<usize>) -> CliResult<ExperimentConfig> {
    ExperimentConfig::resolve(common.config.as_deref(), &common.overrides(samples))
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) {
    let _ = writeln!(out, "{}", line.as_ref());
}

/// Runs one command, printing progress lines to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Check(common) => {
            let cfg = resolve(common, None)?;
            let rows = with_pool(cfg.jobs, || check::cmd_check(&cfg))?;
            say(out, format!("check: {} rows -> {}", rows.len(), cfg.out.join("check.csv").display()));
            for r in &rows {
                say(out, format!("{} {} {} margin={:.6e}", r.source, r.spec, r.decision.as_str(), r.margin));
            }
        }
        Command::Flow(common) => {
            let cfg = resolve(common, None)?;
            let result = with_pool(cfg.jobs, || flows::cmd_flow(&cfg));
            if let Ok(summaries) = &result {
                for s in summaries {
                    let closed = match &s.closed_form {
                        Some(c) if c.passed => "closed_form=pass",
                        Some(_) => "closed_form=fail",
                        None => "closed_form=n/a",
                    };
                    say(out, format!("{} {} steps={} t_end={:.6e} {} -> {}", s.source, s.terminated_by, s.steps, s.t_end, closed, cfg.out.join(&s.csv).display()));
                }
            }
            result?;
        }
        Command::Sweep(common) => {
            let cfg = resolve(common, None)?;
            let rows = with_pool(cfg.jobs, || sweep::cmd_sweep(&cfg))?;
            say(out, format!("sweep: {} rows -> {}", rows.len(), cfg.out.join("sweep.csv").display()));
        }
        Command::Verify { suite, samples, common } => {
            let cfg = resolve(common, *samples)?;
            let results = with_pool(cfg.jobs, || verify::run_suite(suite, &cfg))?;
            for r in &results {
                say(out, r.to_string());
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            say(out, format!("{suite}: {} passed, {failed} failed", results.len() - failed));
            if failed > 0 {
                return Err(CliError::new(
                    ErrorKind::VerificationFailed,
                    format!("{failed} propert{} of suite '{suite}' failed", if failed == 1 { "y" } else { "ies" }),
                ));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs, and returns the process exit code. Errors go to
/// `err` as a single line.
pub fn main_with(args: impl IntoIterator<Item = String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                let msg = "missing subcommand (check, flow, sweep or verify); see --help";
                let _ = writeln!(err, "{}", CliError::new(ErrorKind::Usage, msg).line());
                return ErrorKind::Usage.code();
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            let _ = writeln!(err, "{}", CliError::new(ErrorKind::Usage, first).line());
            return ErrorKind::Usage.code();
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.line());
            e.kind.code()
        }
    }
}
