//! Atomic file output and run sidecars.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(&format!("creating {}", dir.display()), e))?;
    let ctx = || format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(&ctx(), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(&ctx(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(&ctx(), e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(&format!("serializing {}", path.display()), e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Full double precision in scientific notation; empty for `None`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Run metadata: the only place a wall-clock timestamp is written.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub timestamp: String,
    pub config: &'a ExperimentConfig,
    pub result: T,
}

pub fn write_sidecar<T: Serialize>(
    path: &Path,
    command: &str,
    config: &ExperimentConfig,
    result: T,
) -> CliResult<()> {
    let sidecar = Sidecar {
        tool: "curvlab",
        version: env!("CARGO_PKG_VERSION"),
        command,
        timestamp: chrono::Utc::now().to_rfc3339(),
        config,
        result,
    };
    write_json(path, &sidecar)
}

/// Renders rows with a header; every field is already a string.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io("formatting csv", e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::io("formatting csv", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -4.0, 1.0 / 3.0, 6.02e23, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn csv_quotes_commas() {
        let out = csv_table(&["spec"], &[vec!["LAB_E(0.1,0.2)".into()]]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "spec\n\"LAB_E(0.1,0.2)\"\n");
    }
}
