//! Reproducibility headers and atomic artifact writes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

/// Embedded in every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command_line: String,
    pub seed: u64,
    pub rng: String,
    pub tolerances: Vec<(String, f64)>,
}

impl Meta {
    pub fn new(seed: u64, tolerances: &[(&str, f64)]) -> Self {
        let command_line = std::env::args().collect::<Vec<_>>().join(" ");
        Meta {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command_line,
            seed,
            rng: jclab::random::RNG_ALGORITHM.to_string(),
            tolerances: tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// `# key: value` lines for CSV artifacts.
    pub fn comment_lines(&self) -> String {
        let mut s = format!(
            "# {} {}\n# command: {}\n# seed: {}\n# rng: {}\n",
            self.tool, self.version, self.command_line, self.seed, self.rng
        );
        for (k, v) in &self.tolerances {
            s.push_str(&format!("# {k}: {}\n", fmt_f64(*v)));
        }
        s
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes next to `path` and renames into place, so a failed run leaves no
/// partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// CSV body preceded by the comment header.
pub fn csv_artifact(meta: &Meta, header: &[String], rows: &[Vec<f64>]) -> Result<Vec<u8>, CliError> {
    let mut out = meta.comment_lines().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
        }
        w.flush()?;
    }
    Ok(out)
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents)?;
            Ok(())
        }
    }
}
