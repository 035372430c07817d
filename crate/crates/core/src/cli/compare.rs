//! Comparison of archived runs and concurrent configuration scans.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diagnostics::{com_convergence_test, DiagnosticReport};
use crate::error::{Error, Result};

use super::artifacts::read_timeseries_csv;
use super::run::{exit_status, run_config, ExitStatus};

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: DiagnosticReport,
    pub written: Option<PathBuf>,
}

fn series_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("timeseries.csv")
    } else {
        p.to_path_buf()
    }
}

/// COM test of run `a` against reference run `b`; each may be an artifact
/// directory or a time-series CSV. The report is written to `out` when given.
pub fn compare(a: &Path, b: &Path, tol: f64, out: Option<&Path>) -> Result<CompareOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let sa = read_timeseries_csv(&series_path(a))?;
    let sb = read_timeseries_csv(&series_path(b))?;
    let report = com_convergence_test(&sa, &sb, tol)?;
    let written = match out {
        Some(path) => {
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
            text.push('\n');
            std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
            Some(path.to_path_buf())
        }
        None => None,
    };
    Ok(CompareOutcome { report, written })
}

#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub config: PathBuf,
    pub status: ExitStatus,
    /// Output directory on success, error message otherwise.
    pub detail: String,
}

/// Runs every configuration matching `pattern` concurrently, in path order.
pub fn scan(pattern: &str) -> Result<Vec<ScanEntry>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::InvalidInput(format!("bad glob `{pattern}`: {e}")))?
        .filter_map(|p| p.ok())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no configuration matches `{pattern}`")));
    }
    Ok(paths
        .into_par_iter()
        .map(|config| match run_config(&config) {
            Ok(art) => ScanEntry {
                status: art.exit_status(),
                detail: art.directory.display().to_string(),
                config,
            },
            Err(e) => ScanEntry {
                status: exit_status(&e),
                detail: e.to_string(),
                config,
            },
        })
        .collect())
}
