//! Artifact files: CSV writers, state dumps and atomic output directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::enumerate_configs;
use crate::mctdhb::{MctdhbState, TimeSeries};
use crate::model::{ComplexField, Grid};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 17 significant digits, enough for an exact f64 round trip.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text from a header and numeric rows.
pub fn csv_table(columns: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `t, energy, sigma_R2, sigma_n2, occ_1..occ_M` with occupations as fractions of N.
pub fn timeseries_csv(series: &TimeSeries, n_particles: usize) -> String {
    let modes = series.occupations.first().map_or(0, |r| r.len());
    let mut columns: Vec<String> = ["t", "energy", "sigma_R2", "sigma_n2"].iter().map(|s| s.to_string()).collect();
    columns.extend((1..=modes).map(|k| format!("occ_{k}")));
    let n = n_particles as f64;
    let rows: Vec<Vec<f64>> = (0..series.len())
        .map(|i| {
            let mut row = vec![series.times[i], series.energy[i], series.sigma_r2[i], series.sigma_n2[i]];
            row.extend(series.occupations[i].iter().map(|v| v / n));
            row
        })
        .collect();
    csv_table(&columns, &rows)
}

/// Long-format density snapshots `t, x, density`.
pub fn density_csv(grid: &Grid, snapshots: &[(f64, Vec<f64>)]) -> String {
    let mut out = String::from("t,x,density\n");
    for (t, values) in snapshots {
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt17(*t), fmt17(grid.x(i)), fmt17(*v));
        }
    }
    out
}

/// Reads the `t` and `sigma_R2` columns (and everything else) back from a time-series CSV.
pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::InvalidInput(format!("{}: missing column `{name}`", path.display())))
    };
    let (ct, ce, cr, cn) = (col("t")?, col("energy")?, col("sigma_R2")?, col("sigma_n2")?);
    let occ_cols: Vec<usize> = (1..).map_while(|k| header.iter().position(|h| *h == format!("occ_{k}"))).collect();
    let mut series = TimeSeries::default();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", path.display(), lineno + 2)))?;
        if cells.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{}:{}: expected {} cells, found {}",
                path.display(),
                lineno + 2,
                header.len(),
                cells.len()
            )));
        }
        series.times.push(cells[ct]);
        series.energy.push(cells[ce]);
        series.sigma_r2.push(cells[cr]);
        series.sigma_n2.push(cells[cn]);
        series.occupations.push(occ_cols.iter().map(|&c| cells[c]).collect());
    }
    Ok(series)
}

/// Serialized MCTDHB state, the payload of `final_state.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDump {
    pub particles: usize,
    pub modes: usize,
    pub t: f64,
    pub grid: Grid,
    /// Per orbital, `[re, im]` per grid point.
    pub orbitals: Vec<Vec<[f64; 2]>>,
    /// `[re, im]` per configuration, basis in descending lexicographic order.
    pub coefficients: Vec<[f64; 2]>,
}

fn pairs(values: &[Complex64]) -> Vec<[f64; 2]> {
    values.iter().map(|z| [z.re, z.im]).collect()
}

fn complex(values: &[[f64; 2]]) -> Vec<Complex64> {
    values.iter().map(|p| Complex64::new(p[0], p[1])).collect()
}

impl StateDump {
    pub fn from_state(state: &MctdhbState) -> Self {
        StateDump {
            particles: state.particles(),
            modes: state.modes(),
            t: state.t,
            grid: state.grid,
            orbitals: state.orbitals.iter().map(|f| pairs(f)).collect(),
            coefficients: pairs(&state.coefficients),
        }
    }

    pub fn into_state(self) -> Result<MctdhbState> {
        let basis = Arc::new(enumerate_configs(self.particles, self.modes)?);
        let orbitals = self.orbitals.iter().map(|f| ComplexField(complex(f))).collect();
        MctdhbState::new(self.grid, orbitals, complex(&self.coefficients), self.t, basis)
    }

    pub fn load(path: &Path) -> Result<MctdhbState> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dump: StateDump =
            serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        dump.into_state()
    }
}

/// Collects files in a temporary sibling directory and moves it into place on [`commit`](Self::commit).
#[derive(Debug)]
pub struct ArtifactWriter {
    target: PathBuf,
    staging: PathBuf,
    files: BTreeMap<String, String>,
    committed: bool,
}

impl ArtifactWriter {
    pub fn new(target: &Path) -> Result<Self> {
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("output directory `{}` has no final component", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let staging = parent.join(format!(".{name}.tmp-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(ArtifactWriter {
            target: target.to_path_buf(),
            staging,
            files: BTreeMap::new(),
            committed: false,
        })
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    /// Directory the files are staged in until commit.
    pub fn staging(&self) -> &Path {
        &self.staging
    }

    /// Writes one file and records its checksum.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.staging.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(contents));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::InvalidInput(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Checksums of the files written so far.
    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    /// Replaces the target directory by the staged one.
    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            let old = self.staging.with_extension("old");
            fs::rename(&self.target, &old).map_err(|e| Error::io(&self.target, e))?;
            fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
            fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
        } else {
            fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// Recomputes the checksums listed in a `summary.json` and returns the names that do not match.
pub fn verify_checksums(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let summary: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let files = summary
        .get("files")
        .and_then(|f| f.as_object())
        .ok_or_else(|| Error::InvalidInput(format!("{}: no `files` table", path.display())))?;
    let mut bad = Vec::new();
    for (name, sum) in files {
        let file = dir.join(name);
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        if Some(sha256_hex(&bytes).as_str()) != sum.as_str() {
            bad.push(name.clone());
        }
    }
    Ok(bad)
}
