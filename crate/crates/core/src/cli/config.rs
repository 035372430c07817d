//! Run configuration: TOML with fixed sections and a `schema_version` key.
//!
//! ```toml
//! schema_version = 1
//!
//! [system]
//! particles = 2
//! modes = 10
//! units = "trapped"
//!
//! [grid]
//! length = 25.0
//! points = 600
//!
//! [hamiltonian]
//! omega = 1.0
//! omega_switch = [[0.0, 0.0]]
//! g = -3.16
//!
//! [initial]
//! kind = "relax"
//!
//! [propagation]
//! t_final = 3.0
//! dt = 1e-3
//! record_every = 100
//!
//! [diagnostics]
//! com_reference = "exact"
//!
//! [output]
//! directory = "runs/release"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mctdhb::{DEFAULT_DT, DEFAULT_EDGE_THRESHOLD};
use crate::model::{HamiltonianSpec, Schedule, UnitSystem};

pub const SCHEMA_VERSION: i64 = 1;

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "system",
    "grid",
    "hamiltonian",
    "initial",
    "propagation",
    "diagnostics",
    "output",
];
const SYSTEM_KEYS: &[&str] = &["particles", "modes", "units", "mass"];
const GRID_KEYS: &[&str] = &["length", "points", "center"];
const HAMILTONIAN_KEYS: &[&str] = &["omega", "omega_switch", "g", "g_switch"];
const INITIAL_KEYS: &[&str] = &[
    "kind",
    "shape",
    "width",
    "path",
    "dtau",
    "tolerance",
    "max_iters",
    "relax_modes",
];
const PROPAGATION_KEYS: &[&str] = &["t_final", "dt", "record_every", "snapshot_every", "edge_threshold"];
const DIAGNOSTICS_KEYS: &[&str] = &[
    "com_reference",
    "com_tolerance",
    "occupancy_threshold",
    "width_bounds",
    "width_slack",
];
const OUTPUT_KEYS: &[&str] = &["directory", "snapshots"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: i64,
    pub system: SystemBlock,
    pub grid: GridBlock,
    pub hamiltonian: HamiltonianBlock,
    pub initial: InitialBlock,
    #[serde(default)]
    pub propagation: Option<PropagationBlock>,
    #[serde(default)]
    pub diagnostics: DiagnosticsBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub particles: usize,
    pub modes: usize,
    pub units: UnitSystem,
    #[serde(default = "one")]
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub length: f64,
    pub points: usize,
    #[serde(default)]
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianBlock {
    pub omega: f64,
    /// `[[t, omega], ...]`: value in force from `t` on.
    #[serde(default)]
    pub omega_switch: Vec<(f64, f64)>,
    pub g: f64,
    #[serde(default)]
    pub g_switch: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// Imaginary-time relaxation in the pre-switch Hamiltonian.
    Relax,
    /// Product state `|N, 0, ..., 0>`.
    Product,
    /// A state written by a previous run (`final_state.json`).
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Sech,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    pub kind: InitialKind,
    #[serde(default = "gaussian")]
    pub shape: ShapeKind,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_dt")]
    pub dtau: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Relax with fewer modes and pad with seeded empty orbitals before propagating.
    #[serde(default)]
    pub relax_modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationBlock {
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_record")]
    pub record_every: usize,
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_edge")]
    pub edge_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComReference {
    /// No COM test.
    None,
    /// Closed-form harmonic law for a run started in the trapped ground
    /// state: `lambda_0^2/(2N) [cos^2(w1 t) + (w0/w1)^2 sin^2(w1 t)]` after a
    /// single trap switch `w0 -> w1`, ballistic for `w1 = 0`.
    Exact,
    /// Rerun of the same propagation with g = 0 for all times.
    Rerun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    #[serde(default = "default_reference")]
    pub com_reference: ComReference,
    #[serde(default = "default_com_tol")]
    pub com_tolerance: f64,
    #[serde(default = "default_occ")]
    pub occupancy_threshold: f64,
    #[serde(default)]
    pub width_bounds: bool,
    #[serde(default = "default_slack")]
    pub width_slack: f64,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        DiagnosticsBlock {
            com_reference: default_reference(),
            com_tolerance: default_com_tol(),
            occupancy_threshold: default_occ(),
            width_bounds: false,
            width_slack: default_slack(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    /// Write density snapshots when the propagation records them.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn gaussian() -> ShapeKind {
    ShapeKind::Gaussian
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_max_iters() -> usize {
    200_000
}
fn default_record() -> usize {
    100
}
fn default_edge() -> f64 {
    DEFAULT_EDGE_THRESHOLD
}
fn default_reference() -> ComReference {
    ComReference::None
}
fn default_com_tol() -> f64 {
    crate::diagnostics::DEFAULT_COM_TOLERANCE
}
fn default_occ() -> f64 {
    crate::diagnostics::DEFAULT_OCCUPANCY_THRESHOLD
}
fn default_slack() -> f64 {
    crate::diagnostics::DEFAULT_WIDTH_SLACK
}

fn check_keys(table: &toml::Table, allowed: &[&str], prefix: &str) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let path = if prefix.is_empty() {
                key.clone()
            } else {
                format!("{prefix}.{key}")
            };
            return Err(Error::Config(format!(
                "unknown key `{path}` (allowed here: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

/// Parses and validates a configuration; errors carry the key path or line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    check_keys(&table, TOP_KEYS, "")?;
    for (name, keys) in [
        ("system", SYSTEM_KEYS),
        ("grid", GRID_KEYS),
        ("hamiltonian", HAMILTONIAN_KEYS),
        ("initial", INITIAL_KEYS),
        ("propagation", PROPAGATION_KEYS),
        ("diagnostics", DIAGNOSTICS_KEYS),
        ("output", OUTPUT_KEYS),
    ] {
        match table.get(name) {
            Some(toml::Value::Table(t)) => check_keys(t, keys, name)?,
            Some(_) => return Err(Error::Config(format!("`{name}` must be a section"))),
            None => {}
        }
    }
    match table.get("schema_version") {
        Some(toml::Value::Integer(SCHEMA_VERSION)) => {}
        Some(v) => {
            return Err(Error::Config(format!(
                "unsupported schema_version {v}; this build reads version {SCHEMA_VERSION}"
            )))
        }
        None => return Err(Error::Config("missing key `schema_version`".into())),
    }
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<(RunConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((cfg, text))
}

fn positive(v: f64, key: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.system.particles == 0 {
            return Err(Error::Config("`system.particles` must be at least 1".into()));
        }
        if self.system.modes == 0 {
            return Err(Error::Config("`system.modes` must be at least 1".into()));
        }
        positive(self.system.mass, "system.mass")?;
        positive(self.grid.length, "grid.length")?;
        if self.grid.points < crate::model::Grid::MIN_POINTS {
            return Err(Error::Config(format!(
                "`grid.points` must be at least {}",
                crate::model::Grid::MIN_POINTS
            )));
        }
        if self.hamiltonian.omega < 0.0 || self.hamiltonian.omega_switch.iter().any(|s| s.1 < 0.0) {
            return Err(Error::Config("`hamiltonian.omega` values must be non-negative".into()));
        }
        positive(self.initial.width, "initial.width")?;
        positive(self.initial.dtau, "initial.dtau")?;
        positive(self.initial.tolerance, "initial.tolerance")?;
        match self.initial.kind {
            InitialKind::File if self.initial.path.is_none() => {
                return Err(Error::Config("`initial.path` is required for kind = \"file\"".into()))
            }
            InitialKind::Relax if self.hamiltonian.omega <= 0.0 => {
                return Err(Error::Config("relaxation needs `hamiltonian.omega` > 0".into()))
            }
            _ => {}
        }
        if let Some(rm) = self.initial.relax_modes {
            if rm == 0 || rm > self.system.modes || self.initial.kind != InitialKind::Relax {
                return Err(Error::Config(
                    "`initial.relax_modes` needs kind = \"relax\" and 1 <= value <= system.modes".into(),
                ));
            }
        }
        if let Some(p) = &self.propagation {
            positive(p.t_final, "propagation.t_final")?;
            positive(p.dt, "propagation.dt")?;
            if p.record_every == 0 {
                return Err(Error::Config("`propagation.record_every` must be at least 1".into()));
            }
            positive(p.edge_threshold, "propagation.edge_threshold")?;
        } else if self.diagnostics.com_reference != ComReference::None {
            return Err(Error::Config(
                "`diagnostics.com_reference` needs a [propagation] section".into(),
            ));
        }
        if self.diagnostics.com_reference == ComReference::Exact
            && (self.initial.kind != InitialKind::Relax || self.hamiltonian.omega_switch.len() > 1)
        {
            return Err(Error::Config(
                "`diagnostics.com_reference = \"exact\"` needs kind = \"relax\" and at most one omega switch".into(),
            ));
        }
        if self.diagnostics.width_bounds && (self.initial.kind != InitialKind::Relax || !(self.hamiltonian.g < 0.0)) {
            return Err(Error::Config(
                "`diagnostics.width_bounds` needs kind = \"relax\" and `hamiltonian.g` < 0".into(),
            ));
        }
        positive(self.diagnostics.com_tolerance, "diagnostics.com_tolerance")?;
        positive(self.diagnostics.occupancy_threshold, "diagnostics.occupancy_threshold")?;
        if self.diagnostics.width_slack < 0.0 {
            return Err(Error::Config("`diagnostics.width_slack` must be non-negative".into()));
        }
        Ok(())
    }

    pub fn hamiltonian(&self) -> Result<HamiltonianSpec> {
        let h = &self.hamiltonian;
        let omega = Schedule {
            initial: h.omega,
            switches: h.omega_switch.clone(),
        };
        let g = Schedule {
            initial: h.g,
            switches: h.g_switch.clone(),
        };
        HamiltonianSpec::new(self.system.mass, omega, g, self.system.units)
            .map_err(|e| Error::Config(format!("[hamiltonian]: {e}")))
    }
}
