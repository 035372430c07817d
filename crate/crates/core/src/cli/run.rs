//! Configuration-driven runs: relax and/or propagate, diagnose, persist.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    com_convergence_against_law, com_convergence_test, occupancy_threshold_check, width_bounds_check,
    DiagnosticReport, Verdict,
};
use crate::error::{Error, Result};
use crate::mctdhb::{
    diagonalize_ci, init_product_state, pad_modes, propagate_partial, relax, InitialShape, MctdhbState, PropagateOptions,
    RelaxOptions, TimeSeries,
};
use crate::model::{make_grid, HamiltonianSpec, Schedule};
use crate::observables;

use super::artifacts::{csv_table, density_csv, sha256_hex, timeseries_csv, ArtifactWriter, StateDump};
use super::config::{load_config, ComReference, InitialKind, RunConfig, ShapeKind};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit status of a CLI command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success,
    Failure,
    SchemaError,
    PhysicsAbort,
    DiagnosticFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::SchemaError => 2,
            ExitStatus::PhysicsAbort => 3,
            ExitStatus::DiagnosticFailure => 4,
        }
    }

    /// Severity order used when several runs are combined.
    fn rank(self) -> u8 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::DiagnosticFailure => 1,
            ExitStatus::PhysicsAbort => 2,
            ExitStatus::SchemaError => 3,
            ExitStatus::Failure => 4,
        }
    }

    pub fn worst(self, other: ExitStatus) -> ExitStatus {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

/// Numerical breakdowns reported as physics aborts rather than usage errors.
pub fn is_physics_abort(e: &Error) -> bool {
    matches!(
        e,
        Error::BoxOverflow { .. }
            | Error::StepRejected { .. }
            | Error::NotConverged { .. }
            | Error::Unnormalized(_)
            | Error::Eigensolver(_)
            | Error::PrecisionLoss { .. }
            | Error::BoxTooSmall(_)
            | Error::BracketFailure { .. }
            | Error::GammaPole(_)
    )
}

pub fn exit_status(e: &Error) -> ExitStatus {
    match e {
        Error::Config(_) | Error::BasisTooLarge { .. } => ExitStatus::SchemaError,
        e if is_physics_abort(e) => ExitStatus::PhysicsAbort,
        _ => ExitStatus::Failure,
    }
}

/// Headline fields of one diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub test: String,
    pub verdict: Verdict,
    pub metric: f64,
    pub threshold: f64,
    pub advisory: bool,
}

impl From<&DiagnosticReport> for ReportSummary {
    fn from(r: &DiagnosticReport) -> Self {
        ReportSummary {
            test: r.test.clone(),
            verdict: r.verdict,
            metric: r.metric,
            threshold: r.threshold,
            advisory: r.advisory,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub code_version: String,
    pub config_hash: String,
    pub wall_time_s: f64,
    pub particles: usize,
    pub modes: usize,
    pub relaxed_energy: Option<f64>,
    pub final_energy: Option<f64>,
    pub final_time: Option<f64>,
    /// Verdict of the COM test when one ran, else of the width bounds.
    pub verdict: Option<Verdict>,
    pub reports: Vec<ReportSummary>,
    pub abort: Option<String>,
    pub regularized_steps: usize,
    pub projected_steps: usize,
    pub exit_status: ExitStatus,
    /// SHA-256 of every other file in the directory.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub directory: PathBuf,
    pub summary: Summary,
    /// Full diagnostic reports, also written to `diagnostics.json`.
    pub reports: Vec<DiagnosticReport>,
    pub series: TimeSeries,
}

impl RunArtifacts {
    pub fn exit_status(&self) -> ExitStatus {
        self.summary.exit_status
    }
}

/// Loads, validates and executes a configuration file.
pub fn run_config(path: &Path) -> Result<RunArtifacts> {
    let (cfg, text) = load_config(path)?;
    run_parsed(&cfg, &text)
}

struct Prepared {
    state: MctdhbState,
    relaxed_energy: Option<f64>,
}

fn shape(kind: ShapeKind) -> InitialShape {
    match kind {
        ShapeKind::Sech => InitialShape::Sech,
        ShapeKind::Gaussian => InitialShape::Gaussian,
    }
}

fn prepare(cfg: &RunConfig, spec: &HamiltonianSpec, w: &mut ArtifactWriter) -> Result<Prepared> {
    let grid = make_grid(cfg.grid.length, cfg.grid.points, cfg.grid.center)
        .map_err(|e| Error::Config(format!("[grid]: {e}")))?;
    let (n, m) = (cfg.system.particles, cfg.system.modes);
    let init = &cfg.initial;
    match init.kind {
        InitialKind::Product => Ok(Prepared {
            state: init_product_state(&shape(init.shape), n, m, &grid, init.width)?,
            relaxed_energy: None,
        }),
        InitialKind::Relax => {
            let m_relax = init.relax_modes.unwrap_or(m);
            let start = init_product_state(&shape(init.shape), n, m_relax, &grid, init.width)?;
            let opts = RelaxOptions {
                dtau: init.dtau,
                tolerance: init.tolerance,
                max_iters: init.max_iters,
                ..RelaxOptions::default()
            };
            let res = relax(&start, spec, &opts)?;
            let rows: Vec<Vec<f64>> = res.history.iter().map(|&(it, e, d)| vec![it as f64, e, d]).collect();
            let columns = ["iteration", "energy", "delta"].map(String::from);
            w.write("relaxation.csv", csv_table(&columns, &rows).as_bytes())?;
            info!("relaxed to E = {:.10} with M = {m_relax}", res.energy);
            let (state, energy) = if m_relax < m {
                // Orbitals optimised for fewer modes; coefficients from the CI
                // ground state in the padded configuration space.
                let mut padded = pad_modes(&res.state, m, init.width)?;
                let e = diagonalize_ci(&mut padded, &spec.initial_static())?;
                info!("padded to M = {m}, CI energy {e:.10}");
                (padded, e)
            } else {
                (res.state, res.energy)
            };
            Ok(Prepared {
                state,
                relaxed_energy: Some(energy),
            })
        }
        InitialKind::File => {
            let path = init.path.as_ref().expect("validated");
            let state = StateDump::load(path)?;
            if state.particles() != n || state.modes() != m || state.grid != grid {
                return Err(Error::Config(format!(
                    "{}: state has N = {}, M = {}, {} points; the configuration asks for N = {n}, M = {m}, {} points",
                    path.display(),
                    state.particles(),
                    state.modes(),
                    state.grid.n_points(),
                    grid.n_points()
                )));
            }
            Ok(Prepared {
                state,
                relaxed_energy: None,
            })
        }
    }
}

/// Exact COM variance after a single trap switch, for a start in the trapped ground state.
pub fn harmonic_com_law(n: usize, mass: f64, omega: &Schedule) -> impl Fn(f64) -> f64 {
    let w0 = omega.initial;
    let s0 = 1.0 / (2.0 * n as f64 * mass * w0);
    let (ts, w1) = omega.switches.first().copied().unwrap_or((f64::INFINITY, w0));
    move |t| {
        if t < ts {
            return s0;
        }
        let tau = t - ts;
        if w1 == 0.0 {
            s0 * (1.0 + (w0 * tau).powi(2))
        } else {
            let (s, c) = (w1 * tau).sin_cos();
            s0 * (c * c + (w0 / w1).powi(2) * s * s)
        }
    }
}

fn propagate_options(cfg: &RunConfig) -> Option<PropagateOptions> {
    cfg.propagation.as_ref().map(|p| PropagateOptions {
        t_final: p.t_final,
        dt: p.dt,
        record_every: p.record_every,
        snapshot_every: if cfg.output.snapshots { p.snapshot_every } else { 0 },
        edge_threshold: p.edge_threshold,
    })
}

/// Executes an already validated configuration; `text` is hashed into the summary.
pub fn run_parsed(cfg: &RunConfig, text: &str) -> Result<RunArtifacts> {
    let clock = Instant::now();
    let spec = cfg.hamiltonian()?;
    let mut w = ArtifactWriter::new(&cfg.output.directory)?;
    w.write("config.toml", text.as_bytes())?;
    let mut summary = Summary {
        code_version: CODE_VERSION.to_string(),
        config_hash: sha256_hex(text.as_bytes()),
        wall_time_s: 0.0,
        particles: cfg.system.particles,
        modes: cfg.system.modes,
        relaxed_energy: None,
        final_energy: None,
        final_time: None,
        verdict: None,
        reports: Vec::new(),
        abort: None,
        regularized_steps: 0,
        projected_steps: 0,
        exit_status: ExitStatus::Success,
        files: BTreeMap::new(),
    };
    let mut reports = Vec::new();
    let mut series = TimeSeries::default();

    let prepared = match prepare(cfg, &spec, &mut w) {
        Ok(p) => Some(p),
        Err(e) if is_physics_abort(&e) => {
            warn!("initial state preparation aborted: {e}");
            summary.abort = Some(e.to_string());
            summary.exit_status = ExitStatus::PhysicsAbort;
            None
        }
        Err(e) => return Err(e),
    };

    if let Some(prep) = prepared {
        summary.relaxed_energy = prep.relaxed_energy;
        let initial = prep.state;
        let n = initial.particles();
        let mut last = initial.clone();
        if let Some(opts) = propagate_options(cfg) {
            let (res, abort) = propagate_partial(&initial, &spec, &opts)?;
            summary.regularized_steps = res.regularized_steps;
            summary.projected_steps = res.projected_steps;
            series = res.series;
            last = res.state;
            if let Some(e) = abort {
                warn!("propagation aborted: {e}");
                summary.abort = Some(e.to_string());
                summary.exit_status = ExitStatus::PhysicsAbort;
            }
        } else {
            series.push(&initial, &spec, cfg.output.snapshots)?;
        }
        summary.final_energy = series.energy.last().copied();
        summary.final_time = series.times.last().copied();

        w.write("timeseries.csv", timeseries_csv(&series, n).as_bytes())?;
        let modes = series.occupations.first().map_or(0, |r| r.len());
        let mut occ_columns = vec!["t".to_string()];
        occ_columns.extend((1..=modes).map(|k| format!("n_{k}")));
        let occ_rows: Vec<Vec<f64>> = series
            .times
            .iter()
            .zip(&series.occupations)
            .map(|(&t, occ)| std::iter::once(t).chain(occ.iter().map(|v| v / n as f64)).collect())
            .collect();
        w.write("occupancy.csv", csv_table(&occ_columns, &occ_rows).as_bytes())?;
        if cfg.output.snapshots && !series.snapshots.is_empty() {
            w.write("density.csv", density_csv(&initial.grid, &series.snapshots).as_bytes())?;
        }
        w.write_json("final_state.json", &StateDump::from_state(&last))?;

        if summary.abort.is_none() {
            reports = diagnose(cfg, &spec, &initial, &series)?;
        }
    }

    for r in &reports {
        if r.test == "com_variance" && !r.rows.is_empty() {
            w.write("com_test.csv", csv_table(&r.columns, &r.rows).as_bytes())?;
        }
    }
    if !reports.is_empty() {
        w.write_json("diagnostics.json", &reports)?;
    }
    summary.reports = reports.iter().map(ReportSummary::from).collect();
    summary.verdict = reports
        .iter()
        .find(|r| r.test == "com_variance")
        .or_else(|| reports.iter().find(|r| r.test == "width_bounds"))
        .map(|r| r.verdict);
    if summary.exit_status == ExitStatus::Success
        && reports.iter().any(|r| !r.advisory && r.verdict == Verdict::Unconverged)
    {
        summary.exit_status = ExitStatus::DiagnosticFailure;
    }
    summary.files = w.checksums().clone();
    summary.wall_time_s = clock.elapsed().as_secs_f64();
    w.write_json("summary.json", &summary)?;
    let directory = w.commit()?;
    Ok(RunArtifacts {
        directory,
        summary,
        reports,
        series,
    })
}

fn diagnose(
    cfg: &RunConfig,
    spec: &HamiltonianSpec,
    initial: &MctdhbState,
    series: &TimeSeries,
) -> Result<Vec<DiagnosticReport>> {
    let diag = &cfg.diagnostics;
    let n = initial.particles();
    let mut reports = vec![occupancy_threshold_check(series, n, diag.occupancy_threshold)];
    match diag.com_reference {
        ComReference::None => {}
        ComReference::Exact => {
            let law = harmonic_com_law(n, spec.mass, &spec.omega);
            reports.push(com_convergence_against_law(series, law, diag.com_tolerance)?);
        }
        ComReference::Rerun => {
            let mut free = spec.clone();
            free.g = Schedule::constant(0.0);
            let opts = propagate_options(cfg).expect("validated");
            let (twin, abort) = propagate_partial(initial, &free, &PropagateOptions { snapshot_every: 0, ..opts })?;
            if let Some(e) = abort {
                return Err(e);
            }
            reports.push(com_convergence_test(series, &twin.series, diag.com_tolerance)?);
        }
    }
    if diag.width_bounds {
        let omega0 = spec.omega.initial;
        let sigma_r2 = 1.0 / (2.0 * n as f64 * spec.mass * omega0);
        let sigma_n2 = observables::density_variance(initial)?;
        let sigma_sol2 = observables::soliton_variance_with_mass(n, spec.g.initial, spec.mass)?;
        reports.push(width_bounds_check(sigma_r2, sigma_n2, sigma_sol2, diag.width_slack)?);
    }
    Ok(reports)
}
