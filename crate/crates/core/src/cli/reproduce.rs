//! Embedded reproduction cases with reference values and pass/fail checks.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{coupling_for_ratio, power_law_fit, width_bounds_check, Verdict, DEFAULT_WIDTH_SLACK};
use crate::error::{Error, Result};
use crate::exact2::{bound_state, exact_spdm, ground_state};
use crate::mctdhb::{
    init_product_state, max_stable_dt, propagate, relax, InitialShape, MctdhbState, PropagateOptions, RelaxOptions,
    TimeSeries, DEFAULT_DT,
};
use crate::model::{make_grid, Grid, HamiltonianSpec};
use crate::observables::{self, soliton_variance};

use super::artifacts::{csv_table, fmt17, ArtifactWriter};
use super::compare::compare;
use super::config::{parse_config, RunConfig};
use super::run::{run_parsed, ExitStatus, RunArtifacts, CODE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "fig1")]
    Fig1,
    #[serde(rename = "fig2")]
    Fig2,
    #[serde(rename = "fig3")]
    Fig3,
    #[serde(rename = "fig4")]
    Fig4,
    #[serde(rename = "tableS1")]
    TableS1,
    #[serde(rename = "figS2")]
    FigS2,
    #[serde(rename = "figS3")]
    FigS3,
    #[serde(rename = "figS4")]
    FigS4,
    #[serde(rename = "figS5")]
    FigS5,
}

impl Case {
    pub const ALL: [Case; 9] = [
        Case::Fig1,
        Case::Fig2,
        Case::Fig3,
        Case::Fig4,
        Case::TableS1,
        Case::FigS2,
        Case::FigS3,
        Case::FigS4,
        Case::FigS5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::Fig1 => "fig1",
            Case::Fig2 => "fig2",
            Case::Fig3 => "fig3",
            Case::Fig4 => "fig4",
            Case::TableS1 => "tableS1",
            Case::FigS2 => "figS2",
            Case::FigS3 => "figS3",
            Case::FigS4 => "figS4",
            Case::FigS5 => "figS5",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Case::ALL.iter().map(|c| c.name()).collect();
                Error::Config(format!("unknown case `{s}` (known: {})", names.join(", ")))
            })
    }
}

/// One comparison of a computed value against a reference band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
    /// Informational values never fail.
    pub informational: bool,
}

impl Check {
    fn band(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = lower.is_none_or(|lo| value >= lo) && upper.is_none_or(|hi| value <= hi) && value.is_finite();
        Check {
            name: name.into(),
            value,
            lower,
            upper,
            passed,
            informational: false,
        }
    }

    pub fn close(name: impl Into<String>, value: f64, reference: f64, tol: f64) -> Self {
        Check::band(name, value, Some(reference - tol), Some(reference + tol))
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::band(name, value, Some(bound), None)
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::band(name, value, None, Some(bound))
    }

    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Check::band(name, value, Some(lower), Some(upper))
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::band(name, if ok { 1.0 } else { 0.0 }, Some(1.0), None)
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Check {
            name: name.into(),
            value,
            lower: None,
            upper: None,
            passed: true,
            informational: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: Case,
    pub directory: PathBuf,
    pub checks: Vec<Check>,
    pub status: ExitStatus,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

// Table S1 reference values: (g, M, E / hbar omega_0, n1 / N, n2 / N).
// The g = -2, M = 1 energy is printed as -0.0915; the product-state
// (Gross-Pitaevskii) energy is positive at this coupling, so the sign is
// restored here.
pub const TABLE_S1_MCTDHB: [(f64, usize, f64, f64, f64); 10] = [
    (-3.1623, 1, -0.5787, 1.0, 0.0),
    (-3.1623, 3, -1.1451, 0.9342, 0.0536),
    (-3.1623, 5, -1.3817, 0.9062, 0.0701),
    (-3.1623, 8, -1.5546, 0.8846, 0.0825),
    (-3.1623, 10, -1.6213, 0.8761, 0.0872),
    (-2.0, 1, 0.0915, 1.0, 0.0),
    (-2.0, 3, -0.1356, 0.9613, 0.0316),
    (-2.0, 5, -0.2244, 0.9483, 0.0392),
    (-2.0, 8, -0.2788, 0.9387, 0.0451),
    (-2.0, 10, -0.3005, 0.9355, 0.0470),
];

/// Exact rows: (g, E / hbar omega_0, n1 / N, n2 / N).
pub const TABLE_S1_EXACT: [(f64, f64, f64, f64); 2] = [(-3.1623, -1.9527, 0.8251, 0.1142), (-2.0, -0.3993, 0.9202, 0.0563)];

/// `1 - N^-1 sum_{k<=10} n_k` of the exact state at g = -3.1623.
pub const EXACT_TAIL10: f64 = 1.4e-3;

pub const EXACT_ENERGY_TOL: f64 = 5e-4;
pub const EXACT_OCC_TOL: f64 = 1e-3;
pub const EXACT_TAIL_TOL: f64 = 2e-4;
pub const MCTDHB_ENERGY_TOL: f64 = 2e-3;
pub const MCTDHB_OCC_TOL: f64 = 2e-3;

/// Grid of the exact oracle rows: L = 14 lambda_0, 1400 points.
pub fn exact_grid() -> Grid {
    make_grid(14.0, 1400, 0.0).expect("valid grid")
}

/// Grid of the N = 2 relaxations: L = 14 lambda_0, 281 points.
pub fn table_grid() -> Grid {
    make_grid(14.0, 281, 0.0).expect("valid grid")
}

/// Trapped ground state from a Gaussian product state.
#[derive(Debug, Clone)]
pub struct GroundRow {
    pub g: f64,
    pub modes: usize,
    pub energy: f64,
    /// Natural occupation fractions, descending.
    pub occupations: Vec<f64>,
    pub sigma_r2: f64,
    pub sigma_n2: f64,
    pub regularized_steps: usize,
}

/// Imaginary-time relaxation in a unit trap with a step inside the RK4 stability region.
pub fn mctdhb_ground(n: usize, m: usize, g: f64, grid: &Grid) -> Result<(GroundRow, MctdhbState)> {
    let spec = HamiltonianSpec::stationary(1.0, g);
    let init = init_product_state(&InitialShape::Gaussian, n, m, grid, 1.0)?;
    let opts = RelaxOptions {
        dtau: DEFAULT_DT.min(0.8 * max_stable_dt(grid, &spec)),
        ..RelaxOptions::default()
    };
    let res = relax(&init, &spec, &opts)?;
    let moments = observables::moments(&res.state)?;
    let occ = observables::natural_occupancies(&res.state)?;
    let row = GroundRow {
        g,
        modes: m,
        energy: res.energy,
        occupations: occ.fractions(),
        sigma_r2: moments.com_variance,
        sigma_n2: moments.density_variance,
        regularized_steps: res.regularized_steps,
    };
    Ok((row, res.state))
}

#[derive(Debug, Clone)]
pub struct ExactRow {
    pub g: f64,
    pub energy: f64,
    /// Leading natural occupation fractions, descending.
    pub occupations: Vec<f64>,
    /// `1 - N^-1 sum_{k<=10} n_k`
    pub tail10: f64,
    pub sigma_n2: f64,
}

pub fn exact_row(g: f64, grid: &Grid) -> Result<ExactRow> {
    let exact = ground_state(g, grid)?;
    let spdm = exact_spdm(&exact, 0)?;
    Ok(ExactRow {
        g,
        energy: exact.energy,
        occupations: spdm.fractions().into_iter().take(12).collect(),
        tail10: spdm.tail_mass(10),
        sigma_n2: exact.density_variance(),
    })
}

/// Positions of local density maxima above 10% of the global maximum.
pub fn density_peaks(grid: &Grid, values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1] && values[i] > 0.1 * max)
        .map(|i| grid.x(i))
        .collect()
}

/// Runs `reproduce` for one case into `out_root/<case>`.
pub fn reproduce(case: Case, extended: bool, out_root: &Path) -> Result<CaseReport> {
    let target = out_root.join(case.name());
    let mut w = ArtifactWriter::new(&target)?;
    info!("reproducing {case} into {}", target.display());
    let (checks, status) = match case {
        Case::TableS1 => (table_s1(&mut w)?, ExitStatus::Success),
        Case::Fig1 => fig1(&mut w, extended)?,
        Case::Fig2 => fig2(&mut w)?,
        Case::Fig3 => (fig3(&mut w, &default_ratios(12))?, ExitStatus::Success),
        Case::Fig4 => (fig4(&mut w, &default_ratios(10))?, ExitStatus::Success),
        Case::FigS2 => (fig_s2(&mut w)?, ExitStatus::Success),
        Case::FigS3 => (fig_s3(&mut w)?, ExitStatus::Success),
        Case::FigS4 => (fig_s4(&mut w)?, ExitStatus::Success),
        Case::FigS5 => (fig_s5(&mut w)?, ExitStatus::Success),
    };
    let status = if status == ExitStatus::Success && !checks.iter().all(|c| c.passed) {
        ExitStatus::DiagnosticFailure
    } else {
        status
    };
    let mut text = String::from("name,value,lower,upper,passed,informational\n");
    for c in &checks {
        let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            c.name,
            fmt17(c.value),
            opt(c.lower),
            opt(c.upper),
            c.passed,
            c.informational
        );
    }
    w.write("checks.csv", text.as_bytes())?;
    let summary = serde_json::json!({
        "case": case.name(),
        "extended": extended,
        "code_version": CODE_VERSION,
        "passed": checks.iter().all(|c| c.passed),
        "exit_status": status,
        "checks": checks,
        "files": w.checksums(),
    });
    w.write_json("summary.json", &summary)?;
    let directory = w.commit()?;
    Ok(CaseReport {
        case,
        directory,
        checks,
        status,
    })
}

fn table_s1(w: &mut ArtifactWriter) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut text = String::from("method,g,M,energy,n1,n2,energy_ref,n1_ref,n2_ref\n");
    let exact_grid = exact_grid();
    for &(g, e_ref, n1_ref, n2_ref) in &TABLE_S1_EXACT {
        let row = exact_row(g, &exact_grid)?;
        let (n1, n2) = (row.occupations[0], row.occupations[1]);
        let _ = writeln!(
            text,
            "exact,{g},,{},{},{},{e_ref},{n1_ref},{n2_ref}",
            fmt17(row.energy),
            fmt17(n1),
            fmt17(n2)
        );
        checks.push(Check::close(format!("exact E g={g}"), row.energy, e_ref, EXACT_ENERGY_TOL));
        checks.push(Check::close(format!("exact n1 g={g}"), n1, n1_ref, EXACT_OCC_TOL));
        checks.push(Check::close(format!("exact n2 g={g}"), n2, n2_ref, EXACT_OCC_TOL));
        if g == -3.1623 {
            checks.push(Check::close(format!("exact tail10 g={g}"), row.tail10, EXACT_TAIL10, EXACT_TAIL_TOL));
        }
    }
    let grid = table_grid();
    for &(g, m, e_ref, n1_ref, n2_ref) in &TABLE_S1_MCTDHB {
        let (row, _) = mctdhb_ground(2, m, g, &grid)?;
        let n1 = row.occupations[0];
        let n2 = row.occupations.get(1).copied().unwrap_or(0.0);
        let _ = writeln!(
            text,
            "mctdhb,{g},{m},{},{},{},{e_ref},{n1_ref},{n2_ref}",
            fmt17(row.energy),
            fmt17(n1),
            fmt17(n2)
        );
        checks.push(Check::close(format!("M={m} E g={g}"), row.energy, e_ref, MCTDHB_ENERGY_TOL));
        checks.push(Check::close(format!("M={m} n1 g={g}"), n1, n1_ref, MCTDHB_OCC_TOL));
        checks.push(Check::close(format!("M={m} n2 g={g}"), n2, n2_ref, MCTDHB_OCC_TOL));
    }
    w.write("table_s1.csv", text.as_bytes())?;
    Ok(checks)
}

/// Fragmenton propagation settings: N = 1000, g = -0.008, sech product state, no trap.
pub const FRAGMENTON_CONFIG: &str = r#"
schema_version = 1

[system]
particles = 1000
modes = 2
units = "untrapped"

[grid]
length = 120.0
points = 3001

[hamiltonian]
omega = 0.0
g = -0.008

[initial]
kind = "product"
shape = "sech"
width = 1.0

[propagation]
t_final = 10.0
dt = 5e-5
record_every = 5000
snapshot_every = 2

[output]
directory = "m2"
"#;

/// Trap release of two bosons with M = 10 modes.
pub const RELEASE_CONFIG: &str = r#"
schema_version = 1

[system]
particles = 2
modes = 10
units = "trapped"

[grid]
length = 25.0
points = 600

[hamiltonian]
omega = 1.0
omega_switch = [[0.0, 0.0]]
g = -3.16

[initial]
kind = "relax"
shape = "gaussian"

[propagation]
t_final = 3.0
dt = 1e-3
record_every = 50
snapshot_every = 10

[diagnostics]
com_reference = "exact"
occupancy_threshold = 1e-3

[output]
directory = "m10"
"#;

fn embedded(text: &str, edit: impl FnOnce(&mut RunConfig)) -> Result<(RunConfig, String)> {
    let mut cfg = parse_config(text)?;
    edit(&mut cfg);
    cfg.validate()?;
    let text = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    Ok((cfg, text))
}

fn run_into(w: &ArtifactWriter, name: &str, text: &str, edit: impl FnOnce(&mut RunConfig)) -> Result<RunArtifacts> {
    let staging = w.staging().join(name);
    let (cfg, text) = embedded(text, |cfg| {
        edit(cfg);
        cfg.output.directory = staging;
    })?;
    run_parsed(&cfg, &text)
}

/// Fragmenton run with `m` modes (`g` overrides the coupling).
pub fn fragmenton_config(m: usize, g: f64) -> Result<RunConfig> {
    embedded(FRAGMENTON_CONFIG, |cfg| {
        cfg.system.modes = m;
        cfg.hamiltonian.g = g;
    })
    .map(|(c, _)| c)
}

/// Hump positions per density snapshot, `(t, peaks)`.
pub fn hump_history(grid: &Grid, series: &TimeSeries) -> Vec<(f64, Vec<f64>)> {
    series
        .snapshots
        .iter()
        .map(|(t, d)| (*t, density_peaks(grid, d)))
        .collect()
}

/// Checks on a fragmenton run against its g = 0 twin.
pub fn fragmenton_checks(m: usize, grid: &Grid, run: &TimeSeries, twin: &TimeSeries) -> Vec<Check> {
    let mut checks = Vec::new();
    let humps = hump_history(grid, run);
    let s0 = run.sigma_r2[0];
    let early_min = run
        .times
        .iter()
        .zip(&run.sigma_r2)
        .filter(|(t, _)| **t > 0.0 && **t <= 2.0)
        .map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::at_most(format!("M={m} early sigma_R2 min / sigma_R2(0)"), early_min / s0, 1.0 - 1e-3));
    let ratio = run.sigma_r2.last().copied().unwrap_or(f64::NAN) / twin.sigma_r2.last().copied().unwrap_or(f64::NAN);
    if m == 1 {
        let single = humps.iter().all(|(_, p)| p.len() == 1);
        checks.push(Check::holds("M=1 single hump at every snapshot", single));
        checks.push(Check::info("M=1 sigma_R2(10) / exact", ratio));
    } else {
        let late: Vec<&(f64, Vec<f64>)> = humps.iter().filter(|(t, _)| *t >= 7.0 - 1e-9).collect();
        let two = !late.is_empty() && late.iter().all(|(_, p)| p.len() == 2);
        checks.push(Check::holds(format!("M={m} two humps for t >= 7"), two));
        let sep = |p: &Vec<f64>| if p.len() == 2 { p[1] - p[0] } else { f64::NAN };
        if let (Some(first), Some(last)) = (late.first(), late.last()) {
            checks.push(Check::at_least(
                format!("M={m} hump separation growth t=7..10"),
                sep(&last.1) - sep(&first.1),
                0.0,
            ));
        }
        let onset = humps
            .windows(2)
            .find(|w| w[0].1.len() == 2 && w[1].1.len() == 2 && sep(&w[1].1) > sep(&w[0].1) && w[1].0 >= 5.0)
            .map_or(f64::NAN, |w| w[0].0);
        if m == 2 {
            checks.push(Check::within("M=2 outward motion onset t", onset, 5.0, 7.0));
            checks.push(Check::at_least("M=2 sigma_R2(10) / exact", ratio, 30.0));
        } else {
            checks.push(Check::info(format!("M={m} outward motion onset t"), onset));
            checks.push(Check::info(format!("M={m} sigma_R2(10) / exact"), ratio));
        }
    }
    checks
}

fn fig1(w: &mut ArtifactWriter, extended: bool) -> Result<(Vec<Check>, ExitStatus)> {
    let mut checks = Vec::new();
    let mut status = ExitStatus::Success;
    let twin = run_into(w, "twin_g0", FRAGMENTON_CONFIG, |c| {
        c.system.modes = 1;
        c.hamiltonian.g = 0.0;
        c.propagation.as_mut().expect("embedded").snapshot_every = 0;
    })?;
    status = status.worst(twin.exit_status());
    let increasing = twin.series.sigma_r2.windows(2).all(|p| p[1] > p[0]);
    checks.push(Check::holds("g=0 sigma_R2 increases monotonically", increasing));
    let modes: &[usize] = if extended { &[1, 2, 3] } else { &[1, 2] };
    let grid = make_grid(120.0, 3001, 0.0)?;
    for &m in modes {
        let run = run_into(w, &format!("m{m}"), FRAGMENTON_CONFIG, |c| c.system.modes = m)?;
        status = status.worst(run.exit_status());
        checks.extend(fragmenton_checks(m, &grid, &run.series, &twin.series));
        let report = compare(&run.directory, &twin.directory, 0.05, None)?.report;
        checks.push(Check::holds(
            format!("M={m} vs g=0 twin flagged unconverged"),
            report.verdict == Verdict::Unconverged,
        ));
    }
    Ok((checks, status))
}

fn fig2(w: &mut ArtifactWriter) -> Result<(Vec<Check>, ExitStatus)> {
    let mut checks = Vec::new();
    let run = run_into(w, "m10", RELEASE_CONFIG, |_| {})?;
    let mut status = run.exit_status();
    let n = 2;
    let lowest = run.series.lowest_fraction(n);
    checks.push(Check::at_most(
        "lowest occupancy fraction max over t",
        lowest.iter().copied().fold(0.0, f64::max),
        1e-3,
    ));
    checks.push(Check::info("relaxed n10/N", lowest[0]));
    let com = run.reports.iter().find(|r| r.test == "com_variance");
    let occ = run.reports.iter().find(|r| r.test == "occupancy_threshold");
    if let (Some(com), Some(occ)) = (com, occ) {
        checks.push(Check::at_least("peak |sigma_R2 / exact - 1|", com.metric, 0.15));
        checks.push(Check::holds(
            "occupancy check passes while COM check fails",
            occ.verdict == Verdict::Converged && com.verdict == Verdict::Unconverged,
        ));
    } else {
        checks.push(Check::holds("release run produced both diagnostics", false));
    }
    // The run is expected to fail its COM test; that is the reproduced result.
    if status == ExitStatus::DiagnosticFailure {
        status = ExitStatus::Success;
    }
    // The seeded tenth orbital carries fast components that reach the walls at
    // the 1e-6 level long before the bulk does.
    let variant = run_into(w, "m9_padded", RELEASE_CONFIG, |c| {
        c.initial.relax_modes = Some(9);
        c.propagation.as_mut().expect("embedded").edge_threshold = 1e-4;
    })?;
    status = status.worst(match variant.exit_status() {
        ExitStatus::DiagnosticFailure => ExitStatus::Success,
        s => s,
    });
    let divergence = run
        .series
        .sigma_r2
        .iter()
        .zip(&variant.series.sigma_r2)
        .map(|(a, b)| (b / a - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::info("M=9-optimised start: max |sigma_R2 ratio - 1|", divergence));
    let rows: Vec<Vec<f64>> = run
        .series
        .times
        .iter()
        .zip(&run.series.sigma_r2)
        .zip(&variant.series.sigma_r2)
        .map(|((&t, &a), &b)| vec![t, a, b])
        .collect();
    let cols = ["t", "sigma_R2_m10", "sigma_R2_m9_padded"].map(String::from);
    w.write("variant_divergence.csv", csv_table(&cols, &rows).as_bytes())?;
    Ok((checks, status))
}

/// Log-spaced length ratios `sigma_R / sigma_sol` over [0.05, 3].
pub fn default_ratios(count: usize) -> Vec<f64> {
    let (a, b) = (0.05f64.ln(), 3.0f64.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// One point of a ground-state scan over the length ratio.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub ratio: f64,
    pub g: f64,
    pub sigma_sol2: f64,
    /// Exact COM variance `lambda_0^2 / (2N)`.
    pub sigma_r2_exact: f64,
    pub exact_sigma_n2: Option<f64>,
    /// `(M, ground row)`
    pub mctdhb: Vec<GroundRow>,
}

/// Grid for an N-particle ground state: wide enough for the trap or soliton
/// scale, whichever is smaller, with about 20 points per that width.
pub fn scan_grid(n: usize, g: f64, points: usize) -> Result<Grid> {
    let width = std::f64::consts::FRAC_1_SQRT_2.min(soliton_variance(n, g)?.sqrt());
    make_grid(24.0 * width, points, 0.0)
}

/// Ground-state scan; the N = 2 points also carry the exact density variance.
pub fn ground_scan(n: usize, ratios: &[f64], modes: &[usize]) -> Result<Vec<ScanPoint>> {
    let mut out = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let g = coupling_for_ratio(ratio, n)?;
        let exact_sigma_n2 = if n == 2 {
            Some(ground_state(g, &exact_grid())?.density_variance())
        } else {
            None
        };
        let grid = if n == 2 {
            make_grid(14.0, 561, 0.0)?
        } else {
            scan_grid(n, g, 481)?
        };
        let mut mctdhb = Vec::new();
        for &m in modes {
            mctdhb.push(mctdhb_ground(n, m, g, &grid)?.0);
        }
        out.push(ScanPoint {
            ratio,
            g,
            sigma_sol2: soliton_variance(n, g)?,
            sigma_r2_exact: 1.0 / (2.0 * n as f64),
            exact_sigma_n2,
            mctdhb,
        });
        info!("scan N={n} ratio {ratio:.3} done");
    }
    Ok(out)
}

fn scan_csv(points: &[ScanPoint], modes: &[usize]) -> String {
    let mut cols: Vec<String> = ["ratio", "g", "sigma_sol2", "sigma_R2_exact", "sigma_n2_exact"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in modes {
        cols.push(format!("m{m}_sigma_R2"));
        cols.push(format!("m{m}_sigma_n2"));
        cols.push(format!("m{m}_lowest_occ"));
    }
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let mut r = vec![p.ratio, p.g, p.sigma_sol2, p.sigma_r2_exact, p.exact_sigma_n2.unwrap_or(f64::NAN)];
            for row in &p.mctdhb {
                r.push(row.sigma_r2);
                r.push(row.sigma_n2);
                r.push(row.occupations.last().copied().unwrap_or(f64::NAN));
            }
            r
        })
        .collect();
    csv_table(&cols, &rows)
}

/// Width bounds on every exact point of an N = 2 scan.
pub fn exact_bounds_checks(points: &[ScanPoint]) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for p in points {
        if let Some(sn2) = p.exact_sigma_n2 {
            let rep = width_bounds_check(p.sigma_r2_exact, sn2, p.sigma_sol2, DEFAULT_WIDTH_SLACK)?;
            checks.push(Check::holds(format!("exact width bounds ratio={:.3}", p.ratio), rep.passed()));
        }
    }
    Ok(checks)
}

fn fig3(w: &mut ArtifactWriter, ratios: &[f64]) -> Result<Vec<Check>> {
    let modes = [1, 3];
    let points = ground_scan(2, ratios, &modes)?;
    w.write("fig3.csv", scan_csv(&points, &modes).as_bytes())?;
    let mut checks = exact_bounds_checks(&points)?;
    let signal = points
        .iter()
        .find(|p| p.mctdhb[1].occupations.last().copied().unwrap_or(0.0) > 1e-3)
        .map_or(f64::NAN, |p| p.ratio);
    checks.push(Check::info("M=3 lowest occupancy first exceeds 1e-3 at ratio", signal));
    Ok(checks)
}

/// Qualitative N = 100 trend: weak traps give `sigma_n^2` close to the
/// soliton variance, and M = 1 and M = 3 barely differ.
pub fn n100_trend_checks(points: &[ScanPoint]) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let last = points.last().ok_or_else(|| Error::InvalidInput("empty scan".into()))?;
    for row in &last.mctdhb {
        checks.push(Check::within(
            format!("N=100 M={} sigma_n2/sigma_sol2 at ratio {:.2}", row.modes, last.ratio),
            row.sigma_n2 / last.sigma_sol2,
            0.8,
            1.25,
        ));
    }
    let spread = points
        .iter()
        .filter(|p| p.mctdhb.len() >= 2)
        .map(|p| (p.mctdhb[1].sigma_n2 / p.mctdhb[0].sigma_n2 - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("N=100 max |sigma_n2(M=3)/sigma_n2(M=1) - 1|", spread, 0.1));
    let first = &points[0];
    for row in &first.mctdhb {
        let rep = width_bounds_check(first.sigma_r2_exact, row.sigma_n2, first.sigma_sol2, DEFAULT_WIDTH_SLACK)?;
        checks.push(Check::holds(
            format!("N=100 M={} width bounds at ratio {:.2}", row.modes, first.ratio),
            rep.passed(),
        ));
    }
    Ok(checks)
}

fn fig4(w: &mut ArtifactWriter, ratios: &[f64]) -> Result<Vec<Check>> {
    let modes = [1, 3];
    let points = ground_scan(100, ratios, &modes)?;
    w.write("fig4.csv", scan_csv(&points, &modes).as_bytes())?;
    n100_trend_checks(&points)
}

pub const S2_COUPLINGS: [f64; 5] = [-0.5, -1.0, -2.0, -3.1623, -5.0];
pub const S2_MODES: [usize; 4] = [1, 3, 5, 10];

fn coupling_scan(modes: &[usize]) -> Result<Vec<GroundRow>> {
    let grid = table_grid();
    let mut rows = Vec::new();
    for &g in &S2_COUPLINGS {
        for &m in modes {
            rows.push(mctdhb_ground(2, m, g, &grid)?.0);
        }
    }
    Ok(rows)
}

fn fig_s2(w: &mut ArtifactWriter) -> Result<Vec<Check>> {
    let rows = coupling_scan(&S2_MODES)?;
    let mut text = String::from("g,M,sigma_R2,sigma_R2_exact,sigma_BS2\n");
    let mut checks = Vec::new();
    for r in &rows {
        let bs = bound_state(r.g)?;
        let _ = writeln!(text, "{},{},{},{},{}", r.g, r.modes, fmt17(r.sigma_r2), fmt17(0.25), fmt17(bs.variance));
        checks.push(Check::info(format!("M={} g={} sigma_R2/exact", r.modes, r.g), r.sigma_r2 / 0.25));
    }
    w.write("fig_s2.csv", text.as_bytes())?;
    Ok(checks)
}

fn fig_s3(w: &mut ArtifactWriter) -> Result<Vec<Check>> {
    let rows = coupling_scan(&[5, 10])?;
    let mut text = String::from("g,M,k,occupation\n");
    for r in &rows {
        for (k, v) in r.occupations.iter().enumerate() {
            let _ = writeln!(text, "{},{},{},{}", r.g, r.modes, k + 1, fmt17(*v));
        }
    }
    w.write("fig_s3.csv", text.as_bytes())?;
    let fifth = |m: usize| {
        rows.iter()
            .find(|r| r.modes == m && r.g == -2.0)
            .map_or(f64::NAN, |r| r.occupations[4])
    };
    Ok(vec![
        Check::at_most("g=-2 M=5 fifth occupation", fifth(5), 1e-3),
        Check::at_least("g=-2 M=10 fifth occupation", fifth(10), 1e-3),
    ])
}

/// Energies and density variances for M = 1..=10 at g = -2 with power-law fits.
pub struct ConvergenceScan {
    pub rows: Vec<GroundRow>,
    pub exact: ExactRow,
    pub energy_fit: crate::diagnostics::PowerLawFit,
    pub variance_fit: crate::diagnostics::PowerLawFit,
}

pub fn convergence_scan(g: f64, modes: &[usize]) -> Result<ConvergenceScan> {
    let grid = table_grid();
    let exact = exact_row(g, &exact_grid())?;
    let mut rows = Vec::new();
    for &m in modes {
        rows.push(mctdhb_ground(2, m, g, &grid)?.0);
    }
    let ms: Vec<usize> = rows.iter().map(|r| r.modes).collect();
    let de: Vec<f64> = rows.iter().map(|r| (r.energy - exact.energy).abs()).collect();
    let dv: Vec<f64> = rows.iter().map(|r| (r.sigma_n2 - exact.sigma_n2).abs()).collect();
    Ok(ConvergenceScan {
        energy_fit: power_law_fit(&ms, &de)?,
        variance_fit: power_law_fit(&ms, &dv)?,
        rows,
        exact,
    })
}

fn fig_s4(w: &mut ArtifactWriter) -> Result<Vec<Check>> {
    let modes: Vec<usize> = (1..=10).collect();
    let scan = convergence_scan(-2.0, &modes)?;
    let cols = ["M", "energy", "energy_exact", "sigma_n2", "sigma_n2_exact"].map(String::from);
    let rows: Vec<Vec<f64>> = scan
        .rows
        .iter()
        .map(|r| vec![r.modes as f64, r.energy, scan.exact.energy, r.sigma_n2, scan.exact.sigma_n2])
        .collect();
    w.write("fig_s4.csv", csv_table(&cols, &rows).as_bytes())?;
    let restricted = scan.energy_fit.restricted.as_ref().map_or(f64::NAN, |f| f.exponent);
    Ok(vec![
        Check::within("energy power-law exponent, M >= 6", restricted, -1.1, -0.4),
        Check::info("energy power-law exponent, all M", scan.energy_fit.full.exponent),
        Check::info(
            "density variance exponent, M >= 6",
            scan.variance_fit.restricted.as_ref().map_or(f64::NAN, |f| f.exponent),
        ),
    ])
}

/// Moments of a pair density on a grid: `(corr(x, y), sigma_R^2, sigma_r^2)`
/// with `R = (x + y)/2`, `r = x - y`.
pub fn pair_moments(grid: &Grid, rho2: &[f64]) -> (f64, f64, f64) {
    let n = grid.n_points();
    let (mut w, mut mx, mut mxx, mut mxy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let x = grid.x(i);
        for j in 0..n {
            let y = grid.x(j);
            let p = rho2[i * n + j];
            w += p;
            mx += x * p;
            mxx += x * x * p;
            mxy += x * y * p;
        }
    }
    let (mx, mxx, mxy) = (mx / w, mxx / w, mxy / w);
    let var = mxx - mx * mx;
    let cov = mxy - mx * mx;
    (cov / var, 0.5 * (var + cov), 2.0 * (var - cov))
}

fn pair_csv(grid: &Grid, rho2: &[f64], max_axis: usize) -> String {
    let n = grid.n_points();
    let stride = n.div_ceil(max_axis).max(1);
    let mut out = String::from("x,y,rho2\n");
    for i in (0..n).step_by(stride) {
        for j in (0..n).step_by(stride) {
            let _ = writeln!(out, "{},{},{}", fmt17(grid.x(i)), fmt17(grid.x(j)), fmt17(rho2[i * n + j]));
        }
    }
    out
}

fn fig_s5(w: &mut ArtifactWriter) -> Result<Vec<Check>> {
    let g = -1.0;
    let grid = make_grid(200.0, 2001, 0.0)?;
    let mut checks = Vec::new();
    let exact = ground_state(g, &grid)?;
    let rho2 = exact.two_body_density();
    let (c_exact, _, _) = pair_moments(&grid, &rho2);
    w.write("rho2_exact_t0.csv", pair_csv(&grid, &rho2, 201).as_bytes())?;
    checks.push(Check::at_least("exact COM-relative correlation at t=0", c_exact, 1e-3));
    let release = HamiltonianSpec::trap_release(1.0, g);
    let dt = 0.5 * 2.7 * 3.0 * grid.spacing().powi(2) / 8.0;
    let t_final = 30.0;
    let steps = (t_final / dt).ceil() as usize;
    let opts = PropagateOptions::new(t_final, t_final / steps as f64, steps);
    for m in [1usize, 5] {
        let (_, state) = mctdhb_ground(2, m, g, &grid)?;
        let rho2 = observables::two_body_density(&state)?;
        let (c0, _, _) = pair_moments(&grid, &rho2);
        w.write(&format!("rho2_m{m}_t0.csv"), pair_csv(&grid, &rho2, 201).as_bytes())?;
        let res = propagate(&state, &release, &opts)?;
        let rho2 = observables::two_body_density(&res.state)?;
        let (c30, _, sr2) = pair_moments(&grid, &rho2);
        w.write(&format!("rho2_m{m}_t30.csv"), pair_csv(&grid, &rho2, 201).as_bytes())?;
        if m == 1 {
            checks.push(Check::at_most("M=1 |correlation| at t=0", c0.abs(), 1e-8));
            checks.push(Check::at_most("M=1 |correlation| at t=30", c30.abs(), 1e-8));
        } else {
            checks.push(Check::info(format!("M={m} correlation at t=0"), c0));
            checks.push(Check::info(format!("M={m} correlation at t=30"), c30));
            let n = grid.n_points();
            let diag: Vec<f64> = (0..n).map(|i| rho2[i * n + i]).collect();
            checks.push(Check::info(
                format!("M={m} peaks along x=y at t=30"),
                density_peaks(&grid, &diag).len() as f64,
            ));
        }
        checks.push(Check::info(format!("M={m} relative variance at t=30"), sr2));
    }
    checks.push(Check::info("bound-state relative variance 2/g^2", bound_state(g)?.variance));
    Ok(checks)
}
