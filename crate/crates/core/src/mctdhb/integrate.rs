use log::{debug, info, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::apply_many_body_h;
use crate::model::{ComplexField, Grid, HamiltonianSpec};
use crate::observables;

use super::eom::{generator, project_hamiltonian};
use super::lanczos::lowest_eigenpair;
use super::state::MctdhbState;

/// Largest tolerated norm or orthonormality drift within one step.
pub const STEP_NORM_LIMIT: f64 = 1e-3;

/// Real-time drift above which the step result is projected back onto
/// normalized coefficients and orthonormal orbitals.
pub const REAL_TIME_PROJECT_ABOVE: f64 = 1e-10;

/// Relaxation gives up once the working step is this many times smaller than requested.
const MAX_BACKOFF: f64 = 1024.0;

/// Accepted relaxation steps before a reduced step is doubled again.
const RECOVER_AFTER: usize = 200;

/// Default time step in the run's units.
pub const DEFAULT_DT: f64 = 1e-3;

/// Fraction of particles allowed in the outer 5% of the box on either side.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    /// `<C|H|C>` of the state the step started from.
    pub energy: f64,
    /// Any RK stage needed the rho1 floor.
    pub regularized: bool,
    /// Real-time drift exceeded [`REAL_TIME_PROJECT_ABOVE`] and was projected out.
    pub projected: bool,
}

/// Largest explicit RK4 step that stays inside the stability region of the
/// discretized one-body operator (interaction not included).
pub fn max_stable_dt(grid: &Grid, spec: &HamiltonianSpec) -> f64 {
    let dx = grid.spacing();
    let kinetic = 8.0 / (3.0 * spec.mass * dx * dx);
    let w = spec.omega.initial.max(spec.omega.switches.iter().map(|s| s.1).fold(0.0, f64::max));
    let half = 0.5 * grid.length() + grid.center().abs();
    let potential = 0.5 * spec.mass * w * w * half * half;
    2.7 / (kinetic + potential)
}

struct Stage {
    dc: Vec<Complex64>,
    dphi: Vec<ComplexField>,
    energy: f64,
    regularized: bool,
}

fn derivative(state: &MctdhbState, spec: &HamiltonianSpec, mode: TimeMode) -> Result<Stage> {
    let gen = generator(state, spec)?;
    let (dc, dphi) = match mode {
        TimeMode::Real => {
            // Shifting H by <H> only changes the global phase and keeps the
            // RK4 phase error of large total energies out of the norm.
            let mi = Complex64::new(0.0, -1.0);
            let e = gen.energy;
            let dc = gen
                .hc
                .iter()
                .zip(&state.coefficients)
                .map(|(hv, c)| mi * (hv - e * c))
                .collect();
            let dphi = gen
                .orbital
                .into_iter()
                .map(|mut f| {
                    f.scale(mi);
                    f
                })
                .collect();
            (dc, dphi)
        }
        TimeMode::Imaginary => {
            let e = gen.energy;
            let dc = gen
                .hc
                .iter()
                .zip(&state.coefficients)
                .map(|(hv, c)| -(hv - e * c))
                .collect();
            let dphi = gen
                .orbital
                .into_iter()
                .map(|mut f| {
                    f.scale(Complex64::new(-1.0, 0.0));
                    f
                })
                .collect();
            (dc, dphi)
        }
    };
    Ok(Stage {
        dc,
        dphi,
        energy: gen.energy,
        regularized: gen.regularized,
    })
}

fn displaced(base: &MctdhbState, stage: &Stage, h: f64, time_shift: f64) -> MctdhbState {
    let mut s = base.clone();
    let hc = Complex64::new(h, 0.0);
    for (c, d) in s.coefficients.iter_mut().zip(&stage.dc) {
        *c += hc * d;
    }
    for (f, d) in s.orbitals.iter_mut().zip(&stage.dphi) {
        f.axpy(hc, d);
    }
    s.t += time_shift;
    s
}

/// One classical RK4 step.
pub fn step(state: &MctdhbState, spec: &HamiltonianSpec, dt: f64, mode: TimeMode) -> Result<MctdhbState> {
    step_with_info(state, spec, dt, mode).map(|(s, _)| s)
}

pub fn step_with_info(
    state: &MctdhbState,
    spec: &HamiltonianSpec,
    dt: f64,
    mode: TimeMode,
) -> Result<(MctdhbState, StepInfo)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let advance = if mode == TimeMode::Real { 1.0 } else { 0.0 };
    let k1 = derivative(state, spec, mode)?;
    let k2 = derivative(&displaced(state, &k1, 0.5 * dt, 0.5 * dt * advance), spec, mode)?;
    let k3 = derivative(&displaced(state, &k2, 0.5 * dt, 0.5 * dt * advance), spec, mode)?;
    let k4 = derivative(&displaced(state, &k3, dt, dt * advance), spec, mode)?;
    let mut next = state.clone();
    let w1 = Complex64::new(dt / 6.0, 0.0);
    let w2 = Complex64::new(dt / 3.0, 0.0);
    for (i, c) in next.coefficients.iter_mut().enumerate() {
        *c += w1 * (k1.dc[i] + k4.dc[i]) + w2 * (k2.dc[i] + k3.dc[i]);
    }
    for (j, f) in next.orbitals.iter_mut().enumerate() {
        for (i, v) in f.iter_mut().enumerate() {
            *v += w1 * (k1.dphi[j][i] + k4.dphi[j][i]) + w2 * (k2.dphi[j][i] + k3.dphi[j][i]);
        }
    }
    next.t = state.t + dt * advance;
    let norm_dev = (next.coefficient_norm_sqr() - 1.0).abs();
    let orth_dev = next.orthonormality_defect();
    let deviation = norm_dev.max(orth_dev);
    if !(deviation <= STEP_NORM_LIMIT) {
        return Err(Error::StepRejected {
            time: state.t,
            deviation,
        });
    }
    let project = mode == TimeMode::Imaginary || deviation > REAL_TIME_PROJECT_ABOVE;
    if project {
        let gram = next.gram();
        lowdin(&mut next.orbitals, &gram)?;
        let n = next.coefficient_norm_sqr().sqrt();
        next.coefficients.iter_mut().for_each(|c| *c /= n);
    }
    let info = StepInfo {
        energy: k1.energy,
        regularized: k1.regularized || k2.regularized || k3.regularized || k4.regularized,
        projected: project && mode == TimeMode::Real,
    };
    Ok((next, info))
}

/// Symmetric orthonormalization `phi' = phi S^(-1/2)`.
pub fn lowdin(orbitals: &mut [ComplexField], gram: &DMatrix<Complex64>) -> Result<()> {
    let m = orbitals.len();
    let eig = gram.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| !(v > 1e-14)) {
        return Err(Error::Eigensolver("orbital overlap matrix is singular".into()));
    }
    let u = &eig.eigenvectors;
    let mut s_inv_half = DMatrix::<Complex64>::zeros(m, m);
    for k in 0..m {
        for q in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, v) in eig.eigenvalues.iter().enumerate() {
                acc += u[(k, a)] * (1.0 / v.sqrt()) * u[(q, a)].conj();
            }
            s_inv_half[(k, q)] = acc;
        }
    }
    let old: Vec<ComplexField> = orbitals.to_vec();
    for (q, f) in orbitals.iter_mut().enumerate() {
        f.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (k, o) in old.iter().enumerate() {
            f.axpy(s_inv_half[(k, q)], o);
        }
    }
    Ok(())
}

/// Replaces the coefficients by the lowest CI eigenvector in the current orbitals.
pub fn diagonalize_ci(state: &mut MctdhbState, spec: &HamiltonianSpec) -> Result<f64> {
    let (h, w) = project_hamiltonian(&state.orbitals, &state.grid, spec, state.t)?;
    let basis = state.shared_basis();
    let dim = basis.len();
    let (e, v) = lowest_eigenpair(
        dim,
        |c| apply_many_body_h(c, &h, &w, &basis),
        &state.coefficients,
        1e-10,
    )?;
    state.coefficients = v;
    Ok(e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxOptions {
    pub dtau: f64,
    /// Convergence threshold on |E_i - E_{i-1}| per step.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Start from the lowest CI vector in the initial orbitals.
    pub diagonalize_ci: bool,
    /// Relax without a trap (hard walls only).
    pub allow_untrapped: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            dtau: 1e-3,
            tolerance: 1e-10,
            max_iters: 200_000,
            diagonalize_ci: true,
            allow_untrapped: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub state: MctdhbState,
    pub energy: f64,
    /// `(iteration, energy, energy delta)`
    pub history: Vec<(usize, f64, f64)>,
    pub regularized_steps: usize,
}

/// Imaginary-time relaxation with the pre-switch Hamiltonian.
pub fn relax(init: &MctdhbState, spec: &HamiltonianSpec, opts: &RelaxOptions) -> Result<GroundStateResult> {
    let spec = spec.initial_static();
    if !(spec.omega.initial > 0.0) && !opts.allow_untrapped {
        return Err(Error::InvalidInput(
            "relaxation needs a trap (omega > 0) unless untrapped relaxation is requested".into(),
        ));
    }
    if !(opts.tolerance > 0.0) || opts.max_iters == 0 {
        return Err(Error::InvalidInput("relaxation needs a positive tolerance and iteration budget".into()));
    }
    init.validate()?;
    let mut state = init.clone();
    if opts.diagonalize_ci && state.modes() > 1 {
        let e = diagonalize_ci(&mut state, &spec)?;
        debug!("initial CI energy {e}");
    }
    let mut history = Vec::new();
    let mut last = f64::NAN;
    let mut regularized_steps = 0;
    // A rejected step halves the working step; it is doubled back after a run
    // of accepted steps. Convergence is only judged at the configured step.
    let mut dtau = opts.dtau;
    let mut accepted = 0usize;
    for it in 0..opts.max_iters {
        let (next, info) = match step_with_info(&state, &spec, dtau, TimeMode::Imaginary) {
            Ok(v) => v,
            Err(Error::StepRejected { time, deviation }) => {
                if dtau < opts.dtau / MAX_BACKOFF {
                    return Err(Error::StepRejected { time, deviation });
                }
                dtau *= 0.5;
                accepted = 0;
                debug!("relaxation step rejected (deviation {deviation:e}); dtau -> {dtau:e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        if info.regularized {
            regularized_steps += 1;
        }
        let delta = info.energy - last;
        history.push((it, info.energy, if last.is_nan() { f64::NAN } else { delta }));
        if dtau == opts.dtau && delta.abs() < opts.tolerance {
            let mut state = state;
            state.pin_phases();
            let energy = observables::total_energy(&state, &spec, state.t)?;
            if regularized_steps > 0 {
                info!("rho1 regularization engaged in {regularized_steps} relaxation steps");
            }
            return Ok(GroundStateResult {
                state,
                energy,
                history,
                regularized_steps,
            });
        }
        last = info.energy;
        state = next;
        accepted += 1;
        if dtau < opts.dtau && accepted >= RECOVER_AFTER {
            dtau = (2.0 * dtau).min(opts.dtau);
            accepted = 0;
        }
    }
    let last_delta = history.last().map_or(f64::NAN, |h| h.2);
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        last_delta,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Record observables every this many steps.
    pub record_every: usize,
    /// Store the density every this many records (0 disables snapshots).
    pub snapshot_every: usize,
    pub edge_threshold: f64,
}

impl PropagateOptions {
    pub fn new(t_final: f64, dt: f64, record_every: usize) -> Self {
        PropagateOptions {
            t_final,
            dt,
            record_every,
            snapshot_every: 0,
            edge_threshold: DEFAULT_EDGE_THRESHOLD,
        }
    }
}

/// Observables recorded along a real-time run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub sigma_r2: Vec<f64>,
    pub sigma_n2: Vec<f64>,
    /// Natural occupancies per record, descending.
    pub occupations: Vec<Vec<f64>>,
    /// `(t, density on the grid)`
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Smallest occupation fraction `n_M / N` at each record.
    pub fn lowest_fraction(&self, n_particles: usize) -> Vec<f64> {
        self.occupations
            .iter()
            .map(|row| row.last().copied().unwrap_or(f64::NAN) / n_particles as f64)
            .collect()
    }

    /// Appends the observables of `state` at its own time.
    pub fn push(&mut self, state: &MctdhbState, spec: &HamiltonianSpec, snapshot: bool) -> Result<()> {
        let moments = observables::moments(state)?;
        self.times.push(state.t);
        self.energy.push(observables::total_energy(state, spec, state.t)?);
        self.sigma_r2.push(moments.com_variance);
        self.sigma_n2.push(moments.density_variance);
        self.occupations.push(observables::natural_occupancies(state)?.occupations);
        if snapshot {
            self.snapshots.push((state.t, observables::density(state)?.values));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub series: TimeSeries,
    pub state: MctdhbState,
    pub regularized_steps: usize,
    /// Steps whose norm or orthonormality drift was projected out.
    pub projected_steps: usize,
}

/// Real-time RK4 propagation to `t_final`.
pub fn propagate(init: &MctdhbState, spec: &HamiltonianSpec, opts: &PropagateOptions) -> Result<PropagationResult> {
    let (result, abort) = propagate_partial(init, spec, opts)?;
    match abort {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

/// Like [`propagate`] but hands back what was computed before a physics abort.
pub fn propagate_partial(
    init: &MctdhbState,
    spec: &HamiltonianSpec,
    opts: &PropagateOptions,
) -> Result<(PropagationResult, Option<Error>)> {
    if !(opts.t_final > 0.0) || !(opts.dt > 0.0) || opts.record_every == 0 {
        return Err(Error::InvalidInput(
            "propagation needs t_final > 0, dt > 0 and record_every >= 1".into(),
        ));
    }
    init.validate()?;
    let t0 = init.t;
    let n_steps = ((opts.t_final - t0) / opts.dt).round() as usize;
    if n_steps == 0 {
        return Err(Error::InvalidInput("t_final is not ahead of the initial time".into()));
    }
    let mut state = init.clone();
    let mut series = TimeSeries::default();
    let mut regularized_steps = 0;
    let mut projected_steps = 0;
    let mut records = 0usize;
    let snap = |records: usize| opts.snapshot_every > 0 && records % opts.snapshot_every == 0;
    series.push(&state, spec, snap(records))?;
    records += 1;
    for k in 0..n_steps {
        let target = t0 + (k + 1) as f64 * opts.dt;
        let outcome = advance_to(&state, spec, target);
        let (next, info) = match outcome {
            Ok(v) => v,
            Err(e) => {
                return Ok((
                    PropagationResult {
                        series,
                        state,
                        regularized_steps,
                        projected_steps,
                    },
                    Some(e),
                ))
            }
        };
        state = next;
        regularized_steps += info.regularized as usize;
        projected_steps += info.projected as usize;
        if (k + 1) % opts.record_every == 0 || k + 1 == n_steps {
            series.push(&state, spec, snap(records))?;
            records += 1;
            let edge = edge_fraction(&state)?;
            if edge > opts.edge_threshold {
                let e = Error::BoxOverflow { time: state.t, edge };
                return Ok((
                    PropagationResult {
                        series,
                        state,
                        regularized_steps,
                        projected_steps,
                    },
                    Some(e),
                ));
            }
        }
    }
    if regularized_steps > 0 {
        warn!("rho1 regularization engaged in {regularized_steps} of {n_steps} steps");
    }
    if projected_steps > 0 {
        info!("norm drift projected out in {projected_steps} of {n_steps} steps");
    }
    Ok((
        PropagationResult {
            series,
            state,
            regularized_steps,
            projected_steps,
        },
        None,
    ))
}

/// Steps from `state.t` to `target`, splitting at Hamiltonian switch times.
fn advance_to(state: &MctdhbState, spec: &HamiltonianSpec, target: f64) -> Result<(MctdhbState, StepInfo)> {
    let mut cur = state.clone();
    let mut merged = StepInfo::default();
    let mut stops = spec.switch_times(cur.t, target);
    stops.push(target);
    for stop in stops {
        let h = stop - cur.t;
        if h <= 1e-14 * stop.abs().max(1.0) {
            continue;
        }
        let (mut next, info) = step_with_info(&cur, spec, h, TimeMode::Real)?;
        next.t = stop;
        merged.energy = info.energy;
        merged.regularized |= info.regularized;
        merged.projected |= info.projected;
        cur = next;
    }
    Ok((cur, merged))
}

/// Fraction of particles in the outer 5% of the box on either side.
pub fn edge_fraction(state: &MctdhbState) -> Result<f64> {
    let rho = observables::density(state)?;
    let n = rho.values.len();
    let zone = (n / 20).max(3).min(n / 2);
    let dx = state.grid.spacing();
    let left: f64 = rho.values[..zone].iter().sum::<f64>() * dx;
    let right: f64 = rho.values[n - zone..].iter().sum::<f64>() * dx;
    Ok(left.max(right) / state.particles() as f64)
}

/// Largest relative change of the recorded `sigma_R^2` and `sigma_n^2` when `dt` is halved.
pub fn dt_halving_deviation(init: &MctdhbState, spec: &HamiltonianSpec, opts: &PropagateOptions) -> Result<f64> {
    let coarse = propagate(init, spec, opts)?;
    let mut fine_opts = opts.clone();
    fine_opts.dt = 0.5 * opts.dt;
    fine_opts.record_every = 2 * opts.record_every;
    let fine = propagate(init, spec, &fine_opts)?;
    let mut worst: f64 = 0.0;
    for (a, b) in coarse.series.sigma_r2.iter().zip(&fine.series.sigma_r2) {
        worst = worst.max((a - b).abs() / b.abs());
    }
    for (a, b) in coarse.series.sigma_n2.iter().zip(&fine.series.sigma_n2) {
        worst = worst.max((a - b).abs() / b.abs());
    }
    Ok(worst)
}
