//! Densities, natural occupancies and the width measures built from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeMatrix, ModeTensor4};
use crate::mctdhb::{project_hamiltonian, MctdhbState};
use crate::model::{ComplexField, Grid, HamiltonianSpec};

/// Largest grid accepted by [`two_body_density`] (points per axis).
pub const MAX_PAIR_GRID: usize = 4096;

/// Single-particle density on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Expected integral, the particle number.
    pub target: f64,
}

impl DensityProfile {
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.spacing()
    }

    /// `(mean, variance)` of the normalized profile.
    pub fn mean_and_variance(&self) -> (f64, f64) {
        let n = self.integral();
        let c = self.grid.center();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.x(i) - c;
            m1 += x * v;
            m2 += x * x * v;
        }
        let dx = self.grid.spacing();
        let mean = m1 * dx / n;
        (mean + c, m2 * dx / n - mean * mean)
    }
}

/// Natural occupancies sorted descending with their natural orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySpectrum {
    pub occupations: Vec<f64>,
    pub n_particles: f64,
    /// Natural orbitals for the leading occupations (may be fewer than `occupations`).
    pub orbitals: Vec<ComplexField>,
}

impl OccupancySpectrum {
    pub fn new(occupations: Vec<f64>, n_particles: f64, orbitals: Vec<ComplexField>) -> Self {
        OccupancySpectrum {
            occupations,
            n_particles,
            orbitals,
        }
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.occupations.iter().map(|v| v / self.n_particles).collect()
    }

    pub fn total(&self) -> f64 {
        self.occupations.iter().sum()
    }

    /// `1 - N^-1 sum_{k <= count} n_k`
    pub fn tail_mass(&self, count: usize) -> f64 {
        1.0 - self.occupations.iter().take(count).sum::<f64>() / self.n_particles
    }
}

/// Rotates `f` so its largest-magnitude value is real positive.
pub fn pin_phase(f: &mut ComplexField) {
    let mut best = Complex64::new(0.0, 0.0);
    for &z in f.iter() {
        if z.norm_sqr() > best.norm_sqr() {
            best = z;
        }
    }
    if best.norm() > 0.0 {
        f.scale(best.conj() / best.norm());
    }
}

fn density_from(state: &MctdhbState, rho1: &ModeMatrix) -> Vec<f64> {
    let m = state.modes();
    let phi = &state.orbitals;
    (0..state.grid.n_points())
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                let pk = phi[k][i].conj();
                for q in 0..m {
                    acc += rho1[(k, q)] * pk * phi[q][i];
                }
            }
            acc.re
        })
        .collect()
}

/// `rho(x) = sum_kq rho1[k,q] conj(phi_k(x)) phi_q(x)`
pub fn density(state: &MctdhbState) -> Result<DensityProfile> {
    let rho1 = state.one_body_density();
    Ok(DensityProfile {
        grid: state.grid,
        values: density_from(state, &rho1),
        target: state.particles() as f64,
    })
}

/// Eigenvalues of rho1 sorted descending; ties keep eigensolver order.
pub fn natural_occupancies(state: &MctdhbState) -> Result<OccupancySpectrum> {
    let rho1 = state.one_body_density();
    let m = state.modes();
    let eig = rho1.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let occupations = order.iter().map(|&a| eig.eigenvalues[a]).collect();
    let orbitals = order
        .iter()
        .map(|&a| {
            // chi_a = sum_q conj(V[q, a]) phi_q
            let mut f = state.grid.zeros();
            for q in 0..m {
                f.axpy(eig.eigenvectors[(q, a)].conj(), &state.orbitals[q]);
            }
            pin_phase(&mut f);
            f
        })
        .collect();
    Ok(OccupancySpectrum::new(occupations, state.particles() as f64, orbitals))
}

/// `rho2(x, y) = sum rho2[k,s,q,l] conj(phi_k(x) phi_s(y)) phi_q(x) phi_l(y)`,
/// row-major over `(x, y)`.
pub fn two_body_density(state: &MctdhbState) -> Result<Vec<f64>> {
    let n_pts = state.grid.n_points();
    if n_pts > MAX_PAIR_GRID {
        return Err(Error::InvalidInput(format!(
            "two-body density on {n_pts}^2 points exceeds the cap of {MAX_PAIR_GRID}^2"
        )));
    }
    let (_, rho2) = state.reduced_densities()?;
    let m = state.modes();
    let mm = m * m;
    let phi = &state.orbitals;
    // P[i][(k, q)] = conj(phi_k(x_i)) phi_q(x_i)
    let p: Vec<Complex64> = (0..n_pts)
        .flat_map(|i| (0..mm).map(move |kq| phi[kq / m][i].conj() * phi[kq % m][i]))
        .collect();
    // B[(k,q)][j] = sum_{s,l} rho2[k,s,q,l] P[j][(s,l)]
    let mut b = vec![Complex64::new(0.0, 0.0); mm * n_pts];
    for k in 0..m {
        for q in 0..m {
            let row = &mut b[(k * m + q) * n_pts..(k * m + q + 1) * n_pts];
            for s in 0..m {
                for l in 0..m {
                    let r = rho2.get(k, s, q, l);
                    if r == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for (j, v) in row.iter_mut().enumerate() {
                        *v += r * p[j * mm + s * m + l];
                    }
                }
            }
        }
    }
    let mut out = vec![0.0; n_pts * n_pts];
    for i in 0..n_pts {
        for kq in 0..mm {
            let a = p[i * mm + kq];
            let row = &b[kq * n_pts..(kq + 1) * n_pts];
            for (o, v) in out[i * n_pts..(i + 1) * n_pts].iter_mut().zip(row) {
                *o += (a * v).re;
            }
        }
    }
    Ok(out)
}

/// First and second moments shared by the variance measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// `<R>`, equal to the density mean.
    pub mean: f64,
    pub com_variance: f64,
    pub density_variance: f64,
}

/// `X[k,q] = int conj(phi_k) (x - c) phi_q` and the same with `(x - c)^2`.
fn position_matrices(state: &MctdhbState) -> (ModeMatrix, ModeMatrix) {
    let m = state.modes();
    let grid = &state.grid;
    let dx = grid.spacing();
    let c = grid.center();
    let mut x1 = ModeMatrix::zeros(m, m);
    let mut x2 = ModeMatrix::zeros(m, m);
    for k in 0..m {
        for q in k..m {
            let (mut a1, mut a2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (i, (pk, pq)) in state.orbitals[k].iter().zip(state.orbitals[q].iter()).enumerate() {
                let x = grid.x(i) - c;
                let v = pk.conj() * pq;
                a1 += x * v;
                a2 += x * x * v;
            }
            x1[(k, q)] = a1 * dx;
            x1[(q, k)] = (a1 * dx).conj();
            x2[(k, q)] = a2 * dx;
            x2[(q, k)] = (a2 * dx).conj();
        }
    }
    (x1, x2)
}

fn moments_from(state: &MctdhbState, rho1: &ModeMatrix, rho2: &ModeTensor4) -> Moments {
    let m = state.modes();
    let n = state.particles() as f64;
    let (x1, x2) = position_matrices(state);
    let mut first = Complex64::new(0.0, 0.0);
    let mut second = Complex64::new(0.0, 0.0);
    for k in 0..m {
        for q in 0..m {
            first += rho1[(k, q)] * x1[(k, q)];
            second += rho1[(k, q)] * x2[(k, q)];
        }
    }
    let mut pair = Complex64::new(0.0, 0.0);
    for k in 0..m {
        for s in 0..m {
            for q in 0..m {
                let a = x1[(k, q)];
                for l in 0..m {
                    pair += rho2.get(k, s, q, l) * a * x1[(s, l)];
                }
            }
        }
    }
    let mean = first.re / n;
    let r2 = (second.re + pair.re) / (n * n);
    Moments {
        mean: mean + state.grid.center(),
        com_variance: r2 - mean * mean,
        density_variance: second.re / n - mean * mean,
    }
}

pub fn moments(state: &MctdhbState) -> Result<Moments> {
    let (rho1, rho2) = state.reduced_densities()?;
    Ok(moments_from(state, &rho1, &rho2))
}

/// `sigma_R^2 = <R^2> - <R>^2`, `R = N^-1 sum_i x_i`, from mode-space contractions.
pub fn com_variance(state: &MctdhbState) -> Result<f64> {
    Ok(moments(state)?.com_variance)
}

/// `sigma_n^2 = N^-1 int x^2 rho - (N^-1 int x rho)^2`
pub fn density_variance(state: &MctdhbState) -> Result<f64> {
    let rho1 = state.one_body_density();
    let m = state.modes();
    let n = state.particles() as f64;
    let (x1, x2) = position_matrices(state);
    let (mut a, mut b) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for k in 0..m {
        for q in 0..m {
            a += rho1[(k, q)] * x1[(k, q)];
            b += rho1[(k, q)] * x2[(k, q)];
        }
    }
    let mean = a.re / n;
    Ok(b.re / n - mean * mean)
}

/// Variance of the Hartree bright-soliton density, `pi^2 / (3 g^2 m^2 (N-1)^2)` with hbar = 1.
pub fn soliton_variance(n: usize, g: f64) -> Result<f64> {
    soliton_variance_with_mass(n, g, 1.0)
}

pub fn soliton_variance_with_mass(n: usize, g: f64, mass: f64) -> Result<f64> {
    if g == 0.0 || !g.is_finite() {
        return Err(Error::InvalidInput(format!("soliton width diverges for g = {g}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("soliton needs N >= 2, got {n}")));
    }
    let nm1 = (n - 1) as f64;
    Ok(PI * PI / (3.0 * g * g * mass * mass * nm1 * nm1))
}

/// `E = sum h[k,q] rho1[k,q] + 1/2 sum W[k,s,q,l] rho2[k,s,q,l]`
pub fn total_energy(state: &MctdhbState, spec: &HamiltonianSpec, t: f64) -> Result<f64> {
    let (h, w) = project_hamiltonian(&state.orbitals, &state.grid, spec, t)?;
    let (rho1, rho2) = state.reduced_densities()?;
    let m = state.modes();
    let mut e = Complex64::new(0.0, 0.0);
    for k in 0..m {
        for q in 0..m {
            e += h[(k, q)] * rho1[(k, q)];
        }
    }
    let mut pair = Complex64::new(0.0, 0.0);
    for (a, b) in w.as_slice().iter().zip(rho2.as_slice()) {
        pair += a * b;
    }
    Ok((e + 0.5 * pair).re)
}
