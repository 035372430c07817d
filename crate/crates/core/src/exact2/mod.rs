//! Exact ground state of two bosons with contact attraction in a harmonic trap.
//!
//! Units: hbar = m = omega_0 = 1, so lengths are in lambda_0 and the coupling
//! is the dimensionless `g_tilde = g m lambda_0 / hbar^2`.

pub mod special;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ComplexField, Grid};
use crate::observables::OccupancySpectrum;

pub use special::{gamma_fn, kummer_u_half};

/// Residual of the ground-branch condition
/// `nu = (g / sqrt 2) Gamma(1 - nu/2) / Gamma(1/2 - nu/2)`.
pub fn nu_residual(nu: f64, g_tilde: f64) -> f64 {
    let ratio = if nu < 0.0 {
        (special::ln_gamma(1.0 - 0.5 * nu) - special::ln_gamma(0.5 - 0.5 * nu)).exp()
    } else {
        special::gamma_fn(1.0 - 0.5 * nu).unwrap_or(f64::NAN) * special::recip_gamma(0.5 - 0.5 * nu)
    };
    nu - g_tilde * FRAC_1_SQRT_2 * ratio
}

/// Ground-branch root `nu < 0` for attractive coupling.
pub fn solve_nu(g_tilde: f64) -> Result<f64> {
    if !(g_tilde < 0.0) || !g_tilde.is_finite() {
        return Err(Error::InvalidInput(format!("attractive branch needs g < 0, got {g_tilde}")));
    }
    let nu_min = -2.0 * (g_tilde * g_tilde / 4.0).ceil() - 2.0;
    let mut trace = String::new();
    let mut hi = 0.0;
    let mut f_hi = nu_residual(hi, g_tilde);
    // The residual has no poles for nu < 0; unit steps stay clear of
    // Gamma(1/2 - nu/2) poles at positive odd nu.
    while hi > nu_min {
        let lo = (hi - 1.0).max(nu_min);
        let f_lo = nu_residual(lo, g_tilde);
        trace.push_str(&format!("[{lo}, {hi}]: {f_lo:.3e}/{f_hi:.3e}; "));
        if f_lo.signum() != f_hi.signum() {
            return bisect(lo, hi, f_lo, g_tilde);
        }
        hi = lo;
        f_hi = f_lo;
    }
    Err(Error::BracketFailure { trace })
}

fn bisect(mut lo: f64, mut hi: f64, f_lo: f64, g: f64) -> Result<f64> {
    let s_lo = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = nu_residual(mid, g);
        if f == 0.0 || (f.abs() < 1e-13 && hi - lo < 1e-13) {
            return Ok(mid);
        }
        if f.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Trapped two-boson ground state `Psi(x1, x2) = psi0(R) phi0(r)`,
/// `R = (x1 + x2)/2`, `r = x2 - x1`.
#[derive(Debug, Clone)]
pub struct ExactTwoBoson {
    pub g_tilde: f64,
    pub nu: f64,
    /// Ground-state energy in units of hbar omega_0, `nu + 1`.
    pub energy: f64,
    pub grid: Grid,
    /// COM wave function sampled on `grid`.
    pub psi0: Vec<f64>,
    /// Relative wave function on `r_b = b dx`, `b = -(n-1) ..= n-1`.
    pub phi0: Vec<f64>,
    /// Normalization constant of the relative wave function.
    pub norm_a: f64,
}

/// `psi0(R) = (2/pi)^(1/4) exp(-R^2)`
pub fn com_ground(r: f64) -> f64 {
    (2.0 / PI).powf(0.25) * (-r * r).exp()
}

fn relative_unnormalized(nu: f64, r: f64) -> Result<f64> {
    let x = 0.5 * r * r;
    Ok((-0.5 * x).exp() * kummer_u_half(-0.5 * nu, x)?)
}

pub fn ground_state(g_tilde: f64, grid: &Grid) -> Result<ExactTwoBoson> {
    let nu = solve_nu(g_tilde)?;
    special::kummer_u_seam_check(-0.5 * nu)?;
    let n = grid.n_points();
    let dx = grid.spacing();
    let mut phi0 = Vec::with_capacity(2 * n - 1);
    for b in -(n as i64 - 1)..=(n as i64 - 1) {
        phi0.push(relative_unnormalized(nu, b as f64 * dx)?);
    }
    let peak = phi0[n - 1].abs().max(f64::MIN_POSITIVE);
    let edge = phi0[0].abs().max(phi0[2 * n - 2].abs()) / peak;
    if edge > 1e-8 {
        return Err(Error::BoxTooSmall(format!(
            "relative wave function is {edge:.2e} of its peak at |r| = {}",
            (n - 1) as f64 * dx
        )));
    }
    let com_edge = com_ground(0.5 * grid.length()) / com_ground(0.0);
    if com_edge > 1e-8 {
        return Err(Error::BoxTooSmall(format!("COM Gaussian is {com_edge:.2e} of its peak at the wall")));
    }
    let norm: f64 = phi0.iter().map(|v| v * v).sum::<f64>() * dx;
    let norm_a = 1.0 / norm.sqrt();
    phi0.iter_mut().for_each(|v| *v *= norm_a);
    let psi0 = (0..n).map(|i| com_ground(grid.x(i) - grid.center())).collect();
    Ok(ExactTwoBoson {
        g_tilde,
        nu,
        energy: nu + 1.0,
        grid: *grid,
        psi0,
        phi0,
        norm_a,
    })
}

impl ExactTwoBoson {
    fn phi_at_offset(&self, b: i64) -> f64 {
        self.phi0[(b + self.grid.n_points() as i64 - 1) as usize]
    }

    /// `Psi(x_i, x_j)` on the simulation grid.
    pub fn amplitude(&self, i: usize, j: usize) -> f64 {
        let r_com = 0.5 * (self.grid.x(i) + self.grid.x(j)) - self.grid.center();
        com_ground(r_com) * self.phi_at_offset(j as i64 - i as i64)
    }

    /// Two-body density `rho2(x, y) = 2 |Psi(x, y)|^2` on the grid, row-major.
    pub fn two_body_density(&self) -> Vec<f64> {
        let n = self.grid.n_points();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let a = self.amplitude(i, j);
                out.push(2.0 * a * a);
            }
        }
        out
    }

    /// `<r^2>` of the relative wave function.
    pub fn relative_second_moment(&self) -> f64 {
        let dx = self.grid.spacing();
        let n = self.grid.n_points() as i64;
        (-(n - 1)..=(n - 1))
            .map(|b| {
                let r = b as f64 * dx;
                let p = self.phi_at_offset(b);
                r * r * p * p
            })
            .sum::<f64>()
            * dx
    }

    /// COM variance; `lambda_0^2 / 4` for every coupling.
    pub fn com_variance(&self) -> f64 {
        0.25
    }

    /// Single-particle density variance `sigma_R^2 + <r^2>/4`.
    pub fn density_variance(&self) -> f64 {
        self.com_variance() + 0.25 * self.relative_second_moment()
    }

    /// Eigen-decomposition of the real symmetric kernel `Psi(x_i, x_j) dx`.
    fn amplitude_eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let n = self.grid.n_points();
        let dx = self.grid.spacing();
        let mat = DMatrix::from_fn(n, n, |i, j| self.amplitude(i, j) * dx);
        mat.symmetric_eigen()
    }
}

/// Natural occupancies of the exact state from
/// `rho(x, y) = 2 int dz Psi(x, z) Psi(y, z)`.
///
/// `Psi` is real symmetric, so the kernel is `2 Psi^2` and its eigenvalues are
/// `2 (mu dx)^2` for eigenvalues `mu` of `Psi dx`. Natural orbitals are kept for
/// the `keep_orbitals` largest occupancies.
pub fn exact_spdm(exact: &ExactTwoBoson, keep_orbitals: usize) -> Result<OccupancySpectrum> {
    let eig = exact.amplitude_eigen();
    let dx = exact.grid.spacing();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue in exact kernel".into()));
    }
    let mut order: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, mu)| (2.0 * mu * mu, i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let total: f64 = order.iter().map(|o| o.0).sum();
    let scale = 2.0 / total;
    let occupations: Vec<f64> = order.iter().map(|o| o.0 * scale).collect();
    let orbitals = order
        .iter()
        .take(keep_orbitals)
        .map(|&(_, i)| {
            let col = eig.eigenvectors.column(i);
            let mut f = ComplexField(col.iter().map(|v| Complex64::new(v / dx.sqrt(), 0.0)).collect());
            crate::observables::pin_phase(&mut f);
            f
        })
        .collect();
    Ok(OccupancySpectrum::new(occupations, 2.0, orbitals))
}

/// `sigma_R^2(t) = lambda_0^2 / (2N) [1 + (t / lambda_0^2)^2]` after release at t = 0.
pub fn com_spread_variance(t: f64, n_particles: usize, lambda0: f64) -> f64 {
    let l2 = lambda0 * lambda0;
    l2 / (2.0 * n_particles as f64) * (1.0 + (t / l2).powi(2))
}

/// Free-space bound state of the attractive delta interaction in the relative coordinate.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub g: f64,
    /// Sample points `r`.
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    /// `2 / g^2`
    pub variance: f64,
}

/// `phi_BS(r) = sqrt(|g|/2) exp(-|g| |r| / 2)` with hbar = m = 1.
pub fn bound_state(g: f64) -> Result<BoundState> {
    if !(g < 0.0) || !g.is_finite() {
        return Err(Error::InvalidInput(format!("bound state needs g < 0, got {g}")));
    }
    let kappa = 0.5 * g.abs();
    // rectangle rule error on the cusp is ~ (kappa dx)^2 / 3
    let dx = 5e-5 / kappa;
    let half = (20.0 / kappa / dx).ceil() as i64;
    let r: Vec<f64> = (-half..=half).map(|b| b as f64 * dx).collect();
    let phi = r.iter().map(|x| kappa.sqrt() * (-kappa * x.abs()).exp()).collect();
    Ok(BoundState {
        g,
        r,
        phi,
        variance: 2.0 / (g * g),
    })
}

impl BoundState {
    pub fn spacing(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    pub fn quadrature_norm(&self) -> f64 {
        self.phi.iter().map(|p| p * p).sum::<f64>() * self.spacing()
    }

    pub fn quadrature_variance(&self) -> f64 {
        self.r.iter().zip(&self.phi).map(|(r, p)| r * r * p * p).sum::<f64>() * self.spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_grid;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nu_root_values() {
        assert_abs_diff_eq!(solve_nu(-3.1623).unwrap(), -2.9527, epsilon = 5e-4);
        assert_abs_diff_eq!(solve_nu(-2.0).unwrap(), -1.3993, epsilon = 5e-4);
        // 30-digit references
        assert_abs_diff_eq!(solve_nu(-3.1623).unwrap(), -2.952_773_626_531_868_5, epsilon = 1e-11);
        assert_abs_diff_eq!(solve_nu(-1.0).unwrap(), -0.529_645_063_688_318_1, epsilon = 1e-11);
        assert_abs_diff_eq!(solve_nu(-10.0).unwrap(), -25.495_003_487_987_78, epsilon = 1e-10);
        let small = solve_nu(-1e-4).unwrap();
        assert!(small < 0.0 && small > -1e-4);
        assert!(solve_nu(0.0).is_err());
        assert!(solve_nu(1.0).is_err());
    }

    #[test]
    fn nu_residual_is_tiny_at_root() {
        for g in [-0.05, -1.0, -2.0, -3.1623, -6.0] {
            let nu = solve_nu(g).unwrap();
            assert!(nu_residual(nu, g).abs() < 1e-12, "g={g}");
        }
    }

    #[test]
    fn ground_state_basics() {
        let grid = make_grid(14.0, 401, 0.0).unwrap();
        let ex = ground_state(-3.1623, &grid).unwrap();
        assert_abs_diff_eq!(ex.energy, -1.9527, epsilon = 5e-4);
        let norm_phi: f64 = ex.phi0.iter().map(|v| v * v).sum::<f64>() * grid.spacing();
        assert_abs_diff_eq!(norm_phi, 1.0, epsilon = 1e-12);
        let norm_psi: f64 = ex.psi0.iter().map(|v| v * v).sum::<f64>() * grid.spacing();
        assert_abs_diff_eq!(norm_psi, 1.0, epsilon = 1e-8);
        let small = make_grid(3.0, 101, 0.0).unwrap();
        assert!(matches!(ground_state(-1.0, &small), Err(Error::BoxTooSmall(_))));
    }

    #[test]
    fn spread_and_bound_state() {
        assert_abs_diff_eq!(com_spread_variance(0.0, 2, 1.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(com_spread_variance(1.0, 2, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(com_spread_variance(0.0, 100, 1.0), 0.005, epsilon = 1e-15);
        let b = bound_state(-1.0).unwrap();
        assert_abs_diff_eq!(b.variance, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.quadrature_norm(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(b.quadrature_variance(), b.variance, epsilon = 1e-8 * b.variance.max(1.0));
        let b = bound_state(-2.0).unwrap();
        assert_abs_diff_eq!(b.variance, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.quadrature_norm(), 1.0, epsilon = 1e-8);
        assert!(bound_state(0.5).is_err());
    }

    #[test]
    fn strong_coupling_trend() {
        let mut last = f64::INFINITY;
        for g in [-2.0, -4.0, -8.0, -16.0] {
            let e = solve_nu(g).unwrap() + 1.0;
            let corr = (e + g * g / 4.0 - 0.5).abs();
            assert!(corr < last, "g={g}: {corr} !< {last}");
            last = corr;
        }
    }
}
