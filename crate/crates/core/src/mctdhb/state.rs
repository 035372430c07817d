use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{self, CoefficientVector, FockBasis, ModeMatrix, ModeTensor4};
use crate::model::{inner, ComplexField, Grid};

/// Orthonormality and normalization tolerance for a valid state.
pub const STATE_TOLERANCE: f64 = 1e-8;

/// `|Psi> = sum_n C_n |n; t>` with `M` orbitals on a common grid.
#[derive(Debug, Clone)]
pub struct MctdhbState {
    pub grid: Grid,
    pub orbitals: Vec<ComplexField>,
    pub coefficients: CoefficientVector,
    pub t: f64,
    basis: Arc<FockBasis>,
}

impl MctdhbState {
    pub fn new(
        grid: Grid,
        orbitals: Vec<ComplexField>,
        coefficients: CoefficientVector,
        t: f64,
        basis: Arc<FockBasis>,
    ) -> Result<Self> {
        if orbitals.len() != basis.modes() {
            return Err(Error::DimensionMismatch(format!(
                "{} orbitals for a basis over {} modes",
                orbitals.len(),
                basis.modes()
            )));
        }
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a basis of {} configurations",
                coefficients.len(),
                basis.len()
            )));
        }
        for f in &orbitals {
            grid.check(f)?;
        }
        Ok(MctdhbState {
            grid,
            orbitals,
            coefficients,
            t,
            basis,
        })
    }

    pub fn particles(&self) -> usize {
        self.basis.particles()
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn shared_basis(&self) -> Arc<FockBasis> {
        Arc::clone(&self.basis)
    }

    /// `S[k, q] = <phi_k | phi_q>`
    pub fn gram(&self) -> ModeMatrix {
        let m = self.modes();
        let dx = self.grid.spacing();
        let mut s = DMatrix::zeros(m, m);
        for k in 0..m {
            for q in k..m {
                let v = inner(&self.orbitals[k], &self.orbitals[q], dx);
                s[(k, q)] = v;
                s[(q, k)] = v.conj();
            }
        }
        s
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let s = self.gram();
        let m = self.modes();
        let mut worst: f64 = 0.0;
        for k in 0..m {
            for q in 0..m {
                let target = if k == q { 1.0 } else { 0.0 };
                worst = worst.max((s[(k, q)] - target).norm());
            }
        }
        worst
    }

    pub fn coefficient_norm_sqr(&self) -> f64 {
        fock::coefficient_norm_sqr(&self.coefficients)
    }

    /// Checks orbital orthonormality and coefficient normalization.
    pub fn validate(&self) -> Result<()> {
        if !self.orbitals.iter().all(|f| f.is_finite()) || !self.coefficients.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("state contains non-finite values".into()));
        }
        let defect = self.orthonormality_defect();
        if defect > STATE_TOLERANCE {
            return Err(Error::InvalidInput(format!("orbitals not orthonormal (defect {defect:e})")));
        }
        let norm = self.coefficient_norm_sqr();
        if (norm - 1.0).abs() > STATE_TOLERANCE {
            return Err(Error::Unnormalized(norm));
        }
        Ok(())
    }

    /// `rho1[k,q] = <a+_k a_q>`, `rho2[k,s,q,l] = <a+_k a+_s a_l a_q>`.
    pub fn reduced_densities(&self) -> Result<(ModeMatrix, ModeTensor4)> {
        fock::reduced_densities(&self.coefficients, &self.basis)
    }

    pub fn one_body_density(&self) -> ModeMatrix {
        fock::one_body_density(&self.coefficients, &self.basis)
    }

    /// Multiplies orbital `k` by `exp(i theta_k)` and compensates in the
    /// coefficients, so the many-body state is unchanged.
    pub fn rephase(&mut self, phases: &[f64]) {
        for (f, &th) in self.orbitals.iter_mut().zip(phases) {
            f.scale(Complex64::from_polar(1.0, th));
        }
        let m = self.modes();
        for (i, c) in self.coefficients.iter_mut().enumerate() {
            let occ = self.basis.config(i);
            let total: f64 = (0..m).map(|k| occ[k] as f64 * phases[k]).sum();
            *c *= Complex64::from_polar(1.0, -total);
        }
    }

    /// Makes the largest-magnitude value of every orbital real positive while
    /// leaving the many-body state unchanged.
    pub fn pin_phases(&mut self) {
        let phases: Vec<f64> = self.orbitals.iter().map(|f| -largest(f).arg()).collect();
        self.rephase(&phases);
    }
}

fn largest(f: &[Complex64]) -> Complex64 {
    let mut best = Complex64::new(0.0, 0.0);
    for &z in f {
        if z.norm_sqr() > best.norm_sqr() {
            best = z;
        }
    }
    best
}
