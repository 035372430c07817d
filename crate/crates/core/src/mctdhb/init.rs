use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{enumerate_configs, FockBasis};
use crate::model::{inner, ComplexField, Grid};

use super::state::MctdhbState;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialShape {
    /// `sech((x - x0)/width)`
    Sech,
    /// `exp(-(x - x0)^2 / (2 width^2))`
    Gaussian,
    /// Sampled values of the first orbital.
    Custom(Vec<Complex64>),
}

/// Product state `|N, 0, ..., 0>` with `phi_1` of the requested shape and the
/// remaining orbitals seeded as `phi_1 H_k` and Gram-Schmidt orthonormalized.
pub fn init_product_state(shape: &InitialShape, n: usize, m: usize, grid: &Grid, width: f64) -> Result<MctdhbState> {
    let basis = Arc::new(enumerate_configs(n, m)?);
    init_product_state_in(shape, basis, grid, width)
}

pub fn init_product_state_in(shape: &InitialShape, basis: Arc<FockBasis>, grid: &Grid, width: f64) -> Result<MctdhbState> {
    let m = basis.modes();
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidInput(format!("width must be positive, got {width}")));
    }
    let x0 = grid.center();
    let first = match shape {
        InitialShape::Sech => grid.sample(|x| Complex64::new(1.0 / ((x - x0) / width).cosh(), 0.0)),
        InitialShape::Gaussian => grid.sample(|x| {
            let u = (x - x0) / width;
            Complex64::new((-0.5 * u * u).exp(), 0.0)
        }),
        InitialShape::Custom(values) => {
            grid.check(values)?;
            ComplexField(values.clone())
        }
    };
    let mut orbitals = Vec::with_capacity(m);
    orbitals.push(first);
    for k in 1..m {
        let seed = ComplexField(
            orbitals[0]
                .iter()
                .enumerate()
                .map(|(i, v)| v * hermite(k, (grid.x(i) - x0) / width))
                .collect(),
        );
        orbitals.push(seed);
    }
    gram_schmidt(&mut orbitals, grid)?;
    let mut coefficients = vec![Complex64::new(0.0, 0.0); basis.len()];
    coefficients[0] = Complex64::new(1.0, 0.0);
    MctdhbState::new(*grid, orbitals, coefficients, 0.0, basis)
}

/// Physicists' Hermite polynomial `H_k(u)`.
pub fn hermite(k: usize, u: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * u);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = 2.0 * u * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
pub fn gram_schmidt(orbitals: &mut [ComplexField], grid: &Grid) -> Result<()> {
    let dx = grid.spacing();
    for k in 0..orbitals.len() {
        for _ in 0..2 {
            for j in 0..k {
                let (done, rest) = orbitals.split_at_mut(k);
                let o = inner(&done[j], &rest[0], dx);
                rest[0].axpy(-o, &done[j]);
            }
        }
        let norm = orbitals[k].norm_sqr(grid).sqrt();
        if !(norm > 1e-12) {
            return Err(Error::InvalidInput(format!("orbital {k} is linearly dependent on the previous ones")));
        }
        orbitals[k].scale(Complex64::new(1.0 / norm, 0.0));
    }
    Ok(())
}

/// Extends a state to `m_new` modes. The new orbitals are seeded as
/// `phi_1 H_k` and orthogonalized against the existing ones, which stay
/// untouched; the new modes start empty.
pub fn pad_modes(state: &MctdhbState, m_new: usize, width: f64) -> Result<MctdhbState> {
    let m = state.modes();
    if m_new < m {
        return Err(Error::InvalidInput(format!("cannot pad {m} modes down to {m_new}")));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidInput(format!("width must be positive, got {width}")));
    }
    state.validate()?;
    let basis = Arc::new(enumerate_configs(state.particles(), m_new)?);
    let grid = state.grid;
    let x0 = grid.center();
    let mut orbitals = state.orbitals.clone();
    let dx = grid.spacing();
    let mut k = 1;
    while orbitals.len() < m_new {
        let mut seed = ComplexField(
            state.orbitals[0]
                .iter()
                .enumerate()
                .map(|(i, v)| v * hermite(k, (grid.x(i) - x0) / width))
                .collect(),
        );
        k += 1;
        for _ in 0..2 {
            for o in &orbitals {
                let c = inner(o, &seed, dx);
                seed.axpy(-c, o);
            }
        }
        let norm = seed.norm_sqr(&grid).sqrt();
        if norm > 1e-6 {
            seed.scale(Complex64::new(1.0 / norm, 0.0));
            orbitals.push(seed);
        } else if k > 4 * m_new + 8 {
            return Err(Error::InvalidInput("could not seed independent orbitals for padding".into()));
        }
    }
    let mut coefficients = vec![Complex64::new(0.0, 0.0); basis.len()];
    let mut occ = vec![0u32; m_new];
    for (i, config) in state.basis().configs().enumerate() {
        occ[..m].copy_from_slice(config);
        coefficients[basis.index_of(&occ)] = state.coefficients[i];
    }
    MctdhbState::new(grid, orbitals, coefficients, state.t, basis)
}
