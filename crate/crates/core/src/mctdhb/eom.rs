//! Equations of motion in the projector gauge:
//!
//! `i dC/dt = H C`,
//! `i dphi_j/dt = P [h phi_j + sum_k (rho1^-1)_jk G_k]`,
//! `G_k = g sum_{s,q,l} rho2[k,s,q,l] conj(phi_s) phi_q phi_l`.

use log::debug;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::Result;
use crate::fock::{self, ModeMatrix, ModeTensor4};
use crate::model::{inner, ComplexField, HamiltonianSpec};

use super::state::MctdhbState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative eigenvalue floor for the inverse of rho1 (times N).
pub const RHO1_FLOOR: f64 = 1e-8;

/// `h[k,q] = <phi_k|h|phi_q>` and `W[k,s,q,l] = g int conj(phi_k phi_s) phi_q phi_l`.
pub fn project_hamiltonian(
    orbitals: &[ComplexField],
    grid: &crate::model::Grid,
    spec: &HamiltonianSpec,
    t: f64,
) -> Result<(ModeMatrix, ModeTensor4)> {
    for f in orbitals {
        grid.check(f)?;
    }
    let m = orbitals.len();
    let dx = grid.spacing();
    let h_phi = apply_h(orbitals, grid, spec, t);
    let h = one_body_matrix(orbitals, &h_phi, dx);
    let mut w = ModeTensor4::zeros(m);
    let g = spec.g_at(t);
    if g != 0.0 {
        let pairs = PairProducts::new(orbitals);
        for (a, &(k, s)) in pairs.index.iter().enumerate() {
            for (b, &(q, l)) in pairs.index.iter().enumerate().skip(a) {
                let v = g * inner(&pairs.values[a], &pairs.values[b], dx);
                for (i1, i2) in [(k, s), (s, k)] {
                    for (j1, j2) in [(q, l), (l, q)] {
                        w.set(i1, i2, j1, j2, v);
                        w.set(j1, j2, i1, i2, v.conj());
                    }
                }
            }
        }
    }
    Ok((h, w))
}

fn apply_h(orbitals: &[ComplexField], grid: &crate::model::Grid, spec: &HamiltonianSpec, t: f64) -> Vec<ComplexField> {
    orbitals
        .iter()
        .map(|f| {
            let mut out = grid.zeros();
            spec.apply_one_body(f, grid, t, &mut out);
            out
        })
        .collect()
}

fn one_body_matrix(orbitals: &[ComplexField], h_phi: &[ComplexField], dx: f64) -> ModeMatrix {
    let m = orbitals.len();
    let mut h = DMatrix::zeros(m, m);
    for k in 0..m {
        for q in k..m {
            let v = inner(&orbitals[k], &h_phi[q], dx);
            h[(k, q)] = v;
            h[(q, k)] = v.conj();
        }
    }
    h
}

/// Products `phi_q phi_l` for `q <= l`.
struct PairProducts {
    index: Vec<(usize, usize)>,
    values: Vec<ComplexField>,
}

impl PairProducts {
    fn new(orbitals: &[ComplexField]) -> Self {
        let m = orbitals.len();
        let mut index = Vec::with_capacity(m * (m + 1) / 2);
        let mut values = Vec::with_capacity(m * (m + 1) / 2);
        for q in 0..m {
            for l in q..m {
                index.push((q, l));
                values.push(ComplexField(
                    orbitals[q].iter().zip(orbitals[l].iter()).map(|(a, b)| a * b).collect(),
                ));
            }
        }
        PairProducts { index, values }
    }
}

/// Regularized inverse of the Hermitian rho1; reports whether the floor was used.
pub fn regularized_inverse(rho1: &ModeMatrix, n_particles: usize) -> (ModeMatrix, bool) {
    let floor = RHO1_FLOOR * n_particles as f64;
    let eig = rho1.clone().symmetric_eigen();
    let mut engaged = false;
    let inv_vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&v| {
            if v < floor {
                engaged = true;
                1.0 / floor
            } else {
                1.0 / v
            }
        })
        .collect();
    let u = &eig.eigenvectors;
    let m = rho1.nrows();
    let mut inv = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let mut acc = ZERO;
            for (a, iv) in inv_vals.iter().enumerate() {
                acc += u[(j, a)] * *iv * u[(k, a)].conj();
            }
            inv[(j, k)] = acc;
        }
    }
    (inv, engaged)
}

/// Right-hand side pieces before the factor `-i` (real time) or `-1` (imaginary time).
#[derive(Debug, Clone)]
pub struct Generator {
    /// `H C`
    pub hc: Vec<Complex64>,
    /// `P [h phi_j + sum_k (rho1^-1)_jk G_k]`
    pub orbital: Vec<ComplexField>,
    /// `<C|H|C>`
    pub energy: f64,
    /// The rho1 eigenvalue floor was needed.
    pub regularized: bool,
}

/// The interaction route whose cost is lower for this basis.
fn use_pair_route(state: &MctdhbState) -> bool {
    let m = state.modes();
    match state.basis().reduced() {
        Some(red) => red.len() < m * (m + 1) / 2,
        None => false,
    }
}

pub fn generator(state: &MctdhbState, spec: &HamiltonianSpec) -> Result<Generator> {
    let t = state.t;
    let grid = &state.grid;
    let dx = grid.spacing();
    let n_pts = grid.n_points();
    let m = state.modes();
    let n = state.particles();
    let basis = state.basis();
    let c = &state.coefficients;
    let phi = &state.orbitals;

    let h_phi = apply_h(phi, grid, spec, t);
    let h = one_body_matrix(phi, &h_phi, dx);
    let mut hc = vec![ZERO; c.len()];
    basis.apply_one_body(c, &h, &mut hc);

    let g = spec.g_at(t);
    let mut interaction: Vec<ComplexField> = (0..m).map(|_| grid.zeros()).collect();
    if g != 0.0 && n >= 2 {
        if use_pair_route(state) {
            pair_route(state, g, &mut hc, &mut interaction);
        } else {
            explicit_route(state, g, &mut hc, &mut interaction);
        }
    }
    let energy = c.iter().zip(&hc).map(|(a, b)| (a.conj() * b).re).sum::<f64>();

    let rho1 = fock::one_body_density(c, basis);
    let (inv, regularized) = regularized_inverse(&rho1, n);
    let mut orbital = Vec::with_capacity(m);
    for j in 0..m {
        let mut f = h_phi[j].clone();
        for k in 0..m {
            let a = inv[(j, k)];
            if a != ZERO {
                f.axpy(a, &interaction[k]);
            }
        }
        let overlaps: Vec<Complex64> = phi.iter().map(|p| inner(p, &f, dx)).collect();
        for (p, o) in phi.iter().zip(overlaps) {
            f.axpy(-o, p);
        }
        debug_assert_eq!(f.len(), n_pts);
        orbital.push(f);
    }
    if regularized {
        debug!("rho1 regularization engaged at t = {t}");
    }
    Ok(Generator {
        hc,
        orbital,
        energy,
        regularized,
    })
}

/// Interaction through the `N-2` particle basis, `rho2` never formed:
/// `D_r[q,l] = <r|a_l a_q|C>`, `A_rk = sum_s D_r[k,s] phi_s`, `B_r = sum_q phi_q A_rq`,
/// `G_k = g sum_r conj(A_rk) B_r`, `(H C) += 1/2 sum_r E_r[k,s] a+_k a+_s |r>`.
fn pair_route(state: &MctdhbState, g: f64, hc: &mut [Complex64], interaction: &mut [ComplexField]) {
    let basis = state.basis();
    let red_len = basis.reduced().map_or(0, |r| r.len());
    let m = state.modes();
    let phi = &state.orbitals;
    let n_pts = state.grid.n_points();
    let dx = state.grid.spacing();
    let d = basis.pair_annihilation(&state.coefficients);
    let mut e = vec![ZERO; red_len * m * m];
    let mut a = vec![ZERO; m * n_pts];
    let mut b = vec![ZERO; n_pts];
    for r in 0..red_len {
        let dr = &d[r * m * m..(r + 1) * m * m];
        a.iter_mut().for_each(|v| *v = ZERO);
        for k in 0..m {
            let ak = &mut a[k * n_pts..(k + 1) * n_pts];
            for s in 0..m {
                let coef = dr[k * m + s];
                if coef != ZERO {
                    for (v, p) in ak.iter_mut().zip(phi[s].iter()) {
                        *v += coef * p;
                    }
                }
            }
        }
        b.iter_mut().for_each(|v| *v = ZERO);
        for q in 0..m {
            for ((v, p), aq) in b.iter_mut().zip(phi[q].iter()).zip(&a[q * n_pts..(q + 1) * n_pts]) {
                *v += p * aq;
            }
        }
        for k in 0..m {
            for ((out, ak), bv) in interaction[k].iter_mut().zip(&a[k * n_pts..(k + 1) * n_pts]).zip(&b) {
                *out += g * ak.conj() * bv;
            }
        }
        let er = &mut e[r * m * m..(r + 1) * m * m];
        for k in 0..m {
            for s in k..m {
                let mut acc = ZERO;
                for ((pk, ps), bv) in phi[k].iter().zip(phi[s].iter()).zip(&b) {
                    acc += (pk * ps).conj() * bv;
                }
                let v = g * dx * acc;
                er[k * m + s] = v;
                er[s * m + k] = v;
            }
        }
    }
    basis.add_pair_creation(&e, hc);
}

/// Interaction through explicit `W` and `rho2`.
fn explicit_route(state: &MctdhbState, g: f64, hc: &mut [Complex64], interaction: &mut [ComplexField]) {
    let basis = state.basis();
    let m = state.modes();
    let phi = &state.orbitals;
    let dx = state.grid.spacing();
    let c = &state.coefficients;
    let pairs = PairProducts::new(phi);
    let np = pairs.index.len();
    let mut w = ModeTensor4::zeros(m);
    for a in 0..np {
        let (k, s) = pairs.index[a];
        for b in a..np {
            let (q, l) = pairs.index[b];
            let v = g * inner(&pairs.values[a], &pairs.values[b], dx);
            for (i1, i2) in [(k, s), (s, k)] {
                for (j1, j2) in [(q, l), (l, q)] {
                    w.set(i1, i2, j1, j2, v);
                    w.set(j1, j2, i1, i2, v.conj());
                }
            }
        }
    }
    basis.add_two_body(c, &w, hc);

    let rho2 = fock::two_body_density(c, basis);
    let mut tmp = state.grid.zeros();
    for k in 0..m {
        for s in 0..m {
            tmp.iter_mut().for_each(|v| *v = ZERO);
            let mut any = false;
            for (p, &(q, l)) in pairs.index.iter().enumerate() {
                let mult = if q == l { 1.0 } else { 2.0 };
                let r = rho2.get(k, s, q, l) * mult;
                if r != ZERO {
                    any = true;
                    tmp.axpy(r, &pairs.values[p]);
                }
            }
            if !any {
                continue;
            }
            for ((out, ps), tv) in interaction[k].iter_mut().zip(phi[s].iter()).zip(tmp.iter()) {
                *out += g * ps.conj() * tv;
            }
        }
    }
}

/// Derivative of the state under real-time evolution.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub coefficients: Vec<Complex64>,
    pub orbitals: Vec<ComplexField>,
    /// The rho1 eigenvalue floor was needed.
    pub regularized: bool,
}

/// `dC/dt` and `dphi/dt` for real-time evolution.
pub fn eom_rhs(state: &MctdhbState, spec: &HamiltonianSpec) -> Result<StateDerivative> {
    let gen = generator(state, spec)?;
    let mi = Complex64::new(0.0, -1.0);
    Ok(StateDerivative {
        coefficients: gen.hc.iter().map(|v| mi * v).collect(),
        orbitals: gen
            .orbital
            .into_iter()
            .map(|mut f| {
                f.scale(mi);
                f
            })
            .collect(),
        regularized: gen.regularized,
    })
}
