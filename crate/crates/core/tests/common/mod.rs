//! Property checks shared by the property tests and the acceptance runner.
//! Each check returns `Err(description)` on the first violated bound.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use comcheck::fock::{apply_many_body_h, enumerate_configs, reduced_densities, FockBasis, ModeMatrix, ModeTensor4};
use comcheck::mctdhb::{
    dt_halving_deviation, eom_rhs, init_product_state, project_hamiltonian, propagate, relax, InitialShape,
    MctdhbState, PropagateOptions, RelaxOptions,
};
use comcheck::model::{laplacian5, make_grid, ComplexField, Grid, HamiltonianSpec};
use comcheck::observables::{com_variance, density_variance, moments, natural_occupancies, total_energy};

pub type Check = Result<(), String>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cplx(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_coefficients(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    let mut c: Vec<Complex64> = (0..len).map(|_| cplx(rng)).collect();
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= norm);
    c
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, m: usize) -> ModeMatrix {
    let a = DMatrix::from_fn(m, m, |_, _| cplx(rng));
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_unitary(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, m, |_, _| cplx(rng)).qr().q()
}

/// Contact-type tensor `W[k,s,q,l] = sum_p conj(a_k(p) a_s(p)) a_q(p) a_l(p)`,
/// which has every bosonic and conjugation symmetry by construction.
pub fn random_contact_tensor(rng: &mut ChaCha8Rng, m: usize) -> ModeTensor4 {
    let points = 5;
    let a: Vec<Vec<Complex64>> = (0..m).map(|_| (0..points).map(|_| cplx(rng)).collect()).collect();
    let mut w = ModeTensor4::zeros(m);
    for k in 0..m {
        for s in 0..m {
            for q in 0..m {
                for l in 0..m {
                    let v: Complex64 = (0..points).map(|p| (a[k][p] * a[s][p]).conj() * a[q][p] * a[l][p]).sum();
                    w.set(k, s, q, l, v);
                }
            }
        }
    }
    w
}

/// Ladder operators applied right to left: `ops[0]` acts first.
/// `(true, k)` is a creator on mode k, `(false, k)` an annihilator.
fn ladder(ops: &[(bool, usize)], occ: &[u32]) -> Option<(Vec<u32>, f64)> {
    let mut occ = occ.to_vec();
    let mut amp = 1.0;
    for &(create, k) in ops {
        if create {
            occ[k] += 1;
            amp *= (occ[k] as f64).sqrt();
        } else {
            if occ[k] == 0 {
                return None;
            }
            amp *= (occ[k] as f64).sqrt();
            occ[k] -= 1;
        }
    }
    Some((occ, amp))
}

fn all_configs(n: u32, m: usize) -> Vec<Vec<u32>> {
    if m == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in all_configs(n - first, m - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Dense many-body Hamiltonian built from explicit ladder-operator action,
/// indexed in the order of `basis`.
pub fn dense_hamiltonian(h: &ModeMatrix, w: &ModeTensor4, basis: &FockBasis) -> DMatrix<Complex64> {
    let m = basis.modes();
    let index: HashMap<Vec<u32>, usize> = (0..basis.len()).map(|i| (basis.config(i).to_vec(), i)).collect();
    let mut dense = DMatrix::from_element(basis.len(), basis.len(), ZERO);
    for j in 0..basis.len() {
        let occ = basis.config(j);
        for k in 0..m {
            for q in 0..m {
                if let Some((out, amp)) = ladder(&[(false, q), (true, k)], occ) {
                    dense[(index[&out], j)] += h[(k, q)] * amp;
                }
                for s in 0..m {
                    for l in 0..m {
                        if let Some((out, amp)) = ladder(&[(false, q), (false, l), (true, s), (true, k)], occ) {
                            dense[(index[&out], j)] += 0.5 * w.get(k, s, q, l) * amp;
                        }
                    }
                }
            }
        }
    }
    dense
}

/// `<C| ops |C>` by explicit ladder action.
fn expectation(c: &[Complex64], basis: &FockBasis, ops: &[(bool, usize)]) -> Complex64 {
    let index: HashMap<Vec<u32>, usize> = (0..basis.len()).map(|i| (basis.config(i).to_vec(), i)).collect();
    let mut acc = ZERO;
    for (j, cj) in c.iter().enumerate() {
        if let Some((out, amp)) = ladder(ops, basis.config(j)) {
            acc += c[index[&out]].conj() * amp * cj;
        }
    }
    acc
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// The enumerated basis holds every configuration exactly once, in descending
/// lexicographic order, with `C(N+M-1, N)` entries.
pub fn basis_enumeration() -> Check {
    for n in 1..=4u32 {
        for m in 1..=4 {
            let basis = enumerate_configs(n as usize, m).map_err(|e| e.to_string())?;
            let mut expected = all_configs(n, m);
            expected.sort_by(|a, b| b.cmp(a));
            let got: Vec<Vec<u32>> = basis.configs().map(|c| c.to_vec()).collect();
            check(got == expected, || format!("N={n} M={m}: enumeration differs from brute force"))?;
            for (i, c) in got.iter().enumerate() {
                check(basis.index_of(c) == i, || format!("N={n} M={m}: rank of {c:?} is not {i}"))?;
            }
        }
    }
    Ok(())
}

/// `apply_many_body_h` against the dense ladder-operator matrix for N, M <= 3,
/// plus reality of the energy expectation.
pub fn matvec_matches_dense(seed: u64) -> Check {
    let mut rng = rng(seed);
    for n in 1..=3 {
        for m in 1..=3 {
            let basis = enumerate_configs(n, m).map_err(|e| e.to_string())?;
            let h = random_hermitian(&mut rng, m);
            let w = random_contact_tensor(&mut rng, m);
            let c = random_coefficients(&mut rng, basis.len());
            let fast = apply_many_body_h(&c, &h, &w, &basis).map_err(|e| e.to_string())?;
            let dense = dense_hamiltonian(&h, &w, &basis);
            let slow = &dense * DMatrix::from_column_slice(c.len(), 1, &c);
            let err = fast.iter().zip(slow.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            check(err < 1e-12, || format!("N={n} M={m}: matvec differs from dense matrix by {err:e}"))?;
            let herm = (&dense - dense.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            check(herm < 1e-12, || format!("N={n} M={m}: dense matrix not Hermitian ({herm:e})"))?;
            let e: Complex64 = c.iter().zip(&fast).map(|(a, b)| a.conj() * b).sum();
            check(e.im.abs() < 1e-10, || format!("N={n} M={m}: <C|HC> has imaginary part {:e}", e.im))?;
        }
    }
    Ok(())
}

/// Reduced densities against explicit ladder expectations, with trace,
/// Hermiticity, positivity, contraction and energy identities.
pub fn density_identities(seed: u64) -> Check {
    let mut rng = rng(seed);
    for n in 1..=4 {
        for m in 1..=3 {
            let basis = enumerate_configs(n, m).map_err(|e| e.to_string())?;
            let c = random_coefficients(&mut rng, basis.len());
            let (rho1, rho2) = reduced_densities(&c, &basis).map_err(|e| e.to_string())?;
            let nf = n as f64;
            for k in 0..m {
                for q in 0..m {
                    let r = expectation(&c, &basis, &[(false, q), (true, k)]);
                    check((rho1[(k, q)] - r).norm() < 1e-12, || format!("N={n} M={m}: rho1[{k},{q}] mismatch"))?;
                    let mut contracted = ZERO;
                    for s in 0..m {
                        contracted += rho2.get(k, s, s, q);
                        for l in 0..m {
                            let r = expectation(&c, &basis, &[(false, q), (false, l), (true, s), (true, k)]);
                            check((rho2.get(k, s, q, l) - r).norm() < 1e-12, || {
                                format!("N={n} M={m}: rho2[{k},{s},{q},{l}] mismatch")
                            })?;
                        }
                    }
                    let want = (nf - 1.0) * rho1[(k, q)];
                    check((contracted - want).norm() < 1e-10, || {
                        format!("N={n} M={m}: sum_s rho2[{k},s,s,{q}] = {contracted} vs (N-1) rho1 = {want}")
                    })?;
                }
            }
            let trace: Complex64 = (0..m).map(|k| rho1[(k, k)]).sum();
            check((trace - nf).norm() < 1e-10, || format!("N={n} M={m}: trace rho1 = {trace}"))?;
            let herm = (&rho1 - rho1.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            check(herm < 1e-12, || format!("N={n} M={m}: rho1 not Hermitian"))?;
            let eig = rho1.clone().symmetric_eigen().eigenvalues;
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            check(min >= -1e-10 * nf, || format!("N={n} M={m}: rho1 eigenvalue {min:e}"))?;
            check((eig.iter().sum::<f64>() - nf).abs() < 1e-10, || format!("N={n} M={m}: eigenvalues do not sum to N"))?;

            let h = random_hermitian(&mut rng, m);
            let w = random_contact_tensor(&mut rng, m);
            let hc = apply_many_body_h(&c, &h, &w, &basis).map_err(|e| e.to_string())?;
            let direct: Complex64 = c.iter().zip(&hc).map(|(a, b)| a.conj() * b).sum();
            let mut via = ZERO;
            for k in 0..m {
                for q in 0..m {
                    via += h[(k, q)] * rho1[(k, q)];
                    for s in 0..m {
                        for l in 0..m {
                            via += 0.5 * w.get(k, s, q, l) * rho2.get(k, s, q, l);
                        }
                    }
                }
            }
            check((direct - via).norm() < 1e-10, || format!("N={n} M={m}: <H> {direct} vs density form {via}"))?;
        }
    }
    Ok(())
}

/// Orthonormal, complex, parity-broken orbitals on `grid`: HO-like seeds,
/// a random unitary remix and a common chirp.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize, m: usize, grid: &Grid, width: f64) -> Result<MctdhbState, String> {
    let seed = init_product_state(&InitialShape::Gaussian, n, m, grid, width).map_err(|e| e.to_string())?;
    let u = random_unitary(rng, m);
    let chirp: f64 = rng.random_range(-0.5..0.5);
    let orbitals: Vec<ComplexField> = (0..m)
        .map(|j| {
            let mut f = grid.zeros();
            for (i, v) in f.0.iter_mut().enumerate() {
                let x = grid.x(i);
                let phase = Complex64::from_polar(1.0, chirp * x * x);
                *v = phase * (0..m).map(|k| seed.orbitals[k][i] * u[(k, j)]).sum::<Complex64>();
            }
            f
        })
        .collect();
    let basis = seed.shared_basis();
    let c = random_coefficients(rng, basis.len());
    MctdhbState::new(*grid, orbitals, c, 0.0, basis).map_err(|e| e.to_string())
}

/// Orbital indices occupied by a configuration, e.g. `[2, 1] -> [0, 0, 1]`.
fn orbital_list(occ: &[u32]) -> Vec<usize> {
    occ.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize)).collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// First-quantized wave function on the full N-dimensional grid, index
/// `i_1 * n^(N-1) + ... + i_N`.
pub fn first_quantized(state: &MctdhbState) -> Vec<Complex64> {
    let grid = &state.grid;
    let n_pts = grid.n_points();
    let n = state.particles();
    let total = n_pts.pow(n as u32);
    let mut psi = vec![ZERO; total];
    for (idx, c) in state.coefficients.iter().enumerate() {
        let occ = state.basis().config(idx);
        let orbs = orbital_list(occ);
        let norm = 1.0 / (factorial(n as u32) * occ.iter().map(|&v| factorial(v)).product::<f64>()).sqrt();
        for perm in permutations(&orbs) {
            for (flat, v) in psi.iter_mut().enumerate() {
                let mut rem = flat;
                let mut prod = Complex64::new(norm, 0.0);
                for p in (0..n).rev() {
                    let i = rem % n_pts;
                    rem /= n_pts;
                    prod *= state.orbitals[perm[p]][i];
                }
                *v += c * prod;
            }
        }
    }
    psi
}

/// Mode-space COM variance and pair density against the grid^N wave function
/// for N = 2 (M = 3, 120 points) and N = 3 (M = 2, 48 points).
pub fn com_contraction_matches_grid_integral(seed: u64) -> Check {
    let mut rng = rng(seed);
    for &(n, m, points) in &[(2usize, 3usize, 120usize), (3, 2, 48)] {
        let grid = make_grid(12.0, points, 0.0).map_err(|e| e.to_string())?;
        let state = random_state(&mut rng, n, m, &grid, 1.0)?;
        let psi = first_quantized(&state);
        let dx = grid.spacing();
        let vol = dx.powi(n as i32);
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol;
        check((norm - 1.0).abs() < 1e-10, || format!("N={n}: grid wave function norm {norm}"))?;
        let (mut r1, mut r2) = (0.0, 0.0);
        let mut pair = vec![0.0; points * points];
        for (flat, z) in psi.iter().enumerate() {
            let p = z.norm_sqr() * vol;
            let mut rem = flat;
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                xs.push(rem % points);
                rem /= points;
            }
            xs.reverse();
            let r: f64 = xs.iter().map(|&i| grid.x(i)).sum::<f64>() / n as f64;
            r1 += r * p;
            r2 += r * r * p;
            pair[xs[0] * points + xs[1]] += (n * (n - 1)) as f64 * z.norm_sqr() * dx.powi(n as i32 - 2);
        }
        let grid_var = r2 - r1 * r1;
        let mode_var = com_variance(&state).map_err(|e| e.to_string())?;
        check((grid_var - mode_var).abs() < 1e-8, || {
            format!("N={n} M={m}: sigma_R^2 mode form {mode_var} vs grid integral {grid_var}")
        })?;
        let mode_pair = comcheck::observables::two_body_density(&state).map_err(|e| e.to_string())?;
        let err = mode_pair.iter().zip(&pair).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        check(err < 1e-8, || format!("N={n} M={m}: pair density differs from grid integral by {err:e}"))?;
        let sn2 = density_variance(&state).map_err(|e| e.to_string())?;
        check(mode_var <= sn2 + 1e-8, || format!("N={n} M={m}: sigma_R^2 {mode_var} > sigma_n^2 {sn2}"))?;
    }
    Ok(())
}

/// Rewrites the coefficients of `state` in the orbital basis `phi'_j = sum_k phi_k U[k,j]`.
pub fn remix(state: &MctdhbState, u: &DMatrix<Complex64>) -> Result<MctdhbState, String> {
    let m = state.modes();
    let basis = state.basis();
    // a+_k = sum_j conj(U[k,j]) a'+_j; expand each configuration as a polynomial in a'+.
    let mut out = vec![ZERO; basis.len()];
    for (idx, c) in state.coefficients.iter().enumerate() {
        let occ = basis.config(idx);
        let mut poly: HashMap<Vec<u32>, Complex64> = HashMap::from([(vec![0u32; m], Complex64::new(1.0, 0.0))]);
        for k in orbital_list(occ) {
            let mut next: HashMap<Vec<u32>, Complex64> = HashMap::new();
            for (mono, v) in &poly {
                for j in 0..m {
                    let mut key = mono.clone();
                    key[j] += 1;
                    *next.entry(key).or_insert(ZERO) += v * u[(k, j)].conj();
                }
            }
            poly = next;
        }
        let norm = 1.0 / occ.iter().map(|&v| factorial(v)).product::<f64>().sqrt();
        for (mono, v) in poly {
            let amp = mono.iter().map(|&v| factorial(v)).product::<f64>().sqrt();
            out[basis.index_of(&mono)] += c * v * norm * amp;
        }
    }
    let orbitals: Vec<ComplexField> = (0..m)
        .map(|j| {
            let mut f = state.grid.zeros();
            for k in 0..m {
                f.axpy(u[(k, j)], &state.orbitals[k]);
            }
            f
        })
        .collect();
    MctdhbState::new(state.grid, orbitals, out, state.t, state.shared_basis()).map_err(|e| e.to_string())
}

/// Natural occupancies, variances and energy do not change under a unitary
/// remix of M = 2 orbitals with the compensating coefficient transform.
pub fn unitary_remix_invariance(seed: u64) -> Check {
    let mut rng = rng(seed);
    let grid = make_grid(12.0, 161, 0.0).map_err(|e| e.to_string())?;
    let spec = HamiltonianSpec::stationary(1.0, -0.7);
    for trial in 0..5 {
        let n = 2 + trial;
        let state = random_state(&mut rng, n, 2, &grid, 1.0)?;
        let u = random_unitary(&mut rng, 2);
        let mixed = remix(&state, &u)?;
        let norm: f64 = mixed.coefficients.iter().map(|z| z.norm_sqr()).sum();
        check((norm - 1.0).abs() < 1e-12, || format!("N={n}: remixed norm {norm}"))?;
        let a = natural_occupancies(&state).map_err(|e| e.to_string())?.occupations;
        let b = natural_occupancies(&mixed).map_err(|e| e.to_string())?.occupations;
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        check(err < 1e-10, || format!("N={n}: occupancies {a:?} vs {b:?}"))?;
        let (ma, mb) = (moments(&state).map_err(|e| e.to_string())?, moments(&mixed).map_err(|e| e.to_string())?);
        check((ma.com_variance - mb.com_variance).abs() < 1e-10, || format!("N={n}: sigma_R^2 changed"))?;
        check((ma.density_variance - mb.density_variance).abs() < 1e-10, || format!("N={n}: sigma_n^2 changed"))?;
        let ea = total_energy(&state, &spec, 0.0).map_err(|e| e.to_string())?;
        let eb = total_energy(&mixed, &spec, 0.0).map_err(|e| e.to_string())?;
        check((ea - eb).abs() < 1e-10 * ea.abs().max(1.0), || format!("N={n}: energy {ea} vs {eb}"))?;
    }
    Ok(())
}

/// Bosonic and conjugation symmetries of the projected interaction tensor.
pub fn interaction_tensor_symmetry(seed: u64) -> Check {
    let mut rng = rng(seed);
    let grid = make_grid(12.0, 121, 0.0).map_err(|e| e.to_string())?;
    let state = random_state(&mut rng, 2, 3, &grid, 1.0)?;
    let spec = HamiltonianSpec::stationary(1.0, -1.3);
    let (h, w) = project_hamiltonian(&state.orbitals, &grid, &spec, 0.0).map_err(|e| e.to_string())?;
    let herm = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    check(herm < 1e-12, || format!("h not Hermitian ({herm:e})"))?;
    let dx = grid.spacing();
    for k in 0..3 {
        for s in 0..3 {
            for q in 0..3 {
                for l in 0..3 {
                    let v = w.get(k, s, q, l);
                    let direct: Complex64 = (0..grid.n_points())
                        .map(|i| {
                            let o = &state.orbitals;
                            (o[k][i] * o[s][i]).conj() * o[q][i] * o[l][i]
                        })
                        .sum::<Complex64>()
                        * (-1.3 * dx);
                    check((v - direct).norm() < 1e-12, || format!("W[{k},{s},{q},{l}] differs from its integral"))?;
                    check((v - w.get(s, k, q, l)).norm() < 1e-14, || "W_ksql != W_skql".into())?;
                    check((v - w.get(k, s, l, q)).norm() < 1e-14, || "W_ksql != W_kslq".into())?;
                    check((v - w.get(q, l, k, s).conj()).norm() < 1e-14, || "W_ksql != conj W_qlks".into())?;
                }
            }
        }
    }
    Ok(())
}

/// Orbital time derivatives stay orthogonal to the orbital span.
pub fn projector_property(seed: u64) -> Check {
    let mut rng = rng(seed);
    let grid = make_grid(12.0, 161, 0.0).map_err(|e| e.to_string())?;
    let state = random_state(&mut rng, 3, 3, &grid, 1.0)?;
    let spec = HamiltonianSpec::stationary(1.0, -1.0);
    let d = eom_rhs(&state, &spec).map_err(|e| e.to_string())?;
    let dx = grid.spacing();
    for (j, dphi) in d.orbitals.iter().enumerate() {
        let scale = (dphi.norm_sqr(&grid)).sqrt().max(1.0);
        for (k, phi) in state.orbitals.iter().enumerate() {
            let overlap: Complex64 = phi.iter().zip(dphi.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>() * dx;
            check(overlap.norm() < 1e-10 * scale, || format!("<phi_{k}|dphi_{j}/dt> = {overlap:e}"))?;
        }
    }
    Ok(())
}

fn breathing_setup() -> Result<(MctdhbState, HamiltonianSpec), String> {
    let grid = make_grid(14.0, 201, 0.0).map_err(|e| e.to_string())?;
    let init = init_product_state(&InitialShape::Gaussian, 3, 3, &grid, 1.0).map_err(|e| e.to_string())?;
    let ground = relax(&init, &HamiltonianSpec::stationary(1.0, -1.0), &RelaxOptions::default())
        .map_err(|e| e.to_string())?;
    // Quench the trap so the relaxed state breathes.
    Ok((ground.state, HamiltonianSpec::stationary(0.7, -1.0)))
}

/// Real-time propagation keeps the norm, orthonormality and energy.
pub fn real_time_conservation() -> Check {
    let (state, spec) = breathing_setup()?;
    let t_final = 2.0;
    let res = propagate(&state, &spec, &PropagateOptions::new(t_final, 1e-3, 100)).map_err(|e| e.to_string())?;
    let end = &res.state;
    let norm = end.coefficient_norm_sqr();
    check((norm - 1.0).abs() < 1e-8, || format!("norm^2 drifted to {norm}"))?;
    let defect = end.orthonormality_defect();
    check(defect < 1e-8, || format!("orthonormality defect {defect:e}"))?;
    let e0 = res.series.energy[0];
    let drift = res.series.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    check(drift < 1e-8 * t_final, || format!("energy drift {drift:e} over t = {t_final}"))?;
    Ok(())
}

/// Halving dt changes the recorded variances by less than 1e-6 relative.
pub fn dt_halving() -> Check {
    let (state, spec) = breathing_setup()?;
    let dev = dt_halving_deviation(&state, &spec, &PropagateOptions::new(1.0, 1e-3, 100)).map_err(|e| e.to_string())?;
    check(dev < 1e-6, || format!("dt halving changed observables by {dev:e}"))
}

/// M = 1 relaxation energy equals the Gross-Pitaevskii functional of its orbital.
pub fn gp_energy_functional() -> Check {
    let grid = make_grid(12.0, 241, 0.0).map_err(|e| e.to_string())?;
    let (n, g) = (10usize, -0.2);
    let spec = HamiltonianSpec::stationary(1.0, g);
    let init = init_product_state(&InitialShape::Gaussian, n, 1, &grid, 1.0).map_err(|e| e.to_string())?;
    let res = relax(&init, &spec, &RelaxOptions::default()).map_err(|e| e.to_string())?;
    let phi = &res.state.orbitals[0];
    let dx = grid.spacing();
    let lap = laplacian5(phi, &grid).map_err(|e| e.to_string())?;
    let mut one_body = 0.0;
    let mut quartic = 0.0;
    for i in 0..grid.n_points() {
        let x = grid.x(i);
        let hphi = -0.5 * lap[i] + 0.5 * x * x * phi[i];
        one_body += (phi[i].conj() * hphi).re * dx;
        quartic += phi[i].norm_sqr().powi(2) * dx;
    }
    let nf = n as f64;
    let functional = nf * one_body + 0.5 * g * nf * (nf - 1.0) * quartic;
    let err = (functional - res.energy).abs();
    check(err < 1e-10, || format!("relaxed E {} vs GP functional {functional} ({err:e})", res.energy))
}

/// Every property check, named, for the acceptance runner.
pub fn all_properties() -> Vec<(&'static str, Check)> {
    vec![
        ("basis enumeration", basis_enumeration()),
        ("matvec vs dense ladder matrix", matvec_matches_dense(11)),
        ("reduced density identities", density_identities(12)),
        ("COM contraction vs grid integral", com_contraction_matches_grid_integral(13)),
        ("unitary remix invariance", unitary_remix_invariance(14)),
        ("interaction tensor symmetry", interaction_tensor_symmetry(15)),
        ("projector property", projector_property(16)),
        ("real-time conservation", real_time_conservation()),
        ("dt halving", dt_halving()),
        ("M=1 GP energy functional", gp_energy_functional()),
    ]
}

/// `(sigma_R^2, sigma_n^2)` of the exact two-boson ground state, integrated
/// directly over its pair density `rho2(x, y)`.
pub fn exact_pair_variances(g: f64, grid: &Grid) -> Result<(f64, f64), String> {
    let exact = comcheck::exact2::ground_state(g, grid).map_err(|e| e.to_string())?;
    let rho2 = exact.two_body_density();
    let n = grid.n_points();
    let dx = grid.spacing();
    let (mut total, mut r1, mut r2, mut x1, mut x2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let p = rho2[i * n + j] * dx * dx;
            let (x, y) = (grid.x(i), grid.x(j));
            let r = 0.5 * (x + y);
            total += p;
            r1 += r * p;
            r2 += r * r * p;
            x1 += x * p;
            x2 += x * x * p;
        }
    }
    let (r1, r2, x1, x2) = (r1 / total, r2 / total, x1 / total, x2 / total);
    Ok((r2 - r1 * r1, x2 - x1 * x1))
}
