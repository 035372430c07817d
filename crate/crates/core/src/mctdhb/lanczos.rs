use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const DENSE_LIMIT: usize = 400;
const KRYLOV: usize = 60;
const RESTARTS: usize = 200;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpair of a Hermitian operator given through its action.
///
/// Small problems are diagonalized densely; larger ones use restarted Lanczos
/// with full reorthogonalization, started from `start`.
pub fn lowest_eigenpair(
    dim: usize,
    apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>>,
    start: &[Complex64],
    tol: f64,
) -> Result<(f64, Vec<Complex64>)> {
    if dim <= DENSE_LIMIT {
        return dense(dim, apply);
    }
    let mut v0 = start.to_vec();
    let mut nv = norm(&v0);
    if nv == 0.0 {
        v0[0] = Complex64::new(1.0, 0.0);
        nv = 1.0;
    }
    v0.iter_mut().for_each(|z| *z /= nv);
    let mut last = f64::INFINITY;
    for _ in 0..RESTARTS {
        let mut basis: Vec<Vec<Complex64>> = vec![v0.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..KRYLOV.min(dim) {
            let mut w = apply(&basis[j])?;
            alpha.push(dot(&basis[j], &w).re);
            for _ in 0..2 {
                for b in &basis {
                    let o = dot(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= o * y);
                }
            }
            let bnorm = norm(&w);
            if bnorm < 1e-13 || j + 1 == KRYLOV.min(dim) {
                break;
            }
            beta.push(bnorm);
            w.iter_mut().for_each(|z| *z /= bnorm);
            basis.push(w);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (imin, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::Eigensolver("empty Krylov space".into()))?;
        let y = eig.eigenvectors.column(imin);
        let mut ritz = vec![ZERO; dim];
        for (i, b) in basis.iter().take(k).enumerate() {
            ritz.iter_mut().zip(b).for_each(|(r, v)| *r += y[i] * v);
        }
        let nr = norm(&ritz);
        ritz.iter_mut().for_each(|z| *z /= nr);
        let hr = apply(&ritz)?;
        let resid: f64 = hr
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - theta * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid < tol || (last - theta).abs() < 1e-15 * theta.abs().max(1.0) {
            return Ok((theta, ritz));
        }
        last = theta;
        v0 = ritz;
    }
    Err(Error::Eigensolver(format!("Lanczos did not converge in {RESTARTS} restarts")))
}

fn dense(dim: usize, apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>>) -> Result<(f64, Vec<Complex64>)> {
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let mut e = vec![ZERO; dim];
    for j in 0..dim {
        e[j] = Complex64::new(1.0, 0.0);
        let col = apply(&e)?;
        for (i, v) in col.into_iter().enumerate() {
            h[(i, j)] = v;
        }
        e[j] = ZERO;
    }
    let herm = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let (imin, &lowest) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::Eigensolver("empty matrix".into()))?;
    let v: DVector<Complex64> = eig.eigenvectors.column(imin).into_owned();
    Ok((lowest, v.iter().copied().collect()))
}
