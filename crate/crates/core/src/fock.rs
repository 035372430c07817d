//! Bosonic configuration space over M modes.
//!
//! Occupation vectors are ordered lexicographically descending in n_1, then
//! n_2, and so on; `(N, 0, ..., 0)` has index 0. The two-body density uses
//! `rho2[k,s,q,l] = <a+_k a+_s a_l a_q>` and the interaction energy is
//! `1/2 sum W[k,s,q,l] rho2[k,s,q,l]` with
//! `W[k,s,q,l] = g int conj(phi_k) conj(phi_s) phi_q phi_l`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CoefficientVector = Vec<Complex64>;
pub type ModeMatrix = DMatrix<Complex64>;

/// Default refusal threshold for the basis size.
pub const DEFAULT_MAX_BASIS: usize = 10_000_000;

/// Above this many two-body connections the hop lists are generated on the fly.
const HOP_TABLE_LIMIT: usize = 4_000_000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Basis cap, overridable through `COMCHECK_MAX_BASIS`.
pub fn default_max_basis() -> usize {
    std::env::var("COMCHECK_MAX_BASIS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_BASIS)
}

/// Rank-4 tensor over mode indices, row-major in `(k, s, q, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTensor4 {
    m: usize,
    data: Vec<Complex64>,
}

impl ModeTensor4 {
    pub fn zeros(m: usize) -> Self {
        ModeTensor4 {
            m,
            data: vec![ZERO; m * m * m * m],
        }
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn index(&self, k: usize, s: usize, q: usize, l: usize) -> usize {
        ((k * self.m + s) * self.m + q) * self.m + l
    }

    #[inline]
    pub fn get(&self, k: usize, s: usize, q: usize, l: usize) -> Complex64 {
        self.data[self.index(k, s, q, l)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, s: usize, q: usize, l: usize, v: Complex64) {
        let i = self.index(k, s, q, l);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Largest violation of `T[ksql] = T[skql] = T[kslq]` and `T[ksql] = conj(T[qlks])`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.m;
        let mut worst: f64 = 0.0;
        for k in 0..m {
            for s in 0..m {
                for q in 0..m {
                    for l in 0..m {
                        let v = self.get(k, s, q, l);
                        worst = worst
                            .max((v - self.get(s, k, q, l)).norm())
                            .max((v - self.get(k, s, l, q)).norm())
                            .max((v - self.get(q, l, k, s).conj()).norm());
                    }
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
struct Hop {
    source: u32,
    modes: [u8; 4],
    amp: f64,
}

#[derive(Debug, Clone)]
struct HopTable {
    one_start: Vec<usize>,
    one: Vec<Hop>,
    two_start: Vec<usize>,
    two: Vec<Hop>,
}

/// All occupation vectors of `N` bosons in `M` modes.
#[derive(Debug, Clone)]
pub struct FockBasis {
    n: usize,
    m: usize,
    occ: Vec<u32>,
    /// `binom[a * (m + 1) + b] = C(a, b)` for `a <= n + m`, `b <= m`.
    binom: Vec<usize>,
    table: Option<HopTable>,
    reduced: Option<Box<FockBasis>>,
}

/// Number of configurations `C(N + M - 1, N)`, saturating.
pub fn basis_size(n: usize, m: usize) -> u128 {
    if m == 0 {
        return 0;
    }
    let mut c: u128 = 1;
    // C(n + m - 1, m - 1) built incrementally keeps intermediates exact.
    for i in 1..m as u128 {
        c = match c.checked_mul(n as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

pub fn enumerate_configs(n: usize, m: usize) -> Result<FockBasis> {
    enumerate_configs_capped(n, m, default_max_basis())
}

pub fn enumerate_configs_capped(n: usize, m: usize, cap: usize) -> Result<FockBasis> {
    FockBasis::build(n, m, cap, true)
}

impl FockBasis {
    fn build(n: usize, m: usize, cap: usize, with_reduced: bool) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!("need N >= 1 and M >= 1, got N={n}, M={m}")));
        }
        if m > u8::MAX as usize {
            return Err(Error::InvalidInput(format!("at most 255 modes supported, got {m}")));
        }
        let size = basis_size(n, m);
        if size > cap as u128 || size > u32::MAX as u128 {
            return Err(Error::BasisTooLarge { requested: size, cap });
        }
        let dim = size as usize;
        let mut binom = vec![0usize; (n + m + 1) * (m + 1)];
        for a in 0..=n + m {
            binom[a * (m + 1)] = 1;
            for b in 1..=m.min(a) {
                let up = binom[(a - 1) * (m + 1) + b - 1];
                let left = if b <= a - 1 { binom[(a - 1) * (m + 1) + b] } else { 0 };
                binom[a * (m + 1) + b] = up.saturating_add(left);
            }
        }
        let mut occ = Vec::with_capacity(dim * m);
        let mut cur = vec![0u32; m];
        fill(&mut occ, &mut cur, 0, n as u32);
        debug_assert_eq!(occ.len(), dim * m);
        let reduced = if with_reduced && n >= 2 {
            Some(Box::new(FockBasis::build(n - 2, m, cap, false).or_else(|e| match e {
                // N = 2 leaves the zero-particle vacuum.
                Error::InvalidInput(_) if n == 2 => Ok(FockBasis::vacuum(m)),
                e => Err(e),
            })?))
        } else {
            None
        };
        let mut basis = FockBasis {
            n,
            m,
            occ,
            binom,
            table: None,
            reduced,
        };
        let links = dim.saturating_mul(m.pow(4).min(n * n * m * m));
        if links <= HOP_TABLE_LIMIT {
            basis.table = Some(basis.build_table());
        }
        Ok(basis)
    }

    fn vacuum(m: usize) -> FockBasis {
        FockBasis {
            n: 0,
            m,
            occ: vec![0; m],
            binom: vec![1; m + 1],
            table: None,
            reduced: None,
        }
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.occ.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.occ.is_empty()
    }

    pub fn config(&self, i: usize) -> &[u32] {
        &self.occ[i * self.m..(i + 1) * self.m]
    }

    pub fn configs(&self) -> impl Iterator<Item = &[u32]> {
        self.occ.chunks(self.m)
    }

    #[inline]
    fn c(&self, a: usize, b: usize) -> usize {
        if b > a {
            0
        } else {
            self.binom[a * (self.m + 1) + b]
        }
    }

    /// Position of an occupation vector in the ordering; O(M).
    #[inline]
    pub fn index_of(&self, occ: &[u32]) -> usize {
        if self.n == 0 {
            return 0;
        }
        let m = self.m;
        let mut remaining = self.n;
        let mut idx = 0;
        for (k, &nk) in occ[..m - 1].iter().enumerate() {
            let nk = nk as usize;
            let t = remaining - nk;
            if t > 0 {
                let r = m - 1 - k;
                idx += self.c(t + r - 1, r);
            }
            remaining -= nk;
        }
        idx
    }

    /// Checked lookup for arbitrary vectors.
    pub fn find(&self, occ: &[u32]) -> Option<usize> {
        if occ.len() != self.m || occ.iter().map(|&v| v as usize).sum::<usize>() != self.n {
            return None;
        }
        Some(self.index_of(occ))
    }

    /// Visits `<target| a+_k a_q |source>` for every nonzero element in row `target`.
    fn visit_one_body(&self, target: usize, scratch: &mut [u32], mut f: impl FnMut(usize, usize, usize, f64)) {
        scratch.copy_from_slice(self.config(target));
        for k in 0..self.m {
            if scratch[k] == 0 {
                continue;
            }
            let a = (scratch[k] as f64).sqrt();
            scratch[k] -= 1;
            for q in 0..self.m {
                let b = ((scratch[q] + 1) as f64).sqrt();
                scratch[q] += 1;
                f(k, q, self.index_of(scratch), a * b);
                scratch[q] -= 1;
            }
            scratch[k] += 1;
        }
    }

    /// Visits `<target| a+_k a+_s a_l a_q |source>` for every nonzero element in row `target`.
    fn visit_two_body(
        &self,
        target: usize,
        scratch: &mut [u32],
        mut f: impl FnMut(usize, usize, usize, usize, usize, f64),
    ) {
        let m = self.m;
        scratch.copy_from_slice(self.config(target));
        for k in 0..m {
            if scratch[k] == 0 {
                continue;
            }
            let a = (scratch[k] as f64).sqrt();
            scratch[k] -= 1;
            for s in 0..m {
                if scratch[s] == 0 {
                    continue;
                }
                let b = a * (scratch[s] as f64).sqrt();
                scratch[s] -= 1;
                for q in 0..m {
                    let c = b * ((scratch[q] + 1) as f64).sqrt();
                    scratch[q] += 1;
                    for l in 0..m {
                        let d = c * ((scratch[l] + 1) as f64).sqrt();
                        scratch[l] += 1;
                        f(k, s, q, l, self.index_of(scratch), d);
                        scratch[l] -= 1;
                    }
                    scratch[q] -= 1;
                }
                scratch[s] += 1;
            }
            scratch[k] += 1;
        }
    }

    fn build_table(&self) -> HopTable {
        let dim = self.len();
        let mut scratch = vec![0u32; self.m];
        let mut one_start = Vec::with_capacity(dim + 1);
        let mut one = Vec::new();
        let mut two_start = Vec::with_capacity(dim + 1);
        let mut two = Vec::new();
        for j in 0..dim {
            one_start.push(one.len());
            self.visit_one_body(j, &mut scratch, |k, q, src, amp| {
                one.push(Hop {
                    source: src as u32,
                    modes: [k as u8, q as u8, 0, 0],
                    amp,
                })
            });
            two_start.push(two.len());
            self.visit_two_body(j, &mut scratch, |k, s, q, l, src, amp| {
                two.push(Hop {
                    source: src as u32,
                    modes: [k as u8, s as u8, q as u8, l as u8],
                    amp,
                })
            });
        }
        one_start.push(one.len());
        two_start.push(two.len());
        HopTable {
            one_start,
            one,
            two_start,
            two,
        }
    }

    fn for_each_one_body(&self, target: usize, scratch: &mut [u32], mut f: impl FnMut(usize, usize, usize, f64)) {
        match &self.table {
            Some(t) => {
                for h in &t.one[t.one_start[target]..t.one_start[target + 1]] {
                    f(h.modes[0] as usize, h.modes[1] as usize, h.source as usize, h.amp);
                }
            }
            None => self.visit_one_body(target, scratch, f),
        }
    }

    fn for_each_two_body(
        &self,
        target: usize,
        scratch: &mut [u32],
        mut f: impl FnMut(usize, usize, usize, usize, usize, f64),
    ) {
        match &self.table {
            Some(t) => {
                for h in &t.two[t.two_start[target]..t.two_start[target + 1]] {
                    let [k, s, q, l] = h.modes;
                    f(k as usize, s as usize, q as usize, l as usize, h.source as usize, h.amp);
                }
            }
            None => self.visit_two_body(target, scratch, f),
        }
    }

    /// The `N - 2` particle basis used by the pair-factorized interaction route.
    pub(crate) fn reduced(&self) -> Option<&FockBasis> {
        self.reduced.as_deref()
    }

    /// `D[r][q][l] = <r| a_l a_q |C>` over the `N - 2` particle basis, flattened `r*M*M + q*M + l`.
    pub(crate) fn pair_annihilation(&self, c: &[Complex64]) -> Vec<Complex64> {
        let red = self.reduced.as_deref().expect("pair route needs N >= 2");
        let m = self.m;
        let mut d = vec![ZERO; red.len() * m * m];
        let mut n = vec![0u32; m];
        for (i, ci) in c.iter().enumerate() {
            if *ci == ZERO {
                continue;
            }
            n.copy_from_slice(self.config(i));
            for q in 0..m {
                if n[q] == 0 {
                    continue;
                }
                let a = (n[q] as f64).sqrt();
                n[q] -= 1;
                for l in 0..m {
                    if n[l] == 0 {
                        continue;
                    }
                    let b = a * (n[l] as f64).sqrt();
                    n[l] -= 1;
                    let r = red.index_of(&n);
                    d[(r * m + q) * m + l] += ci * b;
                    n[l] += 1;
                }
                n[q] += 1;
            }
        }
        d
    }

    /// `out[j] += 1/2 sum_{r,k,s} E[r][k][s] <j| a+_k a+_s |r>`.
    pub(crate) fn add_pair_creation(&self, e: &[Complex64], out: &mut [Complex64]) {
        let red = self.reduced.as_deref().expect("pair route needs N >= 2");
        let m = self.m;
        let mut n = vec![0u32; m];
        for (j, o) in out.iter_mut().enumerate() {
            n.copy_from_slice(self.config(j));
            let mut acc = ZERO;
            for k in 0..m {
                if n[k] == 0 {
                    continue;
                }
                let a = (n[k] as f64).sqrt();
                n[k] -= 1;
                for s in 0..m {
                    if n[s] == 0 {
                        continue;
                    }
                    let b = a * (n[s] as f64).sqrt();
                    n[s] -= 1;
                    let r = red.index_of(&n);
                    acc += e[(r * m + k) * m + s] * b;
                    n[s] += 1;
                }
                n[k] += 1;
            }
            *o += 0.5 * acc;
        }
    }

    fn check_dims(&self, c: &[Complex64], h: Option<&ModeMatrix>, w: Option<&ModeTensor4>) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has {} entries, basis has {}",
                c.len(),
                self.len()
            )));
        }
        if let Some(h) = h {
            if h.nrows() != self.m || h.ncols() != self.m {
                return Err(Error::DimensionMismatch(format!("h is {}x{}, M = {}", h.nrows(), h.ncols(), self.m)));
            }
        }
        if let Some(w) = w {
            if w.modes() != self.m {
                return Err(Error::DimensionMismatch(format!("W has {} modes, M = {}", w.modes(), self.m)));
            }
        }
        Ok(())
    }

    /// `out = (sum h_kq a+_k a_q) C`.
    pub(crate) fn apply_one_body(&self, c: &[Complex64], h: &ModeMatrix, out: &mut [Complex64]) {
        let mut scratch = vec![0u32; self.m];
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            self.for_each_one_body(j, &mut scratch, |k, q, src, amp| {
                acc += h[(k, q)] * (amp * c[src]);
            });
            *o = acc;
        }
    }

    /// `out += (1/2 sum W_ksql a+_k a+_s a_l a_q) C`.
    pub(crate) fn add_two_body(&self, c: &[Complex64], w: &ModeTensor4, out: &mut [Complex64]) {
        let mut scratch = vec![0u32; self.m];
        let wd = w.as_slice();
        let m = self.m;
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            self.for_each_two_body(j, &mut scratch, |k, s, q, l, src, amp| {
                acc += wd[((k * m + s) * m + q) * m + l] * (amp * c[src]);
            });
            *o += 0.5 * acc;
        }
    }
}

fn fill(out: &mut Vec<u32>, cur: &mut [u32], pos: usize, remaining: u32) {
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.extend_from_slice(cur);
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        fill(out, cur, pos + 1, remaining - v);
    }
    cur[pos] = 0;
}

/// `H C` for `H = sum h_kq a+_k a_q + 1/2 sum W_ksql a+_k a+_s a_l a_q`.
pub fn apply_many_body_h(
    c: &[Complex64],
    h: &ModeMatrix,
    w: &ModeTensor4,
    basis: &FockBasis,
) -> Result<CoefficientVector> {
    basis.check_dims(c, Some(h), Some(w))?;
    let mut out = vec![ZERO; c.len()];
    basis.apply_one_body(c, h, &mut out);
    if basis.particles() >= 2 {
        basis.add_two_body(c, w, &mut out);
    }
    Ok(out)
}

/// `<C|C>`
pub fn coefficient_norm_sqr(c: &[Complex64]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

/// One-body density only, `rho1[k,q] = <a+_k a_q>`; no normalization check.
pub(crate) fn one_body_density(c: &[Complex64], basis: &FockBasis) -> ModeMatrix {
    let m = basis.modes();
    let mut rho1 = ModeMatrix::zeros(m, m);
    let mut scratch = vec![0u32; m];
    for (j, cj) in c.iter().enumerate() {
        if *cj == ZERO {
            continue;
        }
        let cj = cj.conj();
        basis.for_each_one_body(j, &mut scratch, |k, q, src, amp| {
            rho1[(k, q)] += cj * (amp * c[src]);
        });
    }
    rho1
}

pub(crate) fn two_body_density(c: &[Complex64], basis: &FockBasis) -> ModeTensor4 {
    let m = basis.modes();
    let mut rho2 = ModeTensor4::zeros(m);
    if basis.particles() < 2 {
        return rho2;
    }
    let mut scratch = vec![0u32; m];
    let data = rho2.as_mut_slice();
    for (j, cj) in c.iter().enumerate() {
        if *cj == ZERO {
            continue;
        }
        let cj = cj.conj();
        basis.for_each_two_body(j, &mut scratch, |k, s, q, l, src, amp| {
            data[((k * m + s) * m + q) * m + l] += cj * (amp * c[src]);
        });
    }
    rho2
}

/// `rho1[k,q] = <a+_k a_q>` and `rho2[k,s,q,l] = <a+_k a+_s a_l a_q>`.
pub fn reduced_densities(c: &[Complex64], basis: &FockBasis) -> Result<(ModeMatrix, ModeTensor4)> {
    basis.check_dims(c, None, None)?;
    let norm = coefficient_norm_sqr(c);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Unnormalized(norm));
    }
    Ok((one_body_density(c, basis), two_body_density(c, basis)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn small_bases() {
        let b = enumerate_configs(2, 2).unwrap();
        let cfgs: Vec<Vec<u32>> = b.configs().map(|c| c.to_vec()).collect();
        assert_eq!(cfgs, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(enumerate_configs(1000, 2).unwrap().len(), 1001);
        assert_eq!(enumerate_configs(2, 10).unwrap().len(), 55);
        assert_eq!(basis_size(100, 3), 5151);
        assert_eq!(basis_size(1000, 3), 501_501);
    }

    #[test]
    fn ranking_matches_enumeration() {
        for (n, m) in [(1, 4), (3, 3), (5, 4), (7, 2), (4, 6)] {
            let b = enumerate_configs(n, m).unwrap();
            for (i, cfg) in b.configs().enumerate() {
                assert_eq!(b.index_of(cfg), i);
            }
            assert_eq!(b.find(&vec![0; m]), None);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            enumerate_configs_capped(1000, 3, 100_000),
            Err(Error::BasisTooLarge { requested: 501_501, .. })
        ));
        assert!(enumerate_configs(0, 3).is_err());
        assert!(enumerate_configs(3, 0).is_err());
    }

    #[test]
    fn diagonal_one_body_eigenvectors() {
        let b = enumerate_configs(3, 3).unwrap();
        let eps = [0.3, -1.1, 2.5];
        let h = ModeMatrix::from_fn(3, 3, |i, j| if i == j { c(eps[i], 0.0) } else { c(0.0, 0.0) });
        let w = ModeTensor4::zeros(3);
        for (i, cfg) in b.configs().enumerate() {
            let mut v = vec![c(0.0, 0.0); b.len()];
            v[i] = c(1.0, 0.0);
            let hv = apply_many_body_h(&v, &h, &w, &b).unwrap();
            let e: f64 = cfg.iter().zip(eps).map(|(&n, e)| n as f64 * e).sum();
            for (j, x) in hv.iter().enumerate() {
                let expect = if j == i { e } else { 0.0 };
                assert_abs_diff_eq!(x.re, expect, epsilon = 1e-14);
                assert_abs_diff_eq!(x.im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn single_mode_pair_energy() {
        let b = enumerate_configs(2, 1).unwrap();
        let h = ModeMatrix::from_element(1, 1, c(0.7, 0.0));
        let mut w = ModeTensor4::zeros(1);
        w.set(0, 0, 0, 0, c(-1.3, 0.0));
        let hv = apply_many_body_h(&[c(1.0, 0.0)], &h, &w, &b).unwrap();
        assert_abs_diff_eq!(hv[0].re, 2.0 * 0.7 - 1.3, epsilon = 1e-15);
    }

    #[test]
    fn densities_of_simple_states() {
        let b = enumerate_configs(5, 2).unwrap();
        let mut v = vec![c(0.0, 0.0); b.len()];
        v[0] = c(1.0, 0.0);
        let (r1, r2) = reduced_densities(&v, &b).unwrap();
        assert_abs_diff_eq!(r1[(0, 0)].re, 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r1[(1, 1)].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2.get(0, 0, 0, 0).re, 20.0, epsilon = 1e-13);

        let b = enumerate_configs(2, 2).unwrap();
        let v = vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let (r1, _) = reduced_densities(&v, &b).unwrap();
        assert_abs_diff_eq!(r1[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r1[(1, 1)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r1[(0, 1)].norm(), 0.0, epsilon = 1e-14);

        let v = vec![c(0.5, 0.0); 3];
        assert!(matches!(reduced_densities(&v, &b), Err(Error::Unnormalized(_))));
        assert!(matches!(reduced_densities(&v[..2], &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn pair_route_matches_explicit_two_body() {
        let b = enumerate_configs(4, 3).unwrap();
        let m = 3;
        // real-symmetric contact-like tensor built from random "orbital products"
        let prods: Vec<Vec<Complex64>> = (0..m)
            .map(|k| (0..7).map(|x| c(((k + 1) * (x + 2)) as f64 * 0.1, (k as f64 - x as f64) * 0.05)).collect())
            .collect();
        let mut w = ModeTensor4::zeros(m);
        for k in 0..m {
            for s in 0..m {
                for q in 0..m {
                    for l in 0..m {
                        let v: Complex64 = (0..7)
                            .map(|x| prods[k][x].conj() * prods[s][x].conj() * prods[q][x] * prods[l][x])
                            .sum();
                        w.set(k, s, q, l, v);
                    }
                }
            }
        }
        let cv: Vec<Complex64> = (0..b.len()).map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.71).cos())).collect();
        let mut explicit = vec![c(0.0, 0.0); b.len()];
        b.add_two_body(&cv, &w, &mut explicit);

        let d = b.pair_annihilation(&cv);
        let red = b.reduced().unwrap();
        let mut e = vec![c(0.0, 0.0); red.len() * m * m];
        for r in 0..red.len() {
            for k in 0..m {
                for s in 0..m {
                    let mut acc = c(0.0, 0.0);
                    for q in 0..m {
                        for l in 0..m {
                            acc += w.get(k, s, q, l) * d[(r * m + q) * m + l];
                        }
                    }
                    e[(r * m + k) * m + s] = acc;
                }
            }
        }
        let mut factored = vec![c(0.0, 0.0); b.len()];
        b.add_pair_creation(&e, &mut factored);
        for (a, f) in explicit.iter().zip(&factored) {
            assert!((a - f).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }
}
