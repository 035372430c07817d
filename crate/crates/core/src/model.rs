//! Spatial discretization and the physical problem definition.
//!
//! Units: hbar = 1 throughout. Trapped runs measure lengths in the
//! oscillator length of the initial trap, untrapped runs in the unit length
//! of the initial soliton profile.

use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Equidistant 1D grid with hard walls just outside the first and last point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_points: usize,
    length: f64,
    center: f64,
    spacing: f64,
}

/// Builds the grid `x_i = center - L/2 + i L/(n-1)`.
pub fn make_grid(length: f64, n_points: usize, center: f64) -> Result<Grid> {
    Grid::new(length, n_points, center)
}

impl Grid {
    pub const MIN_POINTS: usize = 5;

    pub fn new(length: f64, n_points: usize, center: f64) -> Result<Self> {
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        if !center.is_finite() {
            return Err(Error::InvalidGrid("center must be finite".into()));
        }
        Ok(Grid {
            n_points,
            length,
            center,
            spacing: length / (n_points - 1) as f64,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn x(&self, i: usize) -> f64 {
        self.center - 0.5 * self.length + i as f64 * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Samples `f` on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> Complex64) -> ComplexField {
        ComplexField((0..self.n_points).map(|i| f(self.x(i))).collect())
    }

    pub fn zeros(&self) -> ComplexField {
        ComplexField(vec![Complex64::new(0.0, 0.0); self.n_points])
    }

    pub(crate) fn check(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.n_points {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Complex function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexField(pub Vec<Complex64>);

impl ComplexField {
    pub fn new(values: Vec<Complex64>) -> Self {
        ComplexField(values)
    }

    pub fn from_real(values: &[f64]) -> Self {
        ComplexField(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sqr(&self, grid: &Grid) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()
    }

    pub fn scale(&mut self, s: Complex64) {
        self.0.iter_mut().for_each(|z| *z *= s);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: Complex64, other: &ComplexField) {
        for (y, x) in self.0.iter_mut().zip(other.0.iter()) {
            *y += a * x;
        }
    }
}

impl Deref for ComplexField {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for ComplexField {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

/// Fourth-order five-point second derivative; values outside the box are zero.
pub fn laplacian5(f: &ComplexField, grid: &Grid) -> Result<ComplexField> {
    grid.check(f)?;
    let mut out = grid.zeros();
    laplacian5_into(f, grid.spacing(), &mut out);
    Ok(out)
}

pub(crate) fn laplacian5_into(f: &[Complex64], dx: f64, out: &mut [Complex64]) {
    let n = f.len();
    let c = 1.0 / (12.0 * dx * dx);
    let zero = Complex64::new(0.0, 0.0);
    let at = |i: isize| -> Complex64 {
        if i < 0 || i as usize >= n {
            zero
        } else {
            f[i as usize]
        }
    };
    let interior = 2..n.saturating_sub(2);
    for i in (0..n).filter(|i| !interior.contains(i)) {
        let i = i as isize;
        out[i as usize] = c
            * (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2));
    }
    for i in interior {
        out[i] = c * (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]);
    }
}

/// Rectangle-rule inner product `<f|g> = sum conj(f) g dx`.
pub fn quadrature(f: &ComplexField, g: &ComplexField, grid: &Grid) -> Result<Complex64> {
    grid.check(f)?;
    grid.check(g)?;
    Ok(inner(f, g, grid.spacing()))
}

#[inline]
pub(crate) fn inner(f: &[Complex64], g: &[Complex64], dx: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.iter().zip(g) {
        acc += a.conj() * b;
    }
    acc * dx
}

/// Piecewise-constant function of time: `initial` before the first switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub initial: f64,
    /// `(switch time, value from then on)`, sorted by time.
    pub switches: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule {
            initial: value,
            switches: Vec::new(),
        }
    }

    /// `initial` for t < t_switch, `after` for t >= t_switch.
    pub fn step(initial: f64, t_switch: f64, after: f64) -> Self {
        Schedule {
            initial,
            switches: vec![(t_switch, after)],
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.switches
            .iter()
            .take_while(|(ts, _)| *ts <= t)
            .last()
            .map(|&(_, v)| v)
            .unwrap_or(self.initial)
    }

    /// Switch times strictly inside `(t0, t1)`.
    pub fn switches_between(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.switches
            .iter()
            .map(|&(t, _)| t)
            .filter(move |&t| t > t0 && t < t1)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.initial.is_finite() {
            return Err(Error::InvalidInput(format!("{name}: initial value must be finite")));
        }
        for w in self.switches.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidInput(format!("{name}: switch times must increase")));
            }
        }
        if self.switches.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name}: non-finite switch")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    /// hbar = m = omega_0 = 1; lengths in lambda_0.
    Trapped,
    /// hbar = m = 1; lengths in the soliton unit length ell.
    Untrapped,
}

/// `H = sum_i [-1/(2m) d^2/dx_i^2 + m omega(t)^2 x_i^2 / 2] + g(t) sum_{i<j} delta(x_i - x_j)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub mass: f64,
    pub omega: Schedule,
    pub g: Schedule,
    pub units: UnitSystem,
}

impl HamiltonianSpec {
    pub fn new(mass: f64, omega: Schedule, g: Schedule, units: UnitSystem) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
        }
        omega.validate("omega")?;
        g.validate("g")?;
        if omega.initial < 0.0 || omega.switches.iter().any(|&(_, w)| w < 0.0) {
            return Err(Error::InvalidInput("trap frequency must be non-negative".into()));
        }
        Ok(HamiltonianSpec { mass, omega, g, units })
    }

    /// Time-independent trap and coupling.
    pub fn stationary(omega: f64, g: f64) -> Self {
        let units = if omega > 0.0 {
            UnitSystem::Trapped
        } else {
            UnitSystem::Untrapped
        };
        HamiltonianSpec {
            mass: 1.0,
            omega: Schedule::constant(omega),
            g: Schedule::constant(g),
            units,
        }
    }

    /// Trap at `omega0` for t < 0, switched off for t >= 0.
    pub fn trap_release(omega0: f64, g: f64) -> Self {
        HamiltonianSpec {
            mass: 1.0,
            omega: Schedule::step(omega0, 0.0, 0.0),
            g: Schedule::constant(g),
            units: UnitSystem::Trapped,
        }
    }

    pub fn omega_at(&self, t: f64) -> f64 {
        self.omega.at(t)
    }

    pub fn g_at(&self, t: f64) -> f64 {
        self.g.at(t)
    }

    /// Static copy holding the values in force before any switch.
    pub fn initial_static(&self) -> Self {
        HamiltonianSpec {
            mass: self.mass,
            omega: Schedule::constant(self.omega.initial),
            g: Schedule::constant(self.g.initial),
            units: self.units,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.omega.switches.iter().all(|&(_, w)| w == self.omega.initial)
            && self.g.switches.iter().all(|&(_, g)| g == self.g.initial)
    }

    /// Times in `(t0, t1)` where either schedule switches.
    pub fn switch_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .omega
            .switches_between(t0, t1)
            .chain(self.g.switches_between(t0, t1))
            .collect();
        ts.sort_by(|a, b| a.total_cmp(b));
        ts.dedup();
        ts
    }

    /// Single-particle operator `h = -1/(2m) d^2/dx^2 + m omega^2 x^2 / 2` applied to `f`.
    pub fn apply_one_body(&self, f: &[Complex64], grid: &Grid, t: f64, out: &mut [Complex64]) {
        laplacian5_into(f, grid.spacing(), out);
        let kin = -0.5 / self.mass;
        let w = self.omega_at(t);
        let pot = 0.5 * self.mass * w * w;
        for (i, (o, v)) in out.iter_mut().zip(f).enumerate() {
            let x = grid.x(i);
            *o = kin * *o + pot * x * x * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_points_and_spacing() {
        let g = make_grid(10.0, 5, 0.0).unwrap();
        assert_eq!(g.points(), vec![-5.0, -2.5, 0.0, 2.5, 5.0]);
        let g = make_grid(30.0, 1400, 0.0).unwrap();
        assert_abs_diff_eq!(g.spacing(), 0.021444, epsilon = 1e-6);
        let g = make_grid(25.0, 600, 0.0).unwrap();
        assert_abs_diff_eq!(g.spacing(), 0.041736, epsilon = 1e-6);
        assert_abs_diff_eq!(g.spacing() * 599.0, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(10.0, 4, 0.0).is_err());
        assert!(make_grid(0.0, 10, 0.0).is_err());
        assert!(make_grid(-1.0, 10, 0.0).is_err());
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = make_grid(4.0, 41, 0.3).unwrap();
        let f = g.sample(|x| Complex64::new(x * x, -0.5 * x * x));
        let d = laplacian5(&f, &g).unwrap();
        for i in 2..39 {
            assert_abs_diff_eq!(d[i].re, 2.0, epsilon = 1e-9);
            assert_abs_diff_eq!(d[i].im, -1.0, epsilon = 1e-9);
        }
        let z = laplacian5(&g.zeros(), &g).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn laplacian_sine_accuracy() {
        let k = 3.0;
        let g = make_grid(6.0, 1801, 0.0).unwrap();
        assert_abs_diff_eq!(k * g.spacing(), 0.01, epsilon = 1e-12);
        let f = g.sample(|x| Complex64::new((k * x).sin(), 0.0));
        let d = laplacian5(&f, &g).unwrap();
        let mut worst: f64 = 0.0;
        for i in 2..g.n_points() - 2 {
            let exact = -k * k * (k * g.x(i)).sin();
            worst = worst.max((d[i].re - exact).abs() / (k * k));
        }
        assert!(worst < 1e-5, "relative error {worst}");
    }

    #[test]
    fn quadrature_norms() {
        let g = make_grid(40.0, 2001, 0.0).unwrap();
        let gauss = g.sample(|x| Complex64::new(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp(), 0.0));
        assert_abs_diff_eq!(quadrature(&gauss, &gauss, &g).unwrap().re, 1.0, epsilon = 1e-12);
        let first = g.sample(|x| {
            Complex64::new(std::f64::consts::SQRT_2 * std::f64::consts::PI.powf(-0.25) * x * (-0.5 * x * x).exp(), 0.0)
        });
        assert_abs_diff_eq!(quadrature(&gauss, &first, &g).unwrap().norm(), 0.0, epsilon = 1e-10);
        let ell = 1.3;
        let sech = g.sample(|x| Complex64::new(1.0 / (x / ell).cosh() / (2.0 * ell).sqrt(), 0.0));
        assert_abs_diff_eq!(quadrature(&sech, &sech, &g).unwrap().re, 1.0, epsilon = 1e-10);
        let other = make_grid(40.0, 2000, 0.0).unwrap();
        assert!(matches!(quadrature(&sech, &other.zeros(), &other), Err(Error::GridMismatch)));
    }

    #[test]
    fn schedule_trap_release() {
        let spec = HamiltonianSpec::trap_release(1.0, -2.0);
        assert_eq!(spec.omega_at(-1.0), 1.0);
        assert_eq!(spec.omega_at(0.0), 0.0);
        assert_eq!(spec.omega_at(5.0), 0.0);
        assert_eq!(spec.initial_static().omega_at(3.0), 1.0);
        assert!(!spec.is_time_independent());
        assert!(HamiltonianSpec::stationary(1.0, -1.0).is_time_independent());
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn laplacian_symmetric_under_quadrature(
            a in proptest::collection::vec(-1.0f64..1.0, 20),
            b in proptest::collection::vec(-1.0f64..1.0, 20),
        ) {
            let g = make_grid(3.0, 24, 0.0).unwrap();
            let pad = |v: &[f64]| {
                let mut f = g.zeros();
                for (i, pair) in v.chunks(2).enumerate() {
                    f[2 + 2 * i] = Complex64::new(pair[0], pair[1]);
                    f[3 + 2 * i] = Complex64::new(pair[1], -pair[0]);
                }
                f
            };
            let f = pad(&a);
            let h = pad(&b);
            let lhs = quadrature(&f, &laplacian5(&h, &g).unwrap(), &g).unwrap();
            let rhs = quadrature(&laplacian5(&f, &g).unwrap(), &h, &g).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }

        #[test]
        fn quadrature_positive_field(v in proptest::collection::vec(0.0f64..2.0, 8)) {
            let g = make_grid(1.0, 8, 0.0).unwrap();
            let f = ComplexField::from_real(&v);
            let q = quadrature(&f, &f, &g).unwrap();
            prop_assert!(q.re >= 0.0 && q.im.abs() < 1e-15);
        }
    }
}
