//! Convergence tests built on exactly known center-of-mass behavior and on
//! the natural-occupancy threshold criterion.

use std::f64::consts::PI;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mctdhb::TimeSeries;

/// Default relative tolerance on `sigma_R^2`.
pub const DEFAULT_COM_TOLERANCE: f64 = 0.05;

/// Default occupancy threshold `n_M / N`.
pub const DEFAULT_OCCUPANCY_THRESHOLD: f64 = 1e-3;

/// Default slack of the width bounds as a fraction of `sigma_R^2`.
pub const DEFAULT_WIDTH_SLACK: f64 = 0.05;

/// Smallest mode number of the restricted power-law fit.
pub const POWER_LAW_MIN_M: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Unconverged,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Unconverged => "unconverged",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub test: String,
    pub verdict: Verdict,
    pub metric: f64,
    pub threshold: f64,
    /// Verdicts that must not gate a run on their own.
    pub advisory: bool,
    pub note: String,
    /// Column names of `rows`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DiagnosticReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Converged
    }
}

/// `max_t |sigma_R^2(run) / sigma_R^2(reference) - 1|` against `tol`.
pub fn com_convergence_test(series: &TimeSeries, reference: &TimeSeries, tol: f64) -> Result<DiagnosticReport> {
    let times: Vec<f64> = series.times.clone();
    let refs: Vec<f64> = reference.sigma_r2.clone();
    com_test_against(&times, &series.sigma_r2, &reference.times, &refs, tol)
}

/// Same test against a closed-form reference law.
pub fn com_convergence_against_law(
    series: &TimeSeries,
    law: impl Fn(f64) -> f64,
    tol: f64,
) -> Result<DiagnosticReport> {
    let refs: Vec<f64> = series.times.iter().map(|&t| law(t)).collect();
    com_test_against(&series.times, &series.sigma_r2, &series.times, &refs, tol)
}

fn com_test_against(times: &[f64], values: &[f64], ref_times: &[f64], refs: &[f64], tol: f64) -> Result<DiagnosticReport> {
    if times.len() != ref_times.len() {
        return Err(Error::DimensionMismatch(format!(
            "time series have {} and {} records",
            times.len(),
            ref_times.len()
        )));
    }
    if times.is_empty() {
        return Err(Error::InvalidInput("empty time series".into()));
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut metric: f64 = 0.0;
    for (i, (&t, &tr)) in times.iter().zip(ref_times).enumerate() {
        if (t - tr).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::DimensionMismatch(format!("time stamps differ at record {i}: {t} vs {tr}")));
        }
        let dev = values[i] / refs[i] - 1.0;
        metric = metric.max(dev.abs());
        rows.push(vec![t, values[i], refs[i], dev]);
    }
    let verdict = if metric > tol {
        Verdict::Unconverged
    } else {
        Verdict::Converged
    };
    Ok(DiagnosticReport {
        test: "com_variance".into(),
        verdict,
        metric,
        threshold: tol,
        advisory: false,
        note: "max relative deviation of sigma_R^2 from the interaction-independent reference".into(),
        columns: vec!["t".into(), "sigma_R2".into(), "reference".into(), "deviation".into()],
        rows,
    })
}

/// Largest `n_M / N` over all records compared against `threshold`.
///
/// The verdict is advisory: a small lowest occupancy does not establish convergence.
pub fn occupancy_threshold_check(series: &TimeSeries, n_particles: usize, threshold: f64) -> DiagnosticReport {
    let modes = series.occupations.first().map_or(0, |r| r.len());
    let lowest = series.lowest_fraction(n_particles);
    let rows: Vec<Vec<f64>> = series.times.iter().zip(&lowest).map(|(&t, &f)| vec![t, f]).collect();
    let metric = lowest.iter().copied().fold(0.0, f64::max);
    let (verdict, note) = if modes < 2 {
        (Verdict::Inconclusive, "criterion needs at least two modes")
    } else if metric < threshold {
        (
            Verdict::Converged,
            "converged by the occupancy criterion, which is known to be unreliable",
        )
    } else {
        (Verdict::Unconverged, "lowest occupancy above threshold")
    };
    DiagnosticReport {
        test: "occupancy_threshold".into(),
        verdict,
        metric,
        threshold,
        advisory: true,
        note: note.into(),
        columns: vec!["t".into(), "lowest_fraction".into()],
        rows,
    }
}

/// Checks `sigma_R^2 <= sigma_n^2 <~ sigma_R^2 + sigma_sol^2`; `slack` is relative to `sigma_R^2`.
pub fn width_bounds_check(sigma_r2: f64, sigma_n2: f64, sigma_sol2: f64, slack: f64) -> Result<DiagnosticReport> {
    if [sigma_r2, sigma_n2, sigma_sol2, slack].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("width bounds need non-negative inputs".into()));
    }
    let pad = slack * sigma_r2;
    let lower = sigma_r2 - pad;
    let upper = sigma_r2 + sigma_sol2 + pad;
    // signed distance outside the band, relative to sigma_R^2
    let metric = ((lower - sigma_n2).max(sigma_n2 - upper)) / sigma_r2;
    let verdict = if sigma_n2 < lower || sigma_n2 > upper {
        Verdict::Unconverged
    } else {
        Verdict::Converged
    };
    Ok(DiagnosticReport {
        test: "width_bounds".into(),
        verdict,
        metric,
        threshold: slack,
        advisory: false,
        note: "upper bound sigma_R^2 + sigma_sol^2 is approximate".into(),
        columns: vec!["sigma_R2".into(), "sigma_n2".into(), "sigma_sol2".into()],
        rows: vec![vec![sigma_r2, sigma_n2, sigma_sol2]],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub points: usize,
    /// Root-mean-square residual in log space.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub full: LineFit,
    /// Fit over `M >= 6`, when at least two such points exist.
    pub restricted: Option<LineFit>,
    /// Mode numbers dropped for non-positive errors.
    pub excluded: Vec<usize>,
}

/// Least-squares fit of `log err = log c + nu log M`.
pub fn power_law_fit(m_values: &[usize], errors: &[f64]) -> Result<PowerLawFit> {
    if m_values.len() != errors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} mode numbers, {} errors",
            m_values.len(),
            errors.len()
        )));
    }
    if m_values.len() < 3 {
        return Err(Error::InvalidInput("power-law fit needs at least three points".into()));
    }
    let mut pts = Vec::new();
    let mut excluded = Vec::new();
    for (&m, &e) in m_values.iter().zip(errors) {
        if e > 0.0 && e.is_finite() && m > 0 {
            pts.push((m, e));
        } else {
            warn!("power-law fit: dropping M = {m} with error {e}");
            excluded.push(m);
        }
    }
    if pts.len() < 2 {
        return Err(Error::InvalidInput("fewer than two positive errors".into()));
    }
    let full = fit_line(&pts);
    let tail: Vec<(usize, f64)> = pts.iter().copied().filter(|p| p.0 >= POWER_LAW_MIN_M).collect();
    let restricted = if tail.len() >= 2 { Some(fit_line(&tail)) } else { None };
    Ok(PowerLawFit {
        full,
        restricted,
        excluded,
    })
}

fn fit_line(pts: &[(usize, f64)]) -> LineFit {
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    LineFit {
        exponent: slope,
        prefactor: icpt.exp(),
        points: pts.len(),
        rms_residual: (rss / n).sqrt(),
    }
}

/// `sigma_R / sigma_sol` for the trapped ground state, `sigma_R^2 = lambda_0^2 / (2N)`,
/// `sigma_sol^2 = pi^2 / (3 g^2 (N-1)^2)`; units hbar = m = lambda_0 = 1.
pub fn length_ratio(g_tilde: f64, n: usize) -> Result<f64> {
    if !(g_tilde < 0.0) {
        return Err(Error::InvalidInput(format!("length ratio needs g < 0, got {g_tilde}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("length ratio needs N >= 2, got {n}")));
    }
    let nm1 = (n - 1) as f64;
    Ok(g_tilde.abs() * nm1 * 3f64.sqrt() / (PI * (2.0 * n as f64).sqrt()))
}

/// Inverse of [`length_ratio`].
pub fn coupling_for_ratio(ratio: f64, n: usize) -> Result<f64> {
    let unit = length_ratio(-1.0, n)?;
    if !(ratio > 0.0) {
        return Err(Error::InvalidInput(format!("ratio must be positive, got {ratio}")));
    }
    Ok(-ratio / unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(times: &[f64], s: &[f64], occ: &[Vec<f64>]) -> TimeSeries {
        TimeSeries {
            times: times.to_vec(),
            energy: vec![0.0; times.len()],
            sigma_r2: s.to_vec(),
            sigma_n2: s.to_vec(),
            occupations: occ.to_vec(),
            snapshots: vec![],
        }
    }

    #[test]
    fn identical_series_converge() {
        let a = series(&[0.0, 1.0], &[0.25, 0.5], &[vec![2.0], vec![2.0]]);
        let r = com_convergence_test(&a, &a, DEFAULT_COM_TOLERANCE).unwrap();
        assert_eq!(r.metric, 0.0);
        assert_eq!(r.verdict, Verdict::Converged);
        let b = series(&[0.0, 1.5], &[0.25, 0.5], &[vec![2.0], vec![2.0]]);
        assert!(com_convergence_test(&a, &b, 0.05).is_err());
        let c = series(&[0.0], &[0.25], &[vec![2.0]]);
        assert!(com_convergence_test(&a, &c, 0.05).is_err());
    }

    #[test]
    fn swapping_series_inverts_ratio() {
        let a = series(&[0.0, 1.0], &[0.25, 0.6], &[vec![2.0], vec![2.0]]);
        let b = series(&[0.0, 1.0], &[0.25, 0.5], &[vec![2.0], vec![2.0]]);
        let ab = com_convergence_test(&a, &b, 0.05).unwrap().metric;
        let ba = com_convergence_test(&b, &a, 0.05).unwrap().metric;
        assert_abs_diff_eq!(ab, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / (1.0 - ba), 1.0 + ab, epsilon = 1e-12);
    }

    #[test]
    fn occupancy_check_cases() {
        let n = 100;
        let occ = vec![93.0, 5.0, 1.2, 0.05];
        let s = series(&[0.0], &[1.0], &[occ]);
        let r = occupancy_threshold_check(&s, n, DEFAULT_OCCUPANCY_THRESHOLD);
        assert_eq!(r.verdict, Verdict::Converged);
        assert!(r.advisory);
        assert_abs_diff_eq!(r.metric, 5e-4, epsilon = 1e-15);
        let single = series(&[0.0], &[1.0], &[vec![100.0]]);
        assert_eq!(
            occupancy_threshold_check(&single, n, 1e-3).verdict,
            Verdict::Inconclusive
        );
        let high = series(&[0.0, 1.0], &[1.0, 1.0], &[vec![99.95, 0.05], vec![99.0, 1.0]]);
        assert_eq!(occupancy_threshold_check(&high, n, 1e-3).verdict, Verdict::Unconverged);
    }

    #[test]
    fn width_bounds_cases() {
        assert!(!width_bounds_check(1.0, 0.5, 0.3, 0.05).unwrap().passed());
        assert!(width_bounds_check(1.0, 1.0, 0.3, 0.05).unwrap().passed());
        assert!(width_bounds_check(1.0, 1.3, 0.3, 0.05).unwrap().passed());
        assert!(!width_bounds_check(1.0, 1.4, 0.3, 0.05).unwrap().passed());
        assert!(width_bounds_check(-1.0, 1.4, 0.3, 0.05).is_err());
    }

    #[test]
    fn power_law_cases() {
        let ms = [3, 4, 5, 6, 8, 10];
        let inv: Vec<f64> = ms.iter().map(|&m| 0.7 / m as f64).collect();
        let f = power_law_fit(&ms, &inv).unwrap();
        assert_abs_diff_eq!(f.full.exponent, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.full.prefactor, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(f.restricted.unwrap().exponent, -1.0, epsilon = 1e-12);
        let flat = power_law_fit(&ms, &[0.1; 6]).unwrap();
        assert_abs_diff_eq!(flat.full.exponent, 0.0, epsilon = 1e-12);
        let with_zero = power_law_fit(&[1, 2, 3, 4], &[1.0, 0.0, 1.0 / 3.0, 0.25]).unwrap();
        assert_eq!(with_zero.excluded, vec![2]);
        assert_abs_diff_eq!(with_zero.full.exponent, -1.0, epsilon = 1e-12);
        assert!(power_law_fit(&[1, 2], &[1.0, 0.5]).is_err());
    }

    #[test]
    fn length_ratio_limits() {
        assert!(length_ratio(-1e-9, 2).unwrap() < 1e-8);
        assert!(length_ratio(0.0, 2).is_err());
        let r = length_ratio(-3.1623, 2).unwrap();
        // sigma_R^2 = 1/4, sigma_sol^2 = pi^2 / (3 g^2)
        let direct = (0.25f64 / (PI * PI / (3.0 * 3.1623 * 3.1623))).sqrt();
        assert_abs_diff_eq!(r, direct, epsilon = 1e-12);
        assert_abs_diff_eq!(coupling_for_ratio(r, 2).unwrap(), -3.1623, epsilon = 1e-12);
    }
}
