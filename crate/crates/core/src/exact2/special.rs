//! Real gamma function and the confluent hypergeometric functions needed by
//! the two-boson relative wave function.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Smallest crossover between the integral representation and the asymptotic series.
pub const U_ASYMPTOTIC_FROM: f64 = 50.0;

/// The asymptotic series needs `x >> a^2`; below this the integral is used.
pub fn u_crossover(a: f64) -> f64 {
    U_ASYMPTOTIC_FROM.max(2.0 * (a.abs() + 1.0).powi(2))
}

fn lanczos_sum(z: f64) -> f64 {
    // z = x - 1
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    acc
}

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Gamma function on the real line; negative arguments use the reflection formula.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || is_pole(x) {
        return Err(Error::GammaPole(x));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else if x > 171.7 {
        f64::INFINITY
    } else if x == x.floor() && x <= 23.0 {
        (1..x as u64).map(|k| k as f64).product()
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
    }
}

/// `1 / Gamma(x)`, zero at the poles.
pub fn recip_gamma(x: f64) -> f64 {
    if is_pole(x) {
        0.0
    } else if x < 0.5 {
        (PI * x).sin() * gamma_unchecked(1.0 - x) / PI
    } else {
        (-ln_gamma(x)).exp()
    }
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// Kummer's function `M(a, b, x)` by its power series.
pub fn kummer_m(a: f64, b: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..100_000 {
        let nf = n as f64;
        term *= (a + nf) / (b + nf) * x / (nf + 1.0);
        sum += term;
        if term == 0.0 || (term.abs() < 1e-17 * sum.abs() && nf > x.abs()) {
            break;
        }
    }
    sum
}

/// `U(a, 1/2, x)` from the two Kummer M functions.
pub fn kummer_u_half_connection(a: f64, x: f64) -> f64 {
    let sqrt_pi = PI.sqrt();
    let first = sqrt_pi * recip_gamma(a + 0.5) * kummer_m(a, 0.5, x);
    let second = if is_pole(a) {
        0.0
    } else {
        -2.0 * sqrt_pi * recip_gamma(a) * x.sqrt() * kummer_m(a + 0.5, 1.5, x)
    };
    first + second
}

/// Poincare series `x^-a sum (a)_n (a+1/2)_n / n! (-x)^-n`, cut at its smallest term.
pub fn kummer_u_half_asymptotic(a: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut last = f64::INFINITY;
    for n in 0..500 {
        let nf = n as f64;
        let next = term * (a + nf) * (a + 0.5 + nf) / ((nf + 1.0) * -x);
        if next.abs() >= last.min(term.abs()) && n > 0 {
            break;
        }
        last = term.abs();
        term = next;
        sum += term;
        if term == 0.0 || term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x.powf(-a) * sum
}

/// `U(a, 1/2, x)` for `a > 0` from
/// `Gamma(a) U = int_0^inf exp(-x t) t^(a-1) (1+t)^(-a-1/2) dt`,
/// with the double-exponential map `t = exp(pi/2 sinh s)`.
pub fn kummer_u_half_integral(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x > 0.0);
    let h = 1.0 / 64.0;
    let log_f = |s: f64| -> f64 {
        let ln_t = 0.5 * PI * s.sinh();
        let t = ln_t.exp();
        a * ln_t - x * t - (a + 0.5) * t.ln_1p() + (0.5 * PI * s.cosh()).ln()
    };
    // The peak sits near t = a / x; walk outward from it until terms vanish.
    let t_peak = (a / x).max(1e-300);
    let s_peak = (2.0 / PI * t_peak.ln()).asinh();
    let k0 = (s_peak / h).round() as i64;
    let peak = log_f(k0 as f64 * h);
    let mut sum = 1.0;
    for dir in [-1i64, 1] {
        let mut k = k0 + dir;
        loop {
            let lf = log_f(k as f64 * h);
            let w = (lf - peak).exp();
            sum += w;
            if (w < 1e-18 * sum && (k - k0).abs() > 8) || !lf.is_finite() || (k - k0).abs() > 20_000 {
                break;
            }
            k += dir;
        }
    }
    (peak + (h * sum).ln() - ln_gamma(a)).exp()
}

/// Confluent hypergeometric function of the second kind `U(a, 1/2, x)`, `x >= 0`.
///
/// For `a > 0` the integral representation covers `x` below [`u_crossover`]
/// (50 for `|a| <= 4`) and the asymptotic series takes over above; `a <= 0` uses the connection formula through M.
pub fn kummer_u_half(a: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidInput(format!("U(a, 1/2, x) needs finite a and x >= 0; got a={a}, x={x}")));
    }
    if x == 0.0 {
        return Ok(PI.sqrt() * recip_gamma(a + 0.5));
    }
    if x >= u_crossover(a) {
        return Ok(kummer_u_half_asymptotic(a, x));
    }
    if a > 0.0 {
        Ok(kummer_u_half_integral(a, x))
    } else {
        Ok(kummer_u_half_connection(a, x))
    }
}

/// Relative disagreement of the two evaluation paths at the crossover.
pub fn kummer_u_seam_check(a: f64) -> Result<()> {
    let x = u_crossover(a);
    let below = if a > 0.0 {
        kummer_u_half_integral(a, x)
    } else {
        kummer_u_half_connection(a, x)
    };
    let above = kummer_u_half_asymptotic(a, x);
    let disagreement = (below - above).abs() / above.abs().max(f64::MIN_POSITIVE);
    if disagreement > 1e-8 {
        return Err(Error::PrecisionLoss { a, x, disagreement });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(5.0).unwrap(), 24.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_fn(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(2.5).unwrap(), 1.329_340_388_179_137, max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(-2.3).unwrap(), -1.447_107_394_255_917_7, max_relative = 1e-13);
        assert!(matches!(gamma_fn(0.0), Err(Error::GammaPole(_))));
        assert!(matches!(gamma_fn(-3.0), Err(Error::GammaPole(_))));
        assert_eq!(recip_gamma(-2.0), 0.0);
        assert_relative_eq!(ln_gamma(30.5), gamma_fn(30.5).unwrap().ln(), max_relative = 1e-13);
    }

    #[test]
    fn kummer_u_closed_forms() {
        for x in [0.0, 0.3, 2.0, 17.0, 45.0, 90.0] {
            assert_relative_eq!(kummer_u_half(0.0, x).unwrap(), 1.0, max_relative = 1e-13);
            assert_relative_eq!(kummer_u_half(-0.5, x).unwrap(), x.sqrt(), max_relative = 1e-12, epsilon = 1e-14);
        }
        for a in [0.3, 1.5, 4.0] {
            let x = 1e7;
            assert_relative_eq!(kummer_u_half(a, x).unwrap() * x.powf(a), 1.0, max_relative = 1e-5);
        }
    }

    // reference values from mpmath.hyperu at 30 digits
    const REFERENCE: [(f64, f64, f64); 11] = [
        (1.5, 0.5, 0.440_328_240_545_404_7),
        (1.5, 5.0, 0.057_528_031_476_335_195),
        (1.5, 20.0, 0.009_760_016_355_911_772),
        (1.5, 30.0, 0.005_543_291_790_552_134),
        (1.5, 60.0, 0.002_050_319_733_947_131_5),
        (0.005, 3.0, 0.993_828_691_683_680_8),
        (0.005, 40.0, 0.981_663_813_868_325_5),
        (12.5, 2.0, 4.670_917_307_582_274_5e-13),
        (12.5, 35.0, 1.472_493_366_194_915_5e-21),
        (0.7, 10.0, 0.185_237_964_499_339_4),
        (0.25, 1.0, 0.893_277_955_139_367_3),
    ];

    #[test]
    fn kummer_u_against_reference() {
        for (a, x, expect) in REFERENCE {
            let got = kummer_u_half(a, x).unwrap();
            assert_relative_eq!(got, expect, max_relative = 1e-11);
        }
    }

    #[test]
    fn connection_formula_agrees_at_small_x() {
        for a in [0.1, 0.9, 1.476] {
            for x in [0.2, 1.0] {
                let i = kummer_u_half_integral(a, x);
                let c = kummer_u_half_connection(a, x);
                assert_relative_eq!(i, c, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn seam_is_consistent() {
        for a in [0.005, 0.2, 1.476, 6.0, 15.0] {
            kummer_u_seam_check(a).unwrap();
        }
    }
}
