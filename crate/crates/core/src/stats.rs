//! Special functions backing the regression p-values (log-gamma, regularized
//! incomplete gamma and beta, chi-square/F/t tail probabilities) plus simple
//! descriptive statistics.

use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Natural log of the gamma function for x > 0 (Lanczos approximation,
/// g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // reflection keeps accuracy near zero
        let pi = core::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * core::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x), via the series for x < a + 1
/// and the Lentz continued fraction otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if ln_front < -700.0 {
        return if x < a { 0.0 } else { 1.0 };
    }
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    ln_front.exp() * sum
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if ln_front < -700.0 {
        return if x < a { 1.0 } else { 0.0 };
    }
    // modified Lentz on the standard continued fraction for Q
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    ln_front.exp() * h
}

fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0
        + inv2 * (-1.0 / 360.0 + inv2 * (1.0 / 1260.0 + inv2 * (-1.0 / 1680.0))))
}

/// ln B(a, b). For a large argument the difference of log-gammas loses
/// absolute precision, so the shared Stirling terms are cancelled
/// analytically instead.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi < 40.0 {
        return ln_gamma(hi) + ln_gamma(lo) - ln_gamma(hi + lo);
    }
    // ln Γ(hi) - ln Γ(hi + lo) via Stirling
    let diff = -(hi - 0.5) * (lo / hi).ln_1p() - lo * (hi + lo).ln() + lo
        + stirling_tail(hi)
        - stirling_tail(hi + lo);
    ln_gamma(lo) + diff
}

/// Regularized incomplete beta I_x(a, b) (Lentz continued fraction with the
/// symmetry transform for convergence).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Right tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_sf(x: f64, dof: u32) -> f64 {
    debug_assert!(dof >= 1);
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, x / 2.0)
}

/// Right tail of the F distribution with (d1, d2) degrees of freedom.
pub fn f_sf(f: f64, d1: u32, d2: u32) -> f64 {
    debug_assert!(d1 >= 1 && d2 >= 1);
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let d1 = d1 as f64;
    let d2 = d2 as f64;
    inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided tail of the Student t distribution: P(|T| >= |t|).
pub fn t_sf_two_sided(t: f64, dof: u32) -> f64 {
    debug_assert!(dof >= 1);
    if t == 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let nu = dof as f64;
    inc_beta(nu / 2.0, 0.5, nu / (nu + t * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsError {
    EmptyColumn,
    NonFinite,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptyColumn => f.write_str("column is empty"),
            StatsError::NonFinite => f.write_str("column contains a non-finite value"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Mean, sample (n-1) standard deviation, maximum, and minimum of a column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

pub fn describe(values: &[f64]) -> Result<DescriptiveStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyColumn);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n as f64 - 1.0)).sqrt()
    };
    let mut max = values[0];
    let mut min = values[0];
    for v in &values[1..] {
        if *v > max {
            max = *v;
        }
        if *v < min {
            min = *v;
        }
    }
    Ok(DescriptiveStats {
        n,
        mean,
        std,
        max,
        min,
    })
}

/// Collect the finite `Some` values of an optional column.
pub fn present_values(column: &[Option<f64>]) -> Vec<f64> {
    column.iter().filter_map(|v| *v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let scale = expected.abs().max(1e-300);
        assert!(
            (actual - expected).abs() <= tol * scale,
            "actual {actual:e} expected {expected:e} (rel {:.3e})",
            (actual - expected).abs() / scale
        );
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert_rel(ln_gamma(0.5), 0.5723649429247, 1e-12);
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert_rel(ln_gamma(1.5), -0.12078223763524526, 1e-12);
        assert_rel(ln_gamma(7.77), 8.065121745115475, 1e-12);
        assert_rel(ln_gamma(100.5), 361.43554046777757, 1e-12);
        assert_rel(ln_gamma(10_000.0), 82099.71749644238, 1e-12);
        assert_rel(ln_gamma(0.001), 6.907178885383853, 1e-12);
    }

    #[test]
    fn gamma_p_reference_values() {
        assert_rel(gamma_p(0.5, 0.25), 0.5204998778130466, 1e-11);
        assert_rel(gamma_p(5.0, 2.0), 0.052653017343711125, 1e-11);
        assert_rel(gamma_p(5.0, 10.0), 0.9707473119230389, 1e-11);
        assert_rel(gamma_p(100.0, 100.0), 0.5132987982791487, 1e-11);
        assert!((gamma_p(2.0, 4.0) + gamma_q(2.0, 4.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inc_beta_reference_values() {
        assert_rel(inc_beta(0.5, 0.5, 0.3), 0.36901011956554536, 1e-11);
        assert_rel(inc_beta(2.0, 3.0, 0.5), 0.6875, 1e-12);
        assert_rel(inc_beta(50.0, 50.0, 0.6), 0.978069557869915, 1e-11);
        assert_rel(inc_beta(99_999.0, 0.5, 0.9999), 7.741179341123755e-6, 1e-9);
        assert_eq!(inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(inc_beta(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn chi2_sf_reference_values() {
        assert_rel(chi2_sf(0.5, 1), 0.47950012218695337, 1e-11);
        assert_rel(chi2_sf(3.841458820694124, 1), 0.05, 1e-10);
        assert_rel(chi2_sf(5.991464547107979, 2), 0.05, 1e-10);
        assert_rel(chi2_sf(0.1, 2), 0.951229424500714, 1e-11);
        assert_rel(chi2_sf(7.814727903251179, 3), 0.05, 1e-10);
        assert_rel(chi2_sf(1.145476226061769, 5), 0.95, 1e-10);
        assert_rel(chi2_sf(18.307038053275146, 10), 0.05, 1e-10);
        assert_rel(chi2_sf(23.68479130484058, 14), 0.05, 1e-10);
        // deep tails
        assert_rel(chi2_sf(745.32, 2), 1.431589069955633e-162, 1e-9);
        assert_rel(chi2_sf(745.32, 1), 4.178364222233138e-164, 1e-9);
        assert_eq!(chi2_sf(0.0, 3), 1.0);
    }

    #[test]
    fn f_sf_reference_values() {
        assert_rel(f_sf(1.0, 1, 10), 0.34089313230205975, 1e-11);
        assert_rel(f_sf(3.381, 1, 199_998), 0.065953509787668, 1e-10);
        assert_rel(f_sf(2.5, 3, 96), 0.0640947236317047, 1e-11);
        assert_rel(f_sf(8.013, 1, 199_998), 0.004644736668379578, 1e-10);
        assert_rel(f_sf(0.5, 4, 20), 0.7360371889109241, 1e-11);
        assert_eq!(f_sf(f64::INFINITY, 1, 10), 0.0);
    }

    #[test]
    fn t_sf_reference_values() {
        assert_rel(t_sf_two_sided(2.0, 10), 0.07338803477074039, 1e-11);
        assert_rel(t_sf_two_sided(1.96, 1000), 0.05027318495574871, 1e-10);
        assert_rel(t_sf_two_sided(0.5, 3), 0.651447964848151, 1e-11);
        assert_rel(t_sf_two_sided(2.5, 19), 0.021740411168397436, 1e-11);
        assert_eq!(t_sf_two_sided(0.0, 5), 1.0);
        assert_eq!(t_sf_two_sided(-2.0, 10), t_sf_two_sided(2.0, 10));
    }

    #[test]
    fn describe_examples() {
        let s = describe(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std, s.max, s.min), (1.0, 0.0, 1.0, 1.0));
        let s = describe(&[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert_eq!(s.std, 2.0f64.sqrt());
        assert_eq!((s.max, s.min), (2.0, 0.0));
        assert_eq!(describe(&[]), Err(StatsError::EmptyColumn));
        assert_eq!(describe(&[f64::NAN]), Err(StatsError::NonFinite));
    }
}
