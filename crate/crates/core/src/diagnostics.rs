//! Residual diagnostics: the White heteroskedasticity test and the
//! Breusch-Godfrey serial-correlation LM test with within-group lags.

use alloc::vec::Vec;
use core::fmt;

use crate::ols::{fit_ols, OlsError, OlsOptions};
use crate::stats::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticsError {
    /// The auxiliary regression is rank deficient or underdetermined.
    DegenerateAuxiliary,
    ZeroLags,
    /// Some lag column would be identically zero because no group is long
    /// enough.
    LagsExceedGroups { lags: usize, max_group: usize },
    GroupsMismatch,
    Mismatch,
}

impl fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticsError::DegenerateAuxiliary => {
                f.write_str("auxiliary regression is degenerate")
            }
            DiagnosticsError::ZeroLags => f.write_str("lag order must be at least 1"),
            DiagnosticsError::LagsExceedGroups { lags, max_group } => {
                write!(f, "lag order {lags} not below longest group length {max_group}")
            }
            DiagnosticsError::GroupsMismatch => {
                f.write_str("group lengths do not sum to the row count")
            }
            DiagnosticsError::Mismatch => f.write_str("column lengths differ"),
        }
    }
}

impl core::error::Error for DiagnosticsError {}

/// A test statistic with its chi-square right-tail p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
}

/// White test: regress squared residuals on the regressors, their squares,
/// and their cross products; the statistic is `n * R^2` of that auxiliary
/// fit, chi-square with one degree of freedom per auxiliary regressor.
pub fn white_test(
    residuals: &[f64],
    regressors: &[&[f64]],
) -> Result<TestResult, DiagnosticsError> {
    let n = residuals.len();
    if regressors.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::Mismatch);
    }
    let e2: Vec<f64> = residuals.iter().map(|e| e * e).collect();

    let mut aux: Vec<Vec<f64>> = Vec::new();
    for col in regressors {
        aux.push(col.to_vec());
    }
    for col in regressors {
        aux.push(col.iter().map(|x| x * x).collect());
    }
    for (i, a) in regressors.iter().enumerate() {
        for b in regressors.iter().skip(i + 1) {
            aux.push(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect());
        }
    }
    aux_nr2(&e2, &aux)
}

/// Breusch-Godfrey LM test: regress residuals on the regressors plus `lags`
/// lagged residuals, with lags taken strictly inside each group (typically a
/// (stock, day) block); pre-sample lags are zero. The statistic is `n * R^2`
/// of the auxiliary fit, chi-square with `lags` degrees of freedom.
pub fn lm_serial_test(
    residuals: &[f64],
    regressors: &[&[f64]],
    group_lengths: &[usize],
    lags: usize,
) -> Result<TestResult, DiagnosticsError> {
    let n = residuals.len();
    if lags == 0 {
        return Err(DiagnosticsError::ZeroLags);
    }
    if group_lengths.iter().sum::<usize>() != n {
        return Err(DiagnosticsError::GroupsMismatch);
    }
    if regressors.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::Mismatch);
    }
    let max_group = group_lengths.iter().copied().max().unwrap_or(0);
    if lags >= max_group {
        return Err(DiagnosticsError::LagsExceedGroups { lags, max_group });
    }

    let mut aux: Vec<Vec<f64>> = regressors.iter().map(|c| c.to_vec()).collect();
    for lag in 1..=lags {
        let mut col = Vec::with_capacity(n);
        let mut start = 0;
        for len in group_lengths {
            for offset in 0..*len {
                if offset >= lag {
                    col.push(residuals[start + offset - lag]);
                } else {
                    col.push(0.0);
                }
            }
            start += len;
        }
        aux.push(col);
    }
    let result = aux_nr2(residuals, &aux)?;
    Ok(TestResult {
        dof: lags as u32,
        p_value: chi2_sf(result.statistic, lags as u32),
        ..result
    })
}

fn aux_nr2(target: &[f64], aux: &[Vec<f64>]) -> Result<TestResult, DiagnosticsError> {
    let cols: Vec<&[f64]> = aux.iter().map(|c| c.as_slice()).collect();
    let fit = fit_ols(target, &cols, &OlsOptions::default()).map_err(|e| match e {
        OlsError::Collinear { .. } | OlsError::Underdetermined { .. } => {
            DiagnosticsError::DegenerateAuxiliary
        }
        _ => DiagnosticsError::Mismatch,
    })?;
    let dof = aux.len() as u32;
    let statistic = target.len() as f64 * fit.r_squared;
    Ok(TestResult {
        statistic,
        p_value: chi2_sf(statistic, dof),
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_squared_residuals_give_zero_statistic() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let e: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let res = white_test(&e, &[&x]).unwrap();
        assert!(res.statistic.abs() < 1e-9);
        assert!((res.p_value - 1.0).abs() < 1e-9);
        assert_eq!(res.dof, 2);
    }

    #[test]
    fn white_detects_variance_proportional_to_x_squared() {
        let n = 2_000;
        let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 1000) as f64 - 500.0) / 250.0).collect();
        // deterministic pseudo-noise with sd proportional to |x|
        let e: Vec<f64> = (0..n)
            .map(|i| {
                let u = ((i * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5;
                x[i] * u * 3.0
            })
            .collect();
        let res = white_test(&e, &[&x]).unwrap();
        assert!(res.p_value < 1e-6, "stat {} p {}", res.statistic, res.p_value);
    }

    #[test]
    fn lm_rejects_zero_lags_and_long_lags() {
        let e = [0.1, -0.2, 0.3, 0.0, 0.5, -0.1];
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(
            lm_serial_test(&e, &[&x], &[3, 3], 0),
            Err(DiagnosticsError::ZeroLags)
        );
        assert_eq!(
            lm_serial_test(&e, &[&x], &[3, 3], 3),
            Err(DiagnosticsError::LagsExceedGroups { lags: 3, max_group: 3 })
        );
        assert_eq!(
            lm_serial_test(&e, &[&x], &[2, 3], 1),
            Err(DiagnosticsError::GroupsMismatch)
        );
    }

    #[test]
    fn lag_columns_reset_at_group_boundaries() {
        // strong AR(1) within one long group, detected
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).sin()).collect();
        let mut e = vec![0.0f64; n];
        let mut prev = 0.0;
        for i in 0..n {
            let shock = (((i * 193) % 97) as f64 - 48.0) / 48.0;
            prev = 0.9 * prev + shock;
            e[i] = prev;
        }
        let one_group = lm_serial_test(&e, &[&x], &[n], 1).unwrap();
        assert!(one_group.p_value < 1e-6);

        // the same residuals chopped into 2-row groups lose most of the
        // usable lag structure but still run
        let pairs: Vec<usize> = core::iter::repeat(2).take(n / 2).collect();
        let chopped = lm_serial_test(&e, &[&x], &pairs, 1).unwrap();
        assert!(chopped.statistic >= 0.0);
        assert_eq!(chopped.dof, 1);
    }
}
