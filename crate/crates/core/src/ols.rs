//! Ordinary least squares via Householder QR, with classical or
//! heteroskedasticity-robust standard errors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

use crate::stats::{f_sf, t_sf_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlsError {
    /// Fewer rows than regressors + 2.
    Underdetermined { n: usize, needed: usize },
    /// The regressor matrix (with intercept) is rank deficient.
    Collinear { column: usize },
    LengthMismatch,
    NonFinite,
}

impl fmt::Display for OlsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OlsError::Underdetermined { n, needed } => {
                write!(f, "{n} rows, need at least {needed}")
            }
            OlsError::Collinear { column } => {
                write!(f, "design matrix is rank deficient at column {column}")
            }
            OlsError::LengthMismatch => f.write_str("column lengths differ"),
            OlsError::NonFinite => f.write_str("inputs contain a non-finite value"),
        }
    }
}

impl core::error::Error for OlsError {}

/// Options for a single fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct OlsOptions {
    /// Use HC1 heteroskedasticity-robust standard errors instead of the
    /// classical covariance.
    pub robust_se: bool,
}

/// A fitted regression. Coefficient order is `[intercept, regressors...]`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub n: usize,
    /// Number of regressors excluding the intercept.
    pub k: usize,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t_stat: Vec<f64>,
    /// Two-sided p-values from the t distribution with `dof_resid` degrees
    /// of freedom.
    pub p_value: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub sigma2: f64,
    pub dof_resid: usize,
}

/// Fit `y` on an intercept plus `regressors` (each a column of length
/// `y.len()`).
pub fn fit_ols(y: &[f64], regressors: &[&[f64]], options: &OlsOptions) -> Result<OlsFit, OlsError> {
    let n = y.len();
    let k = regressors.len();
    let p = k + 1;
    if regressors.iter().any(|c| c.len() != n) {
        return Err(OlsError::LengthMismatch);
    }
    if n < k + 2 {
        return Err(OlsError::Underdetermined { n, needed: k + 2 });
    }
    if y.iter().any(|v| !v.is_finite())
        || regressors
            .iter()
            .any(|c| c.iter().any(|v| !v.is_finite()))
    {
        return Err(OlsError::NonFinite);
    }

    // column-major working copy of [1 | X], transformed in place
    let mut a: Vec<f64> = Vec::with_capacity(n * p);
    a.extend(core::iter::repeat(1.0).take(n));
    for col in regressors {
        a.extend_from_slice(col);
    }
    let mut qty: Vec<f64> = y.to_vec();

    let col_scales: Vec<f64> = (0..p)
        .map(|j| {
            let c = &a[j * n..(j + 1) * n];
            c.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();

    // Householder elimination
    for j in 0..p {
        let (alpha, v0) = {
            let col = &a[j * n..(j + 1) * n];
            let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= col_scales[j].max(1.0) * 1e-12 {
                return Err(OlsError::Collinear { column: j });
            }
            let alpha = if col[j] >= 0.0 { -norm } else { norm };
            (alpha, col[j] - alpha)
        };
        // v = [col[j] - alpha, col[j+1..]], implicit; vTv = -2 * alpha * v0
        let vtv = v0 * v0
            + a[j * n + j + 1..(j + 1) * n]
                .iter()
                .map(|v| v * v)
                .sum::<f64>();
        if vtv <= 0.0 {
            return Err(OlsError::Collinear { column: j });
        }
        // apply H = I - 2 v v^T / vTv to remaining columns and to qty
        for target in j + 1..p {
            let mut dot = v0 * a[target * n + j];
            for i in j + 1..n {
                dot += a[j * n + i] * a[target * n + i];
            }
            let scale = 2.0 * dot / vtv;
            a[target * n + j] -= scale * v0;
            for i in j + 1..n {
                a[target * n + i] -= scale * a[j * n + i];
            }
        }
        {
            let mut dot = v0 * qty[j];
            for i in j + 1..n {
                dot += a[j * n + i] * qty[i];
            }
            let scale = 2.0 * dot / vtv;
            qty[j] -= scale * v0;
            for i in j + 1..n {
                qty[i] -= scale * a[j * n + i];
            }
        }
        a[j * n + j] = alpha;
        for i in j + 1..n {
            a[j * n + i] = 0.0;
        }
    }

    // back-substitute R b = Q^T y
    let r = |row: usize, col: usize| a[col * n + row];
    let mut coef = vec![0.0; p];
    for row in (0..p).rev() {
        let mut acc = qty[row];
        for col in row + 1..p {
            acc -= r(row, col) * coef[col];
        }
        coef[row] = acc / r(row, row);
    }

    // residuals from the original data
    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        let mut fitted = coef[0];
        for (j, col) in regressors.iter().enumerate() {
            fitted += coef[j + 1] * col[i];
        }
        residuals.push(y[i] - fitted);
    }
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let dof_resid = n - p;
    let sigma2 = rss / dof_resid as f64;

    // with an intercept rss <= tss holds mathematically; clamp guards fp
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof_resid as f64;
    let ess = (tss - rss).max(0.0);
    let f_statistic = if k == 0 {
        0.0
    } else if rss > 0.0 {
        (ess / k as f64) / (rss / dof_resid as f64)
    } else {
        f64::INFINITY
    };
    let f_p_value = if k == 0 {
        1.0
    } else {
        f_sf(f_statistic, k as u32, dof_resid as u32)
    };

    // R^{-1} by back-substitution, then (X^T X)^{-1} = R^{-1} R^{-T}
    let mut rinv = vec![0.0; p * p]; // row-major
    for col in (0..p).rev() {
        rinv[col * p + col] = 1.0 / r(col, col);
        for row in (0..col).rev() {
            let mut acc = 0.0;
            for m in row + 1..=col {
                acc += r(row, m) * rinv[m * p + col];
            }
            rinv[row * p + col] = -acc / r(row, row);
        }
    }
    let xtx_inv = |i: usize, j: usize| -> f64 {
        let mut acc = 0.0;
        for m in i.max(j)..p {
            acc += rinv[i * p + m] * rinv[j * p + m];
        }
        acc
    };

    let se: Vec<f64> = if options.robust_se {
        // HC1: (X'X)^-1 X' diag(e^2) X (X'X)^-1 * n/(n-p)
        let col_value = |j: usize, i: usize| -> f64 {
            if j == 0 {
                1.0
            } else {
                regressors[j - 1][i]
            }
        };
        let mut meat = vec![0.0; p * p];
        for i in 0..n {
            let e2 = residuals[i] * residuals[i];
            for r1 in 0..p {
                let x1 = col_value(r1, i);
                for r2 in r1..p {
                    meat[r1 * p + r2] += e2 * x1 * col_value(r2, i);
                }
            }
        }
        for r1 in 0..p {
            for r2 in 0..r1 {
                meat[r1 * p + r2] = meat[r2 * p + r1];
            }
        }
        let scale = n as f64 / dof_resid as f64;
        (0..p)
            .map(|j| {
                let mut var = 0.0;
                for m1 in 0..p {
                    for m2 in 0..p {
                        var += xtx_inv(j, m1) * meat[m1 * p + m2] * xtx_inv(m2, j);
                    }
                }
                (var * scale).max(0.0).sqrt()
            })
            .collect()
    } else {
        (0..p).map(|j| (sigma2 * xtx_inv(j, j)).max(0.0).sqrt()).collect()
    };

    let t_stat: Vec<f64> = coef
        .iter()
        .zip(&se)
        .map(|(b, s)| if *s > 0.0 { b / s } else { f64::INFINITY })
        .collect();
    let p_value: Vec<f64> = t_stat
        .iter()
        .map(|t| t_sf_two_sided(*t, dof_resid as u32))
        .collect();

    Ok(OlsFit {
        n,
        k,
        coef,
        se,
        t_stat,
        p_value,
        residuals,
        r_squared,
        adj_r_squared,
        f_statistic,
        f_p_value,
        sigma2,
        dof_resid,
    })
}
