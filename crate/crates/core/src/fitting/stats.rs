use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Divisor applied to the centered cross-product sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovNorm {
    /// Divide by `N - 1`.
    #[default]
    Sample,
    /// No division at all.
    Literal,
}

impl std::str::FromStr for CovNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sample" => Ok(CovNorm::Sample),
            "literal" => Ok(CovNorm::Literal),
            _ => Err(Error::InvalidInput(format!("unknown covariance normalization {s:?}"))),
        }
    }
}

/// Position of an image between first twitch (0) and hatching (1).
pub fn normalize_time(t: f64, first_twitch: f64, hatch: f64) -> Result<f64> {
    if !(hatch > first_twitch) || !t.is_finite() || !first_twitch.is_finite() || !hatch.is_finite() {
        return Err(Error::InvalidTimeline { first_twitch, hatch });
    }
    Ok((t - first_twitch) / (hatch - first_twitch))
}

fn check_rows(rows: &[Vec<f64>], required: usize) -> Result<usize> {
    if rows.len() < required {
        return Err(Error::EmptyBin {
            count: rows.len(),
            required,
        });
    }
    let n = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    Ok(n)
}

/// Componentwise mean of the rows, summed in order.
pub fn estimate_mean(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = check_rows(rows, 1)?;
    let mut mean = vec![0.0; n];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= rows.len() as f64;
    }
    Ok(mean)
}

/// Centered cross-product sums around `mean`, normalized per `norm`. Not
/// regularized.
pub fn estimate_covariance(rows: &[Vec<f64>], mean: &[f64], norm: CovNorm) -> Result<DMatrix<f64>> {
    let n = check_rows(rows, 2)?;
    if mean.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: mean.len(),
        });
    }
    let mut cov = DMatrix::zeros(n, n);
    for row in rows {
        for a in 0..n {
            let da = row[a] - mean[a];
            for b in 0..n {
                cov[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    }
    if norm == CovNorm::Sample {
        cov /= (rows.len() - 1) as f64;
    }
    Ok(cov)
}

/// Ridge added to a covariance of dimension `n` with the given trace.
pub fn ridge(trace: f64, n: usize) -> f64 {
    (1e-6 * trace / n as f64).max(1e-8)
}

/// Adds the ridge to the diagonal and returns the regularized matrix with its
/// inverse. The ridge grows tenfold until the matrix factors.
pub fn regularize(cov: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: cov.ncols(),
        });
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let mut eps = ridge(sym.trace().max(0.0), n);
    for _ in 0..12 {
        let reg = &sym + DMatrix::identity(n, n) * eps;
        if let Some(chol) = reg.clone().cholesky() {
            let inv = chol.inverse();
            let inv = (&inv + inv.transpose()) * 0.5;
            return Ok((reg, inv));
        }
        eps *= 10.0;
    }
    Err(Error::InvalidInput("covariance is not positive definite".into()))
}

/// `(g - mean)' inverse (g - mean)`, never negative.
pub fn mahalanobis_cost(g: &[f64], mean: &[f64], inverse: &DMatrix<f64>) -> Result<f64> {
    let n = mean.len();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    if inverse.nrows() != n || inverse.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: inverse.nrows(),
        });
    }
    let d: Vec<f64> = g.iter().zip(mean).map(|(a, b)| a - b).collect();
    let mut total = 0.0;
    for a in 0..n {
        let mut row = 0.0;
        for b in 0..n {
            row += inverse[(a, b)] * d[b];
        }
        total += d[a] * row;
    }
    Ok(total.max(0.0))
}
