use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsvdError};
use crate::linalg;

/// Unit-norm tolerance for [`dissimilarity`] inputs.
pub const UNIT_TOL: f64 = 1e-8;

/// `1 - |<u, v>|` for unit vectors: 0 when equal up to sign, 1 when orthogonal.
pub fn dissimilarity(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(RsvdError::DimensionMismatch {
            expected: u.len().to_string(),
            found: v.len().to_string(),
        });
    }
    for x in [u, v] {
        let n = linalg::norm(x);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(RsvdError::NotUnitNorm(n));
        }
    }
    Ok((1.0 - u.dot(&v).abs()).clamp(0.0, 1.0))
}

/// Sampling summary of one estimated singular value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    /// Population variance (divisor `B`), so `mse = bias^2 + variance`.
    pub variance: f64,
}

impl ValueSummary {
    pub fn from_estimates(estimates: &[f64], truth: f64) -> Self {
        if estimates.is_empty() {
            return ValueSummary {
                truth,
                mean: f64::NAN,
                bias: f64::NAN,
                mse: f64::NAN,
                variance: f64::NAN,
            };
        }
        let b = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / b;
        let mse = estimates.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / b;
        let variance = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / b;
        ValueSummary {
            truth,
            mean,
            bias: mean - truth,
            mse,
            variance,
        }
    }
}
