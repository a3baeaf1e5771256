//! Density power divergence pieces for the normal error model.
//!
//! The model density is written in its standardized form, so the weight
//! function is `psi(x) = exp(-alpha x^2 / 2)` and the integral term is
//! `(1 + alpha)^(-1/2)`. With that convention the per-cell contribution is
//!
//! ```text
//! V(e; sigma^2) = sigma^-alpha [ (1 + alpha)^(-1/2) - (1 + 1/alpha) exp(-alpha e^2 / (2 sigma^2)) ]
//! ```
//!
//! and `alpha = 0` falls back to the Gaussian negative log-likelihood
//! `e^2 / (2 sigma^2) + ln(sigma^2) / 2`.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsvdError};
use crate::rank1::Rank1Fit;
use crate::Matrix;

/// Robustness tuning parameter. Zero gives classical least squares.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    /// Sanity cap; anything larger only ever collapses the weights.
    pub const MAX: f64 = 8.0;
    pub const CLASSICAL: Alpha = Alpha(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=Self::MAX).contains(&value) {
            Ok(Alpha(value))
        } else {
            Err(RsvdError::InvalidAlpha(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_classical(self) -> bool {
        self.0 == 0.0
    }

    /// `(1 + alpha)^(-1/2)`, the integral of the standardized density power.
    #[inline]
    pub fn density_integral(self) -> f64 {
        (1.0 + self.0).powf(-0.5)
    }

    /// Constant subtracted in the denominator of the variance update,
    /// `alpha / (1 + alpha) * (1 + alpha)^(-1/2) = alpha (1 + alpha)^(-3/2)`.
    #[inline]
    pub fn variance_offset(self) -> f64 {
        self.0 * (1.0 + self.0).powf(-1.5)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = RsvdError;
    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl std::fmt::Display for Alpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for Alpha {
    type Err = RsvdError;
    fn from_str(s: &str) -> Result<Self> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| RsvdError::Parse(format!("not a number: {s:?}")))?;
        Alpha::new(v)
    }
}

/// Weight given to a standardized residual `x`. Even in `x`.
#[inline]
pub fn psi(x: f64, alpha: Alpha) -> f64 {
    if alpha.is_classical() {
        1.0
    } else {
        (-0.5 * alpha.0 * x * x).exp()
    }
}

/// Contribution of a single cell with data value `x` and fitted value `a * b`.
pub fn v_cell(x: f64, a: f64, b: f64, sigma2: f64, alpha: Alpha) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(RsvdError::NonPositiveVariance(sigma2));
    }
    Ok(cell_value(x - a * b, sigma2, alpha))
}

/// `V` as a function of the residual. Caller guarantees `sigma2 > 0`.
#[inline]
pub(crate) fn cell_value(resid: f64, sigma2: f64, alpha: Alpha) -> f64 {
    if alpha.is_classical() {
        0.5 * resid * resid / sigma2 + 0.5 * sigma2.ln()
    } else {
        let a = alpha.0;
        let w = (-0.5 * a * resid * resid / sigma2).exp();
        sigma2.powf(-0.5 * a) * (alpha.density_integral() - (1.0 + 1.0 / a) * w)
    }
}

/// Smallest value any single cell can take at the given variance (`alpha > 0`).
pub fn cell_lower_bound(sigma2: f64, alpha: Alpha) -> f64 {
    let a = alpha.0;
    sigma2.powf(-0.5 * a) * (alpha.density_integral() - (1.0 + 1.0 / a))
}

/// Value of the objective, optionally with the per-cell terms it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub h: f64,
    pub per_cell: Option<Matrix>,
}

/// Objective of a rank-one fit: the mean of `V` over all cells.
pub fn objective(x: &Matrix, fit: &Rank1Fit, alpha: Alpha, per_cell: bool) -> Result<ObjectiveValue> {
    let (n, p) = x.dim();
    if fit.u.len() != n || fit.v.len() != p {
        return Err(RsvdError::DimensionMismatch {
            expected: format!("{n}x{p}"),
            found: format!("{}x{}", fit.u.len(), fit.v.len()),
        });
    }
    if !(fit.sigma2 > 0.0) {
        return Err(RsvdError::NonPositiveVariance(fit.sigma2));
    }
    let resid = crate::rank1::residuals(x, fit.lambda, &fit.u, &fit.v);
    if per_cell {
        let cells: Array2<f64> = resid.mapv(|e| cell_value(e, fit.sigma2, alpha));
        let h = mean_row_major(&cells);
        Ok(ObjectiveValue {
            h,
            per_cell: Some(cells),
        })
    } else {
        Ok(ObjectiveValue {
            h: objective_from_residuals(&resid, fit.sigma2, alpha),
            per_cell: None,
        })
    }
}

/// Mean of `V` over a residual matrix, summed in row-major order.
pub(crate) fn objective_from_residuals(resid: &Matrix, sigma2: f64, alpha: Alpha) -> f64 {
    let mut acc = 0.0;
    for row in resid.rows() {
        for &e in row {
            acc += cell_value(e, sigma2, alpha);
        }
    }
    acc / resid.len() as f64
}

fn mean_row_major(m: &Matrix) -> f64 {
    let mut acc = 0.0;
    for row in m.rows() {
        for &c in row {
            acc += c;
        }
    }
    acc / m.len() as f64
}

/// Weights `psi(e / sigma)` for every residual.
pub fn weights(resid: &Matrix, sigma2: f64, alpha: Alpha) -> Matrix {
    if alpha.is_classical() {
        return Matrix::ones(resid.dim());
    }
    let scale = -0.5 * alpha.0 / sigma2;
    let mut w = Matrix::zeros(resid.dim());
    Zip::from(&mut w).and(resid).for_each(|w, &e| *w = (scale * e * e).exp());
    w
}
