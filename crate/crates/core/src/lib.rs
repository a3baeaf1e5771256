//! Robust singular value decomposition by minimum density power divergence.
//!
//! The estimator fits `X = sum_k lambda_k u_k v_k^T + E` under a normal error
//! model, replacing least squares by the density power divergence objective.
//! Each rank-one layer is found by alternating psi-weighted row and column
//! regressions; cells with large standardized residuals get exponentially
//! small weight. `alpha = 0` recovers the classical SVD.
//!
//! ```
//! use rsvddpd::{fit_svd, Alpha, Matrix, SolverOptions};
//!
//! let x = Matrix::from_shape_fn((6, 3), |(i, j)| (i + 1) as f64 * (j as f64 - 1.0));
//! let opts = SolverOptions::with_alpha(Alpha::new(0.5).unwrap());
//! let svd = fit_svd(&x, 1, &opts).unwrap();
//! assert!(svd.lambdas[0] > 0.0);
//! ```

use ndarray::{Array1, Array2};

pub mod decomposition;
pub mod dpd;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rank1;
pub mod simbench;

pub use decomposition::{fit_svd, orthogonality_report, reconstruct, LayerDiagnostics, RobustSvd};
pub use dpd::{objective, psi, v_cell, Alpha, ObjectiveValue};
pub use error::{Axis, Result, RsvdError};
pub use rank1::{
    check_equivariance_scale, fit_rank1, update_sigma2, update_u, update_v, Init, Rank1Fit, Residuals,
    SigmaFloor, SigmaUpdate, SolverOptions,
};

/// Dense row-major real matrix.
pub type Matrix = Array2<f64>;

/// Outer product `u v^T`.
pub fn outer(u: &Array1<f64>, v: &Array1<f64>) -> Matrix {
    Matrix::from_shape_fn((u.len(), v.len()), |(i, j)| u[i] * v[j])
}
