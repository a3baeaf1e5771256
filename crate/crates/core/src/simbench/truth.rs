use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsvdError};
use crate::linalg;
use crate::Matrix;

/// Orthonormal polynomial contrasts on the points `1..=m`.
///
/// Column `j` (zero based) is the degree `j + 1` polynomial, orthogonalized
/// against the constant and all lower degrees, normalized, with a positive
/// leading coefficient.
pub fn orthogonal_poly_contrasts(m: usize, k: usize) -> Result<Matrix> {
    if k >= m {
        return Err(RsvdError::TooManyContrasts { m, k });
    }
    let centre = (m as f64 + 1.0) / 2.0;
    let t: Array1<f64> = (1..=m).map(|i| i as f64 - centre).collect();
    let mut basis = Matrix::zeros((m, k + 1));
    basis.column_mut(0).fill(1.0 / (m as f64).sqrt());
    for d in 1..=k {
        let mut q = &t * &basis.column(d - 1);
        let lower = basis.slice(ndarray::s![.., ..d]);
        linalg::project_out(&mut q, lower);
        let nrm = linalg::norm(q.view());
        q /= nrm;
        basis.column_mut(d).assign(&q);
    }
    Ok(basis.slice(ndarray::s![.., 1..]).to_owned())
}

/// Rank-three signal used by the simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub x0: Matrix,
    pub lambdas: Array1<f64>,
    pub u: Matrix,
    pub v: Matrix,
}

impl GroundTruth {
    pub fn rows(&self) -> usize {
        self.x0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x0.ncols()
    }
}

/// `10 x 4` signal with singular values `(10, 5, 3)` and contrast factors.
pub fn make_ground_truth() -> GroundTruth {
    let u = orthogonal_poly_contrasts(10, 3).expect("3 < 10");
    let v = orthogonal_poly_contrasts(4, 3).expect("3 < 4");
    let lambdas = Array1::from(vec![10.0, 5.0, 3.0]);
    let x0 = (&u * &lambdas.view().insert_axis(Axis(0))).dot(&v.t());
    GroundTruth { x0, lambdas, u, v }
}
