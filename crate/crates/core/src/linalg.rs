//! Small dense helpers shared by the solver and the simulation code.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::Matrix;

pub fn norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

pub fn max_abs(x: ArrayView1<f64>) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_matrix(x: &Matrix) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Median of a non-empty sample (mean of the two middle values for even sizes).
pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty(), "median of empty sample");
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Euclidean projection onto the orthogonal complement of the columns of
/// `basis` (assumed orthonormal). Two passes of classical Gram-Schmidt.
pub fn project_out(x: &mut Array1<f64>, basis: ArrayView2<f64>) {
    for _ in 0..2 {
        for col in basis.columns() {
            let c = col.dot(x);
            x.scaled_add(-c, &col);
        }
    }
}

/// Projection of `x` onto the orthogonal complement of the columns of `basis`
/// in the metric `diag(den)`: returns `x - D P (P^T D P)^{-1} P^T x` with
/// `D = diag(1 / den)`. Minimizes `sum_i den_i (y_i - x_i)^2` over `y` with
/// `P^T y = 0`. Falls back to the Euclidean projection if the Gram matrix is
/// numerically singular.
pub fn project_out_weighted(x: &mut Array1<f64>, den: ArrayView1<f64>, basis: ArrayView2<f64>) {
    let k = basis.ncols();
    if k == 0 {
        return;
    }
    let dmin = den.iter().copied().fold(f64::INFINITY, f64::min);
    let d: Array1<f64> = den.mapv(|w| dmin / w);
    let mut gram = Array2::<f64>::zeros((k, k));
    for r in 0..k {
        for s in 0..=r {
            let g: f64 = (0..x.len()).map(|i| basis[[i, r]] * d[i] * basis[[i, s]]).sum();
            gram[[r, s]] = g;
            gram[[s, r]] = g;
        }
    }
    let rhs: Array1<f64> = basis.t().dot(x);
    match cholesky_solve(&gram, &rhs) {
        Some(mu) => {
            let shift = basis.dot(&mu);
            for i in 0..x.len() {
                x[i] -= d[i] * shift[i];
            }
            // mop up rounding so the constraint holds to machine precision
            project_out(x, basis);
        }
        None => project_out(x, basis),
    }
}

fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let k = a.nrows();
    let scale = (0..k).map(|i| a[[i, i]]).fold(0.0, f64::max);
    let mut l = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for m in 0..j {
                s -= l[[i, m]] * l[[j, m]];
            }
            if i == j {
                if !(s > 1e-12 * scale) {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut y = Array1::<f64>::zeros(k);
    for i in 0..k {
        let s: f64 = (0..i).map(|m| l[[i, m]] * y[m]).sum();
        y[i] = (b[i] - s) / l[[i, i]];
    }
    let mut z = Array1::<f64>::zeros(k);
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|m| l[[m, i]] * z[m]).sum();
        z[i] = (y[i] - s) / l[[i, i]];
    }
    Some(z)
}

/// A unit vector orthogonal to the columns of `basis`: the coordinate axis
/// with the largest residual after projection, projected and normalized.
pub fn complement_direction(basis: ArrayView2<f64>) -> Array1<f64> {
    let p = basis.nrows();
    let mut best = Array1::zeros(p);
    let mut best_norm = -1.0;
    for j in 0..p {
        let mut e = Array1::zeros(p);
        e[j] = 1.0;
        project_out(&mut e, basis);
        let n = norm(e.view());
        if n > best_norm + 1e-12 {
            best_norm = n;
            best = e;
        }
    }
    if best_norm > 0.0 {
        best /= best_norm;
    }
    best
}
