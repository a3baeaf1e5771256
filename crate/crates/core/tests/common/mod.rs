//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array1, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rsvddpd::dpd::objective;
use rsvddpd::simbench::{make_ground_truth, sample_noise, Setup};
use rsvddpd::{Alpha, Matrix, Rank1Fit};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    Matrix::from_shape_fn((n, p), |_| StandardNormal.sample(rng))
}

/// The rank-three simulation signal plus standard normal noise.
pub fn signal_plus_noise(seed: u64) -> Matrix {
    let truth = make_ground_truth();
    sample_noise(Setup::S1, truth.rows(), truth.cols(), &mut rng(seed)).apply(&truth.x0)
}

pub fn norm(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

pub fn diss(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    1.0 - a.dot(&b).abs() / (norm(a) * norm(b))
}

/// Dense SVD with singular values in decreasing order.
pub struct DenseSvd {
    pub values: Vec<f64>,
    pub u: Vec<Array1<f64>>,
    pub v: Vec<Array1<f64>>,
}

/// Independent SVD computed by nalgebra.
pub fn dense_svd(x: &Matrix) -> DenseSvd {
    let (n, p) = x.dim();
    let m = DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    DenseSvd {
        values: order.iter().map(|&k| svd.singular_values[k]).collect(),
        u: order.iter().map(|&k| Array1::from_iter(u.column(k).iter().copied())).collect(),
        v: order.iter().map(|&k| Array1::from_iter(vt.row(k).iter().copied())).collect(),
    }
}

/// Leading singular triple by power iteration on `X^T X`.
pub fn power_iteration(x: &Matrix) -> (f64, Array1<f64>, Array1<f64>) {
    let p = x.ncols();
    let gram = x.t().dot(x);
    let mut v = Array1::from_elem(p, 1.0) + Array1::from_iter((0..p).map(|j| 0.01 * j as f64));
    v /= norm(v.view());
    for _ in 0..20_000 {
        let mut next = gram.dot(&v);
        next /= norm(next.view());
        let change = (&next - &v).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        v = next;
        if change < 1e-15 {
            break;
        }
    }
    let xv = x.dot(&v);
    let lambda = norm(xv.view());
    (lambda, xv / lambda, v)
}

/// Objective at an arbitrary parameter point.
pub fn h_at(x: &Matrix, lambda: f64, u: &Array1<f64>, v: &Array1<f64>, sigma2: f64, alpha: Alpha) -> f64 {
    objective(x, &Rank1Fit::from_parts(lambda, u.clone(), v.clone(), sigma2), alpha, false)
        .unwrap()
        .h
}

/// Move along the sphere: normalize `x + step * dir`.
fn retract(x: &Array1<f64>, dir: &Array1<f64>, step: f64) -> Array1<f64> {
    let y = x + &(dir * step);
    let n = norm(y.view());
    y / n
}

/// Tangent directions `e_i - x_i x` spanning the tangent space of the sphere at `x`.
fn tangents(x: &Array1<f64>) -> Vec<Array1<f64>> {
    (0..x.len())
        .map(|i| {
            let mut t = x * (-x[i]);
            t[i] += 1.0;
            t
        })
        .collect()
}

/// Central-difference derivatives of the objective: along `lambda`, and the
/// largest magnitude along `sigma2` and every tangent direction of `u` and `v`.
pub fn tangent_gradient(x: &Matrix, fit: &Rank1Fit, alpha: Alpha) -> (f64, f64) {
    let (l, u, v, s) = (fit.lambda, &fit.u, &fit.v, fit.sigma2);
    let h = |l: f64, u: &Array1<f64>, v: &Array1<f64>, s: f64| h_at(x, l, u, v, s, alpha);
    let dl = 1e-6 * l.max(1.0);
    let d_lambda = (h(l + dl, u, v, s) - h(l - dl, u, v, s)) / (2.0 * dl);
    let ds = 1e-6 * s;
    let mut worst = ((h(l, u, v, s + ds) - h(l, u, v, s - ds)) / (2.0 * ds)).abs();
    let e = 1e-6;
    for t in tangents(u) {
        let d = (h(l, &retract(u, &t, e), v, s) - h(l, &retract(u, &t, -e), v, s)) / (2.0 * e);
        worst = worst.max(d.abs());
    }
    for t in tangents(v) {
        let d = (h(l, u, &retract(v, &t, e), s) - h(l, u, &retract(v, &t, -e), s)) / (2.0 * e);
        worst = worst.max(d.abs());
    }
    (d_lambda, worst)
}

pub fn tangent_gradient_max(x: &Matrix, fit: &Rank1Fit, alpha: Alpha) -> f64 {
    let (dl, rest) = tangent_gradient(x, fit, alpha);
    dl.abs().max(rest)
}

pub fn frobenius(x: &Matrix) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// Smallest `h(theta + delta) - h(theta)` over `count` random feasible
/// perturbations of Euclidean norm `size` in `(lambda, u, v, sigma2)`.
/// Feasible means `0 <= lambda <= ||X||_F` and `sigma2 > 0`.
pub fn min_perturbation_gain(
    x: &Matrix,
    fit: &Rank1Fit,
    alpha: Alpha,
    count: usize,
    size: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let lambda_max = frobenius(x);
    let h0 = h_at(x, fit.lambda, &fit.u, &fit.v, fit.sigma2, alpha);
    let (n, p) = (fit.u.len(), fit.v.len());
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let raw: Vec<f64> = (0..n + p + 2).map(|_| StandardNormal.sample(rng)).collect();
        let scale = size / raw.iter().map(|r| r * r).sum::<f64>().sqrt();
        let du = Array1::from_iter(raw[1..1 + n].iter().map(|r| r * scale));
        let dv = Array1::from_iter(raw[1 + n..1 + n + p].iter().map(|r| r * scale));
        let lambda = (fit.lambda + raw[0] * scale).clamp(0.0, lambda_max);
        let sigma2 = (fit.sigma2 + raw[n + p + 1] * scale).max(fit.sigma2 * 1e-3);
        let u = retract(&fit.u, &du, 1.0);
        let v = retract(&fit.v, &dv, 1.0);
        worst = worst.min(h_at(x, lambda, &u, &v, sigma2, alpha) - h0);
    }
    worst
}

/// Uniformly random permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// `out[i, j] = x[rows[i], cols[j]]`.
pub fn permute(x: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_shape_fn((rows.len(), cols.len()), |(i, j)| x[[rows[i], cols[j]]])
}

pub fn gather(x: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    idx.iter().map(|&i| x[i]).collect()
}
