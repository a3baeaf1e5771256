//! Rank-one fit by alternating psi-weighted regressions.
//!
//! One sweep of the solver performs, in order:
//!
//! 1. a row regression of `X` on the current right vector, weighted by
//!    `psi(e_ij / sigma)` of the current residuals, giving `a = lambda u`;
//! 2. the matching column regression on the new left vector, giving `b = lambda v`;
//! 3. the variance fixed-point step.
//!
//! Residuals are recomputed after every sub-step. Each regression minimizes a
//! quadratic majorizer of the objective, so the objective never increases
//! along the iteration (up to rounding).

use ndarray::{Array1, ArrayView1, ArrayView2, Axis as NdAxis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dpd::{objective_from_residuals, Alpha};
use crate::error::{Axis, Result, RsvdError};
use crate::{linalg, Matrix};

/// Denominators at or below this are treated as fully collapsed weights.
const WEIGHT_FLOOR: f64 = 1e-300;
/// Consistency factor of the median absolute deviation for the normal model.
const MAD_SCALE: f64 = 1.4826;
/// Half-width, in MAD units, of the clipping window used by the robust start.
const WINSOR_WIDTH: f64 = 3.0;
const START_TOL: f64 = 1e-6;
const START_MAX_ITER: usize = 1000;

/// A rank-one fit `lambda * u * v^T` with noise variance `sigma2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank1Fit {
    pub lambda: f64,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub sigma2: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value before the first sweep and after every sweep.
    pub trace: Vec<f64>,
    /// Sweeps in which the variance step was skipped because its denominator
    /// was not positive.
    pub degenerate_sigma_steps: usize,
}

impl Rank1Fit {
    pub fn from_parts(lambda: f64, u: Array1<f64>, v: Array1<f64>, sigma2: f64) -> Self {
        Rank1Fit {
            lambda,
            u,
            v,
            sigma2,
            iterations: 0,
            converged: false,
            trace: Vec::new(),
            degenerate_sigma_steps: 0,
        }
    }

    pub fn fitted(&self) -> Matrix {
        self.lambda * crate::outer(&self.u, &self.v)
    }

    /// Flip `(u, v)` jointly so that the largest-magnitude entry of `u` is
    /// positive (lowest index wins ties). The fitted matrix is unchanged.
    pub fn apply_sign_convention(&mut self) {
        if let Some(i) = argmax_abs(self.u.view()) {
            if self.u[i] < 0.0 {
                self.u.mapv_inplace(|x| -x);
                self.v.mapv_inplace(|x| -x);
            }
        }
    }

    /// Largest per-step increase of the objective trace (negative when the
    /// trace strictly decreases).
    pub fn max_trace_increase(&self) -> f64 {
        self.trace
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn argmax_abs(x: ArrayView1<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &val) in x.iter().enumerate() {
        let m = val.abs();
        match best {
            Some((_, b)) if m <= b => {}
            _ => best = Some((i, m)),
        }
    }
    best.map(|(i, _)| i)
}

/// How the iteration is started.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    /// Alternating least squares on the raw data, started from the column-mean
    /// direction; variance from the MAD of its residuals.
    Classical,
    /// As `Classical`, but the least-squares pass runs on a copy of the data
    /// clipped to `median +/- 3 MAD`, from both the column-mean direction and
    /// the largest row. The robust iteration itself always uses the raw data.
    #[default]
    RobustClassical,
    /// Use the given fit verbatim (vectors are re-normalized if needed).
    Provided(Box<Rank1Fit>),
    /// Gaussian random directions from a ChaCha8 stream with this seed.
    Random(u64),
}

/// Lower bound policy for the noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaFloor {
    /// `factor * max(1, mean(X_ij^2))`.
    Relative(f64),
    Absolute(f64),
}

impl Default for SigmaFloor {
    fn default() -> Self {
        SigmaFloor::Relative(1e-10)
    }
}

impl SigmaFloor {
    pub fn resolve(&self, x: &Matrix) -> f64 {
        match *self {
            SigmaFloor::Relative(f) => {
                let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
                f * ms.max(1.0)
            }
            SigmaFloor::Absolute(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub alpha: Alpha,
    /// Relative convergence tolerance on the objective and the parameters.
    pub tol: f64,
    pub max_iter: usize,
    pub sigma_floor: SigmaFloor,
    pub init: Init,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            alpha: Alpha::new(0.5).expect("valid alpha"),
            tol: 1e-8,
            max_iter: 100,
            sigma_floor: SigmaFloor::default(),
            init: Init::default(),
        }
    }
}

impl SolverOptions {
    pub fn with_alpha(alpha: Alpha) -> Self {
        SolverOptions {
            alpha,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(RsvdError::InvalidOptions(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(RsvdError::InvalidOptions("max_iter must be at least 1".into()));
        }
        let floor_ok = match self.sigma_floor {
            SigmaFloor::Relative(f) | SigmaFloor::Absolute(f) => f > 0.0 && f.is_finite(),
        };
        if !floor_ok {
            return Err(RsvdError::InvalidOptions("sigma floor must be positive".into()));
        }
        Ok(())
    }
}

/// Residual matrix `e_ij = X_ij - lambda u_i v_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals(Matrix);

impl Residuals {
    pub fn new(x: &Matrix, fit: &Rank1Fit) -> Result<Self> {
        check_dims(x, fit.u.view(), fit.v.view())?;
        Ok(Residuals(residuals(x, fit.lambda, &fit.u, &fit.v)))
    }

    pub fn from_matrix(e: Matrix) -> Self {
        Residuals(e)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

pub(crate) fn residuals(x: &Matrix, lambda: f64, u: &Array1<f64>, v: &Array1<f64>) -> Matrix {
    let mut e = x.clone();
    for (i, mut row) in e.rows_mut().into_iter().enumerate() {
        let a = lambda * u[i];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell -= a * v[j];
        }
    }
    e
}

fn check_dims(x: &Matrix, u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<()> {
    let (n, p) = x.dim();
    if u.len() != n || v.len() != p {
        return Err(RsvdError::DimensionMismatch {
            expected: format!("{n}x{p}"),
            found: format!("{}x{}", u.len(), v.len()),
        });
    }
    Ok(())
}

/// Weighted regression along one axis. For rows, returns
/// `num_i / den_i` with `num_i = sum_j c_j X_ij w_ij` and
/// `den_i = sum_j c_j^2 w_ij`, plus the denominators themselves.
fn weighted_regression(
    x: &Matrix,
    resid: &Matrix,
    coef: ArrayView1<f64>,
    sigma2: f64,
    alpha: Alpha,
    axis: Axis,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let scale = -0.5 * alpha.value() / sigma2;
    let classical = alpha.is_classical();
    let nd_axis = match axis {
        Axis::Row => NdAxis(0),
        Axis::Column => NdAxis(1),
    };
    let len = x.len_of(nd_axis);
    let mut out = Array1::zeros(len);
    let mut dens = Array1::zeros(len);
    for (k, (xs, es)) in x
        .axis_iter(nd_axis)
        .zip(resid.axis_iter(nd_axis))
        .enumerate()
    {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xv, &ev), &c) in xs.iter().zip(es.iter()).zip(coef.iter()) {
            let w = if classical { 1.0 } else { (scale * ev * ev).exp() };
            num += c * xv * w;
            den += c * c * w;
        }
        if !(den > WEIGHT_FLOOR) {
            return Err(RsvdError::DegenerateWeights { axis, index: k });
        }
        out[k] = num / den;
        dens[k] = den;
    }
    Ok((out, dens))
}

/// Unnormalized left update `a = lambda u` for the given fit.
pub fn update_u(x: &Matrix, fit: &Rank1Fit, alpha: Alpha) -> Result<Array1<f64>> {
    check_dims(x, fit.u.view(), fit.v.view())?;
    let e = residuals(x, fit.lambda, &fit.u, &fit.v);
    weighted_regression(x, &e, fit.v.view(), fit.sigma2, alpha, Axis::Row).map(|(a, _)| a)
}

/// Unnormalized right update `b = lambda v`, regressing on the fit's `u`.
pub fn update_v(x: &Matrix, fit: &Rank1Fit, alpha: Alpha) -> Result<Array1<f64>> {
    check_dims(x, fit.u.view(), fit.v.view())?;
    let e = residuals(x, fit.lambda, &fit.u, &fit.v);
    weighted_regression(x, &e, fit.u.view(), fit.sigma2, alpha, Axis::Column).map(|(b, _)| b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaUpdate {
    pub sigma2: f64,
    /// The denominator was not positive; `sigma2` is the previous value.
    pub degenerate: bool,
}

/// Variance fixed-point step, clamped below at `floor`.
pub fn update_sigma2(residuals: &Residuals, sigma2_prev: f64, alpha: Alpha, floor: f64) -> SigmaUpdate {
    let e = residuals.as_matrix();
    let count = e.len() as f64;
    let scale = -0.5 * alpha.value() / sigma2_prev;
    let classical = alpha.is_classical();
    let mut num = 0.0;
    let mut wsum = 0.0;
    for row in e.rows() {
        for &r in row {
            let w = if classical { 1.0 } else { (scale * r * r).exp() };
            num += r * r * w;
            wsum += w;
        }
    }
    let den = wsum / count - alpha.variance_offset();
    if !(den > 0.0) {
        return SigmaUpdate {
            sigma2: sigma2_prev,
            degenerate: true,
        };
    }
    SigmaUpdate {
        sigma2: (num / count / den).max(floor),
        degenerate: false,
    }
}

/// Orthogonality constraints for a deflated layer: the new vectors must be
/// orthogonal to the columns of `prev_u` and `prev_v`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Deflation<'a> {
    pub prev_u: ArrayView2<'a, f64>,
    pub prev_v: ArrayView2<'a, f64>,
}

/// Fit a rank-one decomposition of `x`.
pub fn fit_rank1(x: &Matrix, opts: &SolverOptions) -> Result<Rank1Fit> {
    opts.validate()?;
    check_input(x)?;
    let floor = opts.sigma_floor.resolve(x);
    let start = initial_state(x, &opts.init, floor, None)?;
    let mut fit = iterate(x, start, opts.alpha, opts.tol, opts.max_iter, floor, None)?;
    fit.apply_sign_convention();
    Ok(fit)
}

pub(crate) fn check_input(x: &Matrix) -> Result<()> {
    let (n, p) = x.dim();
    if n < 2 || p < 2 {
        return Err(RsvdError::TooSmall { rows: n, cols: p });
    }
    for ((i, j), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(RsvdError::NonFiniteInput { row: i, col: j });
        }
    }
    Ok(())
}

/// Normalize `w` into a unit vector, returning its norm. A zero vector leaves
/// `keep` untouched and returns 0.
fn normalize_into(w: Array1<f64>, keep: &mut Array1<f64>) -> f64 {
    let norm = linalg::norm(w.view());
    if norm > 0.0 {
        *keep = w / norm;
    }
    norm
}

/// Upper bound on the singular value: the Frobenius norm of the data.
pub(crate) fn lambda_bound(x: &Matrix) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Minimize the regression majorizer `sum_i den_i (a_i - target_i)^2` over
/// `||a|| <= bound`, optionally with `a` orthogonal to the columns of `basis`.
///
/// The minimizer is `a_i = den_i target_i / (den_i + mu)`, projected in the
/// metric of `den + mu`, with `mu >= 0` the smallest value that puts it in
/// the ball. Its norm falls as `mu` grows, so `mu` is found by bisection.
fn constrained_update(
    target: &Array1<f64>,
    den: ArrayView1<f64>,
    basis: Option<ArrayView2<f64>>,
    bound: f64,
) -> Array1<f64> {
    let solve = |mu: f64| {
        let mut a: Array1<f64> = ndarray::Zip::from(target).and(den).map_collect(|&t, &w| w * t / (w + mu));
        if let Some(p) = basis {
            linalg::project_out_weighted(&mut a, den.mapv(|w| w + mu).view(), p);
        }
        a
    };
    let free = solve(0.0);
    if linalg::norm(free.view()) <= bound {
        return free;
    }
    let (mut lo, mut hi) = (0.0, den.iter().copied().fold(0.0, f64::max));
    let mut a_hi = solve(hi);
    while linalg::norm(a_hi.view()) > bound {
        lo = hi;
        hi *= 2.0;
        a_hi = solve(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let a = solve(mid);
        if linalg::norm(a.view()) > bound {
            lo = mid;
        } else {
            hi = mid;
            a_hi = a;
        }
    }
    a_hi
}

/// The alternating iteration from a given state.
pub(crate) fn iterate(
    x: &Matrix,
    start: Rank1Fit,
    alpha: Alpha,
    tol: f64,
    max_iter: usize,
    floor: f64,
    deflation: Option<Deflation<'_>>,
) -> Result<Rank1Fit> {
    let Rank1Fit {
        mut lambda,
        mut u,
        mut v,
        sigma2,
        ..
    } = start;
    let mut sigma2 = sigma2.max(floor);
    let bound = lambda_bound(x);
    lambda = lambda.min(bound);
    let mut resid = residuals(x, lambda, &u, &v);
    let mut h = objective_from_residuals(&resid, sigma2, alpha);
    let mut trace = Vec::with_capacity(max_iter + 1);
    trace.push(h);
    let mut converged = false;
    let mut iterations = 0;
    let mut degenerate_sigma_steps = 0;

    while iterations < max_iter {
        iterations += 1;
        let (lambda0, u0, v0, sigma0) = (lambda, u.clone(), v.clone(), sigma2);

        let (a, row_den) = weighted_regression(x, &resid, v.view(), sigma2, alpha, Axis::Row)?;
        let a = constrained_update(&a, row_den.view(), deflation.map(|d| d.prev_u), bound);
        lambda = normalize_into(a, &mut u);
        resid = residuals(x, lambda, &u, &v);

        let (b, col_den) = weighted_regression(x, &resid, u.view(), sigma2, alpha, Axis::Column)?;
        let b = constrained_update(&b, col_den.view(), deflation.map(|d| d.prev_v), bound);
        lambda = normalize_into(b, &mut v);
        resid = residuals(x, lambda, &u, &v);

        let step = update_sigma2(&Residuals::from_matrix(resid), sigma2, alpha, floor);
        resid = residuals(x, lambda, &u, &v);
        if step.degenerate {
            degenerate_sigma_steps += 1;
        }
        sigma2 = step.sigma2;

        let h_new = objective_from_residuals(&resid, sigma2, alpha);
        trace.push(h_new);

        let d_theta = (lambda - lambda0)
            .abs()
            .max(linalg::max_abs_diff(u.view(), u0.view()))
            .max(linalg::max_abs_diff(v.view(), v0.view()))
            .max((sigma2 - sigma0).abs());
        let theta_scale = 1.0
            + lambda
                .abs()
                .max(linalg::max_abs(u.view()))
                .max(linalg::max_abs(v.view()))
                .max(sigma2);
        let rel = ((h_new - h).abs() / (1.0 + h.abs())).max(d_theta / theta_scale);
        h = h_new;
        if rel < tol {
            converged = true;
            break;
        }
    }

    Ok(Rank1Fit {
        lambda,
        u,
        v,
        sigma2,
        iterations,
        converged,
        trace,
        degenerate_sigma_steps,
    })
}

/// Build the starting state for the iteration.
pub(crate) fn initial_state(
    x: &Matrix,
    init: &Init,
    floor: f64,
    deflation: Option<Deflation<'_>>,
) -> Result<Rank1Fit> {
    let (n, p) = x.dim();
    match init {
        Init::Provided(fit) => {
            check_dims(x, fit.u.view(), fit.v.view())?;
            let mut start = Rank1Fit::from_parts(fit.lambda, fit.u.clone(), fit.v.clone(), fit.sigma2);
            for vec in [&mut start.u, &mut start.v] {
                let norm = linalg::norm(vec.view());
                if !(norm > 0.0) {
                    return Err(RsvdError::InvalidOptions("provided start has a zero vector".into()));
                }
                if (norm - 1.0).abs() > 1e-12 {
                    vec.mapv_inplace(|t| t / norm);
                }
            }
            if !(start.sigma2 > 0.0) {
                return Err(RsvdError::NonPositiveVariance(start.sigma2));
            }
            start.sigma2 = start.sigma2.max(floor);
            Ok(start)
        }
        Init::Classical => classical_start(x, x, floor, deflation, false),
        Init::RobustClassical => {
            let clipped = winsorize(x);
            classical_start(x, &clipped, floor, deflation, true)
        }
        Init::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut u: Array1<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut v: Array1<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(d) = deflation {
                linalg::project_out(&mut u, d.prev_u);
                linalg::project_out(&mut v, d.prev_v);
            }
            let nu = linalg::norm(u.view());
            let nv = linalg::norm(v.view());
            u /= nu;
            v /= nv;
            let s = u.dot(&x.dot(&v));
            if s < 0.0 {
                v.mapv_inplace(|t| -t);
            }
            let lambda = s.abs();
            let sigma2 = mad_variance(&residuals(x, lambda, &u, &v), floor);
            Ok(Rank1Fit::from_parts(lambda, u, v, sigma2))
        }
    }
}

/// Least-squares start computed on `y`, with the variance taken from the
/// residuals of `x` at that start. The alternating least-squares pass begins
/// at the column-mean direction; with `both_starts` it is also run from the
/// largest row and the start with the larger singular value is kept.
fn classical_start(
    x: &Matrix,
    y: &Matrix,
    floor: f64,
    deflation: Option<Deflation<'_>>,
    both_starts: bool,
) -> Result<Rank1Fit> {
    let scale = linalg::max_abs_matrix(y);
    let mean = y.mean_axis(NdAxis(0)).expect("non-empty matrix");
    let mut candidates = Vec::with_capacity(2);
    if linalg::norm(mean.view()) > 1e-8 * scale {
        candidates.push(mean);
    }
    if both_starts || candidates.is_empty() {
        // column means vanish for centred data
        candidates.push(largest_row(y));
    }
    let mut best: Option<Rank1Fit> = None;
    for v0 in candidates {
        let ls = least_squares_from(y, v0, floor, deflation)?;
        if best.as_ref().is_none_or(|b| ls.lambda > b.lambda) {
            best = Some(ls);
        }
    }
    let ls = best.expect("at least one candidate");
    let sigma2 = mad_variance(&residuals(x, ls.lambda, &ls.u, &ls.v), floor);
    Ok(Rank1Fit::from_parts(ls.lambda, ls.u, ls.v, sigma2))
}

fn largest_row(y: &Matrix) -> Array1<f64> {
    let best = (0..y.nrows())
        .map(|i| (i, linalg::norm(y.row(i))))
        .fold((0, -1.0), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    y.row(best.0).to_owned()
}

fn least_squares_from(
    y: &Matrix,
    mut v0: Array1<f64>,
    floor: f64,
    deflation: Option<Deflation<'_>>,
) -> Result<Rank1Fit> {
    let (n, p) = y.dim();
    if let Some(d) = deflation {
        let before = linalg::norm(v0.view());
        linalg::project_out(&mut v0, d.prev_v);
        if !(linalg::norm(v0.view()) > 1e-8 * before) {
            v0 = linalg::complement_direction(d.prev_v);
        }
    }
    let norm = linalg::norm(v0.view());
    if norm > 0.0 {
        v0 /= norm;
    } else {
        v0 = Array1::zeros(p);
        v0[0] = 1.0;
    }
    let u0 = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let seed = Rank1Fit::from_parts(0.0, u0, v0, 1.0);
    iterate(y, seed, Alpha::CLASSICAL, START_TOL, START_MAX_ITER, floor, deflation)
}

/// `(1.4826 * median |e|)^2`, floored.
fn mad_variance(e: &Matrix, floor: f64) -> f64 {
    let abs: Vec<f64> = e.iter().map(|v| v.abs()).collect();
    let s = MAD_SCALE * linalg::median(abs);
    (s * s).max(floor)
}

/// Clip every entry to `median +/- 3 MAD` of all entries. Returns the input
/// unchanged when the MAD is zero.
pub fn winsorize(x: &Matrix) -> Matrix {
    let med = linalg::median(x.iter().copied().collect());
    let mad = MAD_SCALE * linalg::median(x.iter().map(|v| (v - med).abs()).collect());
    if !(mad > 0.0) {
        return x.clone();
    }
    let (lo, hi) = (med - WINSOR_WIDTH * mad, med + WINSOR_WIDTH * mad);
    x.mapv(|v| v.clamp(lo, hi))
}

/// Fit `x` and `c x` under matched starts and report whether the second fit
/// is the scaled first one: `(|c| lambda, u, sign(c) v, c^2 sigma^2)` within
/// `1e-10` (relative for the scalars).
pub fn check_equivariance_scale(x: &Matrix, c: f64, opts: &SolverOptions) -> bool {
    if c == 0.0 || !c.is_finite() {
        return false;
    }
    let base = match fit_rank1(x, opts) {
        Ok(f) => f,
        Err(_) => return false,
    };
    let mut scaled_opts = opts.clone();
    if let Init::Provided(start) = &opts.init {
        let mut s = (**start).clone();
        s.lambda *= c.abs();
        s.sigma2 *= c * c;
        if c < 0.0 {
            s.v.mapv_inplace(|t| -t);
        }
        scaled_opts.init = Init::Provided(Box::new(s));
    }
    let scaled = match fit_rank1(&x.mapv(|t| c * t), &scaled_opts) {
        Ok(f) => f,
        Err(_) => return false,
    };
    scale_matches(&base, &scaled, c, 1e-10)
}

pub(crate) fn scale_matches(base: &Rank1Fit, scaled: &Rank1Fit, c: f64, tol: f64) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= tol * b.abs().max(1.0);
    let sign = c.signum();
    close(scaled.lambda, c.abs() * base.lambda)
        && close(scaled.sigma2, c * c * base.sigma2)
        && linalg::max_abs_diff(scaled.u.view(), base.u.view()) <= tol
        && scaled
            .v
            .iter()
            .zip(base.v.iter())
            .all(|(&s, &b)| (s - sign * b).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpd::{cell_value, objective};
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    fn alpha(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    fn majorizer(a: &Array1<f64>, t: &Array1<f64>, den: &Array1<f64>) -> f64 {
        (0..a.len()).map(|i| den[i] * (a[i] - t[i]).powi(2)).sum()
    }

    #[test]
    fn constrained_update_solves_the_ball_problem() {
        let ones = array![1.0, 1.0];
        // inside target is untouched
        let a = constrained_update(&array![1.0, 1.0], ones.view(), None, 2.0);
        assert_eq!(a, array![1.0, 1.0]);
        // equal weights: radial projection onto the sphere
        let a = constrained_update(&array![6.0, 8.0], ones.view(), None, 5.0);
        assert!(linalg::max_abs_diff(a.view(), array![3.0, 4.0].view()) < 1e-12);

        // unequal weights: on the sphere, of the form den t / (den + mu), and
        // no worse than any other feasible point
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = array![4.0, -3.0, 2.0, 7.0];
        let den = array![0.2, 3.0, 1.0, 0.05];
        let basis = array![[0.5], [0.5], [0.5], [0.5]];
        for proj in [None, Some(basis.view())] {
            let a = constrained_update(&t, den.view(), proj, 2.0);
            assert_relative_eq!(linalg::norm(a.view()), 2.0, epsilon = 1e-12);
            if proj.is_none() {
                let mu = den[0] * t[0] / a[0] - den[0];
                for i in 1..4 {
                    assert_relative_eq!(a[i], den[i] * t[i] / (den[i] + mu), epsilon = 1e-10);
                }
            } else {
                assert!(a.sum().abs() < 1e-12);
            }
            let best = majorizer(&a, &t, &den);
            for _ in 0..2000 {
                let mut z: Array1<f64> = Array1::from_shape_fn(4, |_| StandardNormal.sample(&mut rng));
                if let Some(p) = proj {
                    linalg::project_out(&mut z, p);
                }
                let r = 2.0 * rng.random::<f64>().sqrt();
                let z = &z * (r / linalg::norm(z.view()));
                assert!(majorizer(&z, &t, &den) >= best - 1e-10);
            }
        }
    }

    fn unit(v: Array1<f64>) -> Array1<f64> {
        let n = linalg::norm(v.view());
        v / n
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
        Matrix::from_shape_fn((n, p), |_| StandardNormal.sample(rng))
    }

    #[test]
    fn classical_row_update_is_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 5, 4);
        let fit = Rank1Fit::from_parts(
            1.3,
            unit(array![1.0, -2.0, 0.5, 0.3, 1.0]),
            unit(array![0.2, 1.0, -1.0, 0.4]),
            0.7,
        );
        let a = update_u(&x, &fit, Alpha::CLASSICAL).unwrap();
        let vv = fit.v.dot(&fit.v);
        for i in 0..5 {
            let ls = x.row(i).dot(&fit.v) / vv;
            assert_relative_eq!(a[i], ls, epsilon = 1e-14);
        }
        let b = update_v(&x, &fit, Alpha::CLASSICAL).unwrap();
        let uu = fit.u.dot(&fit.u);
        for j in 0..4 {
            assert_relative_eq!(b[j], x.column(j).dot(&fit.u) / uu, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_rank_one_is_fixed_point() {
        let u = unit(array![1.0, 2.0, -1.0]);
        let v = unit(array![0.5, -1.0, 2.0, 1.0]);
        let x = 4.0 * crate::outer(&u, &v);
        let fit = Rank1Fit::from_parts(4.0, u.clone(), v.clone(), 0.3);
        for al in [0.0, 0.5, 1.0] {
            let a = update_u(&x, &fit, alpha(al)).unwrap();
            let b = update_v(&x, &fit, alpha(al)).unwrap();
            for i in 0..3 {
                assert_relative_eq!(a[i], 4.0 * u[i], epsilon = 1e-14);
            }
            for j in 0..4 {
                assert_relative_eq!(b[j], 4.0 * v[j], epsilon = 1e-14);
            }
        }
    }

    /// Minimize `f` over a bracket with golden-section search and polish the
    /// result with a secant solve on the central-difference derivative.
    fn scalar_argmin(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let steps = 4000;
        let best = (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .min_by(|a, b| f(*a).partial_cmp(&f(*b)).unwrap())
            .unwrap();
        let width = (hi - lo) / steps as f64;
        let (mut a, mut b) = (best - width, best + width);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let h = 1e-4;
        let df = |t: f64| (f(t + h) - f(t - h)) / (2.0 * h);
        let (mut t0, mut t1) = (0.5 * (a + b) - 1e-6, 0.5 * (a + b) + 1e-6);
        for _ in 0..40 {
            let (d0, d1) = (df(t0), df(t1));
            if d1 == d0 {
                break;
            }
            let t2 = t1 - d1 * (t1 - t0) / (d1 - d0);
            t0 = t1;
            t1 = t2;
        }
        t1
    }

    #[test]
    fn row_update_fixed_point_matches_scalar_minimizer() {
        // Iterating the row update with v, sigma fixed converges to a stationary
        // point of the row's summed cell values; the oracle locates it directly.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 3, 3);
        let v = unit(array![0.9, -0.4, 0.6]);
        let sigma2 = 1.5;
        let al = alpha(0.5);
        let mut fit = Rank1Fit::from_parts(1.0, unit(array![0.3, 0.5, -0.2]), v.clone(), sigma2);
        for _ in 0..2000 {
            let a = update_u(&x, &fit, al).unwrap();
            fit.lambda = linalg::norm(a.view());
            fit.u = &a / fit.lambda;
        }
        let a = &fit.u * fit.lambda;
        for i in 0..3 {
            let row = x.row(i).to_owned();
            let vv = v.clone();
            let f = move |t: f64| -> f64 {
                (0..3).map(|j| cell_value(row[j] - t * vv[j], sigma2, al)).sum()
            };
            let oracle = scalar_argmin(&f, a[i] - 2.0, a[i] + 2.0);
            assert!((oracle - a[i]).abs() < 1e-8, "row {i}: {} vs {}", oracle, a[i]);
        }
    }

    #[test]
    fn column_update_fixed_point_matches_scalar_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_matrix(&mut rng, 3, 3);
        let u = unit(array![0.5, 0.7, -0.5]);
        let sigma2 = 1.2;
        let al = alpha(0.5);
        let mut fit = Rank1Fit::from_parts(1.0, u.clone(), unit(array![1.0, 1.0, 1.0]), sigma2);
        for _ in 0..2000 {
            let b = update_v(&x, &fit, al).unwrap();
            fit.lambda = linalg::norm(b.view());
            fit.v = &b / fit.lambda;
        }
        let b = &fit.v * fit.lambda;
        for j in 0..3 {
            let col = x.column(j).to_owned();
            let uu = u.clone();
            let f = move |t: f64| -> f64 {
                (0..3).map(|i| cell_value(col[i] - uu[i] * t, sigma2, al)).sum()
            };
            let oracle = scalar_argmin(&f, b[j] - 2.0, b[j] + 2.0);
            assert!((oracle - b[j]).abs() < 1e-8, "col {j}: {} vs {}", oracle, b[j]);
        }
    }

    #[test]
    fn degenerate_weights_are_reported() {
        let x = array![[1e6, -1e6], [1e6, 1e6]];
        let fit = Rank1Fit::from_parts(0.0, unit(array![1.0, 1.0]), unit(array![1.0, 1.0]), 1e-4);
        let err = update_u(&x, &fit, alpha(1.0)).unwrap_err();
        assert!(err.is_degenerate());
        assert!(matches!(err, RsvdError::DegenerateWeights { axis: Axis::Row, index: 0 }));
        let err = update_v(&x, &fit, alpha(1.0)).unwrap_err();
        assert!(matches!(err, RsvdError::DegenerateWeights { axis: Axis::Column, .. }));
    }

    #[test]
    fn classical_sigma_is_mean_square() {
        let e = array![[1.0, -2.0], [0.5, 3.0]];
        let out = update_sigma2(&Residuals::from_matrix(e.clone()), 7.0, Alpha::CLASSICAL, 1e-10);
        let ms = e.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert_relative_eq!(out.sigma2, ms, epsilon = 1e-15);
        assert!(!out.degenerate);
    }

    #[test]
    fn zero_residuals_hit_the_floor() {
        let e = Matrix::zeros((3, 3));
        for al in [0.0, 0.5, 1.0] {
            let out = update_sigma2(&Residuals::from_matrix(e.clone()), 1.0, alpha(al), 1e-9);
            assert_eq!(out.sigma2, 1e-9);
        }
    }

    #[test]
    fn sigma_update_is_stationary() {
        // Iterate the variance step to its fixed point, then check the
        // central-difference derivative of the mean cell value there.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = random_matrix(&mut rng, 4, 4);
        let al = alpha(0.5);
        let res = Residuals::from_matrix(e.clone());
        let mut s = 1.0;
        for _ in 0..500 {
            s = update_sigma2(&res, s, al, 1e-12).sigma2;
        }
        let h = |s2: f64| objective_from_residuals(&e, s2, al);
        let step = 1e-6 * s;
        let deriv = (h(s + step) - h(s - step)) / (2.0 * step);
        assert!(deriv.abs() < 1e-6, "derivative {deriv} at {s}");
        // the one-step map is the fixed point of itself there
        assert_relative_eq!(update_sigma2(&res, s, al, 1e-12).sigma2, s, max_relative = 1e-12);
    }

    #[test]
    fn sigma_degenerate_denominator_carries_forward() {
        let e = Matrix::from_elem((2, 2), 100.0);
        let out = update_sigma2(&Residuals::from_matrix(e), 0.01, alpha(1.0), 1e-10);
        assert!(out.degenerate);
        assert_eq!(out.sigma2, 0.01);
    }

    #[test]
    fn noiseless_rank_one_recovered() {
        let u = unit(array![1.0, -2.0, 0.5, 3.0, 1.0]);
        let v = unit(array![2.0, 1.0, -1.0]);
        let x = 2.0 * crate::outer(&u, &v);
        let floor = SigmaFloor::default().resolve(&x);
        for al in [0.0, 0.1, 0.5, 1.0] {
            let fit = fit_rank1(&x, &SolverOptions::with_alpha(alpha(al))).unwrap();
            assert!((fit.lambda - 2.0).abs() < 1e-8, "alpha {al}: {}", fit.lambda);
            let du = (1.0 - fit.u.dot(&u).abs()).abs();
            let dv = (1.0 - fit.v.dot(&v).abs()).abs();
            assert!(du < 1e-8 && dv < 1e-8);
            assert_eq!(fit.sigma2, floor);
        }
    }

    #[test]
    fn output_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 0..20 {
            let x = random_matrix(&mut rng, 8, 5);
            let al = alpha([0.0, 0.25, 0.5, 1.0][k % 4]);
            let opts = SolverOptions::with_alpha(al);
            let fit = fit_rank1(&x, &opts).unwrap();
            assert!((linalg::norm(fit.u.view()) - 1.0).abs() < 1e-12);
            assert!((linalg::norm(fit.v.view()) - 1.0).abs() < 1e-12);
            assert!(fit.lambda >= 0.0);
            assert!(fit.sigma2 >= opts.sigma_floor.resolve(&x));
            let i = argmax_abs(fit.u.view()).unwrap();
            assert!(fit.u[i] > 0.0);
            assert!(fit.max_trace_increase() <= 1e-10);
            assert_eq!(fit.trace.len(), fit.iterations + 1);
            // final trace entry is the objective of the returned fit
            let h = objective(&x, &fit, al, false).unwrap().h;
            assert_relative_eq!(h, *fit.trace.last().unwrap(), max_relative = 1e-12);
            assert!(h <= fit.trace[0] + 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let opts = SolverOptions::default();
        let x = array![[1.0, f64::NAN], [1.0, 2.0]];
        assert!(matches!(fit_rank1(&x, &opts), Err(RsvdError::NonFiniteInput { row: 0, col: 1 })));
        let x = array![[1.0, 2.0, 3.0]];
        assert!(matches!(fit_rank1(&x, &opts), Err(RsvdError::TooSmall { .. })));
        let x = Matrix::ones((3, 3));
        let bad = SolverOptions {
            tol: 0.0,
            ..SolverOptions::default()
        };
        assert!(fit_rank1(&x, &bad).is_err());
        let bad = SolverOptions {
            max_iter: 0,
            ..SolverOptions::default()
        };
        assert!(fit_rank1(&x, &bad).is_err());
    }

    #[test]
    fn sign_convention_prefers_lowest_index_on_ties() {
        let mut fit = Rank1Fit::from_parts(1.0, array![-0.5, 0.5, 0.5, -0.5], array![1.0, 0.0], 1.0);
        fit.apply_sign_convention();
        assert_eq!(fit.u[0], 0.5);
        assert_eq!(fit.v[0], -1.0);
    }

    #[test]
    fn random_init_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 6, 4);
        let opts = SolverOptions {
            init: Init::Random(99),
            ..SolverOptions::with_alpha(alpha(0.3))
        };
        let a = fit_rank1(&x, &opts).unwrap();
        let b = fit_rank1(&x, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn winsorize_clips_outliers_only() {
        let mut x = Matrix::from_shape_fn((4, 4), |(i, j)| (i * 4 + j) as f64 * 0.1);
        x[[2, 1]] = 1000.0;
        let w = winsorize(&x);
        assert!(w[[2, 1]] < 10.0);
        assert_eq!(w[[0, 0]], x[[0, 0]]);
        let flat = Matrix::zeros((3, 3));
        assert_eq!(winsorize(&flat), flat);
    }

    #[test]
    fn scale_equivariance_with_provided_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = random_matrix(&mut rng, 7, 4);
        let start = Rank1Fit::from_parts(
            2.0,
            unit(Array1::from_shape_fn(7, |_| rng.random::<f64>() + 0.1)),
            unit(Array1::from_shape_fn(4, |_| rng.random::<f64>() - 0.5)),
            1.0,
        );
        let opts = SolverOptions {
            alpha: alpha(0.5),
            tol: 1e-14,
            max_iter: 500,
            init: Init::Provided(Box::new(start)),
            ..Default::default()
        };
        for c in [1.0, 3.0, -2.0, 0.5] {
            assert!(check_equivariance_scale(&x, c, &opts), "c = {c}");
        }
        assert!(!check_equivariance_scale(&x, 0.0, &opts));
    }
}
