//! Rank-r fits by deflation.
//!
//! Layer `k` runs the rank-one solver on `X - sum_{r<k} lambda_r u_r v_r^T`.
//! After each row (column) regression the working vector is projected onto
//! the complement of the earlier left (right) vectors, so the extracted
//! vectors stay orthonormal throughout the iteration. The projection uses the
//! metric of the current regression weights; with uniform weights this is the
//! ordinary Gram-Schmidt step.

use ndarray::{s, Array1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RsvdError};
use crate::rank1::{self, check_input, Deflation, Init, Rank1Fit, SolverOptions};
use crate::Matrix;

/// Convergence record of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub degenerate_sigma_steps: usize,
}

impl From<&Rank1Fit> for LayerDiagnostics {
    fn from(f: &Rank1Fit) -> Self {
        LayerDiagnostics {
            iterations: f.iterations,
            converged: f.converged,
            trace: f.trace.clone(),
            degenerate_sigma_steps: f.degenerate_sigma_steps,
        }
    }
}

/// A rank-r robust decomposition. Layers are stored in extraction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSvd {
    pub rank: usize,
    pub lambdas: Array1<f64>,
    /// `n x r`, one column per layer.
    pub u: Matrix,
    /// `p x r`, one column per layer.
    pub v: Matrix,
    pub sigma2s: Array1<f64>,
    pub diagnostics: Vec<LayerDiagnostics>,
}

impl RobustSvd {
    /// The layer-`k` rank-one fit (zero based).
    pub fn layer(&self, k: usize) -> Rank1Fit {
        let d = &self.diagnostics[k];
        Rank1Fit {
            lambda: self.lambdas[k],
            u: self.u.column(k).to_owned(),
            v: self.v.column(k).to_owned(),
            sigma2: self.sigma2s[k],
            iterations: d.iterations,
            converged: d.converged,
            trace: d.trace.clone(),
            degenerate_sigma_steps: d.degenerate_sigma_steps,
        }
    }

    /// Copy with layers reordered by decreasing singular value (stable).
    pub fn sorted_by_magnitude(&self) -> RobustSvd {
        let mut order: Vec<usize> = (0..self.rank).collect();
        order.sort_by(|&a, &b| self.lambdas[b].total_cmp(&self.lambdas[a]));
        RobustSvd {
            rank: self.rank,
            lambdas: order.iter().map(|&k| self.lambdas[k]).collect(),
            u: self.u.select(ndarray::Axis(1), &order),
            v: self.v.select(ndarray::Axis(1), &order),
            sigma2s: order.iter().map(|&k| self.sigma2s[k]).collect(),
            diagnostics: order.iter().map(|&k| self.diagnostics[k].clone()).collect(),
        }
    }

    /// Frobenius norms of `X - sum_{r<k} lambda_r u_r v_r^T` for `k = 0..=rank`.
    pub fn residual_norms(&self, x: &Matrix) -> Vec<f64> {
        let mut e = x.clone();
        let mut out = vec![frobenius(&e)];
        for k in 0..self.rank {
            subtract_layer(&mut e, self.lambdas[k], &self.u.column(k).to_owned(), &self.v.column(k).to_owned());
            out.push(frobenius(&e));
        }
        out
    }
}

pub(crate) fn frobenius(x: &Matrix) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn subtract_layer(e: &mut Matrix, lambda: f64, u: &Array1<f64>, v: &Array1<f64>) {
    for (i, mut row) in e.rows_mut().into_iter().enumerate() {
        let a = lambda * u[i];
        row.iter_mut().zip(v.iter()).for_each(|(c, &vj)| *c -= a * vj);
    }
}

/// Fit `rank` layers by deflation.
///
/// `opts.init` applies to the first layer. Later layers start from
/// `Init::RobustClassical` when the first layer was given an explicit start,
/// and from a seed offset by the layer index under `Init::Random`.
pub fn fit_svd(x: &Matrix, rank: usize, opts: &SolverOptions) -> Result<RobustSvd> {
    opts.validate()?;
    check_input(x)?;
    let (n, p) = x.dim();
    let max = n.min(p);
    if rank == 0 || rank > max {
        return Err(RsvdError::RankTooLarge { rank, max });
    }
    let floor = opts.sigma_floor.resolve(x);

    let mut u = Matrix::zeros((n, rank));
    let mut v = Matrix::zeros((p, rank));
    let mut lambdas = Array1::zeros(rank);
    let mut sigma2s = Array1::zeros(rank);
    let mut diagnostics = Vec::with_capacity(rank);
    let mut resid = x.clone();

    for k in 0..rank {
        let init = match (&opts.init, k) {
            (init, 0) => init.clone(),
            (Init::Random(seed), k) => Init::Random(seed.wrapping_add(k as u64)),
            (Init::Provided(_), _) => Init::RobustClassical,
            (init, _) => init.clone(),
        };
        let deflation = (k > 0).then(|| Deflation {
            prev_u: u.slice(s![.., ..k]),
            prev_v: v.slice(s![.., ..k]),
        });
        let mut fit = rank1::initial_state(&resid, &init, floor, deflation)
            .and_then(|start| rank1::iterate(&resid, start, opts.alpha, opts.tol, opts.max_iter, floor, deflation))
            .map_err(|e| e.in_layer(k + 1))?;
        fit.apply_sign_convention();

        subtract_layer(&mut resid, fit.lambda, &fit.u, &fit.v);
        u.column_mut(k).assign(&fit.u);
        v.column_mut(k).assign(&fit.v);
        lambdas[k] = fit.lambda;
        sigma2s[k] = fit.sigma2;
        diagnostics.push(LayerDiagnostics::from(&fit));
    }

    Ok(RobustSvd {
        rank,
        lambdas,
        u,
        v,
        sigma2s,
        diagnostics,
    })
}

/// `sum_k lambda_k u_k v_k^T`.
pub fn reconstruct(svd: &RobustSvd) -> Matrix {
    let scaled = &svd.u * &svd.lambdas;
    scaled.dot(&svd.v.t())
}

/// Largest off-diagonal magnitude of `U^T U` and of `V^T V`.
pub fn orthogonality_report(svd: &RobustSvd) -> (f64, f64) {
    (max_off_diagonal(&svd.u), max_off_diagonal(&svd.v))
}

fn max_off_diagonal(m: &Matrix) -> f64 {
    let g = m.t().dot(m);
    let mut worst = 0.0f64;
    for ((i, j), &val) in g.indexed_iter() {
        if i != j {
            worst = worst.max(val.abs());
        }
    }
    worst
}
