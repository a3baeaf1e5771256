use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dpd::Alpha;
use crate::error::{Result, RsvdError};
use crate::rank1::{fit_rank1, SolverOptions};
use crate::Matrix;

/// Mean wall time of rank-one fits, one row per matrix height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<usize>,
    pub cols: usize,
    pub alphas: Vec<f64>,
    pub reps: usize,
    /// `mean_ms[i][a]` for `rows[i]` and `alphas[a]`.
    pub mean_ms: Vec<Vec<f64>>,
    /// Mean iteration count per cell; deterministic given the seed.
    pub mean_iterations: Vec<Vec<f64>>,
}

/// Time `fit_rank1` on `n x cols` matrices of iid `U(0, 1)` entries.
///
/// Runs on the calling thread. Matrix generation is excluded from the timing.
pub fn run_timing_bench(
    rows: &[usize],
    cols: usize,
    alphas: &[Alpha],
    reps: usize,
    seed: u64,
) -> Result<TimingTable> {
    if rows.is_empty() || alphas.is_empty() {
        return Err(RsvdError::InvalidConfig("rows and alphas must be non-empty".into()));
    }
    if reps == 0 {
        return Err(RsvdError::InvalidConfig("reps must be at least 1".into()));
    }
    if cols < 2 || rows.iter().any(|&n| n < 2) {
        return Err(RsvdError::InvalidConfig("every dimension must be at least 2".into()));
    }
    let mut mean_ms = Vec::with_capacity(rows.len());
    let mut mean_iterations = Vec::with_capacity(rows.len());
    for (i, &n) in rows.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mats: Vec<Matrix> = (0..reps)
            .map(|_| Matrix::from_shape_fn((n, cols), |_| rng.random::<f64>()))
            .collect();
        let mut ms_row = Vec::with_capacity(alphas.len());
        let mut it_row = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let opts = SolverOptions::with_alpha(alpha);
            let mut total = 0.0;
            let mut iters = 0usize;
            for x in &mats {
                let start = Instant::now();
                let fit = fit_rank1(x, &opts)?;
                total += start.elapsed().as_secs_f64() * 1e3;
                iters += fit.iterations;
            }
            ms_row.push(total / reps as f64);
            it_row.push(iters as f64 / reps as f64);
        }
        mean_ms.push(ms_row);
        mean_iterations.push(it_row);
    }
    Ok(TimingTable {
        rows: rows.to_vec(),
        cols,
        alphas: alphas.iter().map(|a| a.value()).collect(),
        reps,
        mean_ms,
        mean_iterations,
    })
}
