//! Monte Carlo accuracy study and timing benchmark.
//!
//! Every replicate draws its noise from its own ChaCha8 stream: the generator
//! is seeded with the configured seed and switched to stream number `r` for
//! replicate `r`. Replicates run on the rayon pool and are aggregated in
//! replicate order, so results do not depend on the thread count.

mod metrics;
mod noise;
mod report;
mod timing;
mod truth;

pub use metrics::{dissimilarity, ValueSummary, UNIT_TOL};
pub use noise::{sample_noise, NoiseDraw, Setup, BLOCK, OUTLIER};
pub use report::{SIM_CSV_HEADER, write_sim_csv, write_timing_csv};
pub use timing::{run_timing_bench, TimingTable};
pub use truth::{make_ground_truth, orthogonal_poly_contrasts, GroundTruth};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::fit_svd;
use crate::dpd::Alpha;
use crate::error::{Result, RsvdError};
use crate::rank1::SolverOptions;

/// Rank of the simulated signal.
pub const SIM_RANK: usize = 3;
/// Default number of replicates.
pub const DEFAULT_REPLICATES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub setup: Setup,
    pub replicates: usize,
    pub alphas: Vec<Alpha>,
    pub seed: u64,
    /// Solver settings; `alpha` is overridden per method.
    pub solver: SolverOptions,
}

impl SimConfig {
    pub fn new(setup: Setup, replicates: usize, alphas: Vec<Alpha>, seed: u64) -> Self {
        SimConfig {
            setup,
            replicates,
            alphas,
            seed,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(RsvdError::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.alphas.is_empty() {
            return Err(RsvdError::InvalidConfig("at least one alpha is required".into()));
        }
        self.solver.validate()
    }

    /// Generator for replicate `r`.
    pub fn replicate_rng(&self, r: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(r as u64);
        rng
    }
}

/// Aggregated metrics of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// `"SVD"` for the classical baseline, `"rSVDdpd"` otherwise.
    pub method: String,
    pub alpha: f64,
    pub values: Vec<ValueSummary>,
    /// Mean dissimilarity per left vector.
    pub diss_left: Vec<f64>,
    pub diss_right: Vec<f64>,
    pub sq_bias: f64,
    pub mse: f64,
    pub diss_left_total: f64,
    pub diss_right_total: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub setup: Setup,
    pub replicates: usize,
    pub seed: u64,
    /// Baseline first, then one entry per configured alpha.
    pub methods: Vec<MethodSummary>,
}

impl SimReport {
    pub fn baseline(&self) -> &MethodSummary {
        &self.methods[0]
    }

    /// The robust method at `alpha`, if it was run.
    pub fn robust(&self, alpha: f64) -> Option<&MethodSummary> {
        self.methods[1..].iter().find(|m| m.alpha == alpha)
    }
}

/// Estimates of one method on one replicate.
struct Estimate {
    lambdas: [f64; SIM_RANK],
    diss_left: [f64; SIM_RANK],
    diss_right: [f64; SIM_RANK],
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let truth = make_ground_truth();
    let mut methods: Vec<(String, Alpha)> = vec![("SVD".to_string(), Alpha::CLASSICAL)];
    methods.extend(cfg.alphas.iter().map(|&a| ("rSVDdpd".to_string(), a)));

    let per_replicate: Vec<Vec<Option<Estimate>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = cfg.replicate_rng(r);
            let draw = sample_noise(cfg.setup, truth.rows(), truth.cols(), &mut rng);
            let x = draw.apply(&truth.x0);
            methods
                .iter()
                .map(|&(_, alpha)| {
                    let opts = SolverOptions {
                        alpha,
                        ..cfg.solver.clone()
                    };
                    fit_svd(&x, SIM_RANK, &opts).ok().map(|svd| {
                        let mut e = Estimate {
                            lambdas: [0.0; SIM_RANK],
                            diss_left: [0.0; SIM_RANK],
                            diss_right: [0.0; SIM_RANK],
                        };
                        for k in 0..SIM_RANK {
                            e.lambdas[k] = svd.lambdas[k];
                            e.diss_left[k] = 1.0 - svd.u.column(k).dot(&truth.u.column(k)).abs();
                            e.diss_right[k] = 1.0 - svd.v.column(k).dot(&truth.v.column(k)).abs();
                        }
                        e
                    })
                })
                .collect()
        })
        .collect();

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(m, (name, alpha))| {
            let ok: Vec<&Estimate> = per_replicate.iter().filter_map(|rep| rep[m].as_ref()).collect();
            let failures = cfg.replicates - ok.len();
            let values: Vec<ValueSummary> = (0..SIM_RANK)
                .map(|k| {
                    let est: Vec<f64> = ok.iter().map(|e| e.lambdas[k]).collect();
                    ValueSummary::from_estimates(&est, truth.lambdas[k])
                })
                .collect();
            let mean_of = |f: &dyn Fn(&Estimate) -> f64| -> f64 {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|e| f(e)).sum::<f64>() / ok.len() as f64
                }
            };
            let diss_left: Vec<f64> = (0..SIM_RANK).map(|k| mean_of(&|e| e.diss_left[k])).collect();
            let diss_right: Vec<f64> = (0..SIM_RANK).map(|k| mean_of(&|e| e.diss_right[k])).collect();
            MethodSummary {
                method: name.clone(),
                alpha: alpha.value(),
                sq_bias: values.iter().map(|v| v.bias * v.bias).sum(),
                mse: values.iter().map(|v| v.mse).sum(),
                diss_left_total: diss_left.iter().sum(),
                diss_right_total: diss_right.iter().sum(),
                values,
                diss_left,
                diss_right,
                successes: ok.len(),
                failures,
            }
        })
        .collect();

    Ok(SimReport {
        setup: cfg.setup,
        replicates: cfg.replicates,
        seed: cfg.seed,
        methods: summaries,
    })
}
