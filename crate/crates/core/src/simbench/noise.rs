use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::RsvdError;
use crate::Matrix;

/// Value used for gross outliers.
pub const OUTLIER: f64 = 25.0;
/// Side of the square outlier block.
pub const BLOCK: usize = 2;

/// Error distributions of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Standard normal.
    S1,
    /// Normal with 5% of cells replaced by 25.
    S2a,
    /// Normal with 10% of cells replaced by 25.
    S2b,
    /// Normal with 20% of cells replaced by 25.
    S2c,
    /// Normal, plus a random 2x2 block of the data set to 25.
    S3,
    /// Standard Cauchy.
    S4,
    /// Standard lognormal.
    S5,
    /// No noise at all.
    Noiseless,
}

impl Setup {
    pub const ALL: [Setup; 7] = [Setup::S1, Setup::S2a, Setup::S2b, Setup::S2c, Setup::S3, Setup::S4, Setup::S5];

    pub fn contamination_rate(self) -> Option<f64> {
        match self {
            Setup::S2a => Some(0.05),
            Setup::S2b => Some(0.1),
            Setup::S2c => Some(0.2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setup::S1 => "S1",
            Setup::S2a => "S2a",
            Setup::S2b => "S2b",
            Setup::S2c => "S2c",
            Setup::S3 => "S3",
            Setup::S4 => "S4",
            Setup::S5 => "S5",
            Setup::Noiseless => "noiseless",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setup {
    type Err = RsvdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Setup::S1),
            "s2a" => Ok(Setup::S2a),
            "s2b" => Ok(Setup::S2b),
            "s2c" => Ok(Setup::S2c),
            "s3" => Ok(Setup::S3),
            "s4" => Ok(Setup::S4),
            "s5" => Ok(Setup::S5),
            "noiseless" => Ok(Setup::Noiseless),
            _ => Err(RsvdError::Parse(format!("unknown setup '{s}' (expected s1, s2a, s2b, s2c, s3, s4, s5)"))),
        }
    }
}

/// One draw of the error model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub errors: Matrix,
    /// Top-left corner of the outlier block, for the block setup.
    pub block: Option<(usize, usize)>,
}

impl NoiseDraw {
    /// Data matrix `x0 + errors`, with the outlier block (if any) overwritten.
    pub fn apply(&self, x0: &Matrix) -> Matrix {
        let mut x = x0 + &self.errors;
        if let Some((r, c)) = self.block {
            x.slice_mut(ndarray::s![r..r + BLOCK, c..c + BLOCK]).fill(OUTLIER);
        }
        x
    }
}

/// Draw an `n x p` error matrix. Cells are filled in row-major order.
pub fn sample_noise<R: Rng + ?Sized>(setup: Setup, n: usize, p: usize, rng: &mut R) -> NoiseDraw {
    let mut errors = Matrix::zeros((n, p));
    let mut block = None;
    match setup {
        Setup::Noiseless => {}
        Setup::S1 | Setup::S3 => errors.iter_mut().for_each(|e| *e = StandardNormal.sample(rng)),
        Setup::S2a | Setup::S2b | Setup::S2c => {
            let rate = setup.contamination_rate().expect("contaminated setup");
            for e in errors.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                let u: f64 = rng.random();
                *e = if u < rate { OUTLIER } else { z };
            }
        }
        Setup::S4 => errors
            .iter_mut()
            .for_each(|e| *e = (std::f64::consts::PI * (rng.random::<f64>() - 0.5)).tan()),
        Setup::S5 => errors.iter_mut().for_each(|e| *e = Distribution::<f64>::sample(&StandardNormal, rng).exp()),
    }
    if setup == Setup::S3 && n >= BLOCK && p >= BLOCK {
        let r = rng.random_range(0..=n - BLOCK);
        let c = rng.random_range(0..=p - BLOCK);
        block = Some((r, c));
    }
    NoiseDraw { errors, block }
}
