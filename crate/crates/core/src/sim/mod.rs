//! Monte Carlo oracles over explicit Poisson network realizations.
//!
//! Nothing here calls into the closed-form modules: shadowing gains, distances
//! and association are all drawn and computed from scratch, so agreement with
//! the analytic results is an independent check.
//!
//! Each replicate owns a ChaCha stream selected by `(seed, replicate index)`.
//! Replicates run in parallel and are reduced in index order, so the thread
//! count never changes the output.

mod estimators;
mod network;

pub use estimators::{association_mc, coverage_mc, rate_mc, service_area_mc};
pub use network::{associate, sample_network, Realization, Serving};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AvailabilityVector, NetworkScenario};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// How the finite simulation window is closed off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Distances wrap around the window edges.
    Toroidal,
    /// Plain Euclidean distances; measurements only inside `[margin, L - margin]^2`.
    Guard { margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Side `L` of the square window.
    pub window_side: f64,
    pub replicates: usize,
    pub seed: u64,
    pub boundary: BoundaryMode,
    /// Probe points (or typical users) measured per replicate.
    pub probes: usize,
}

impl SimConfig {
    pub fn new(window_side: f64, replicates: usize, seed: u64) -> Self {
        SimConfig {
            window_side,
            replicates,
            seed,
            boundary: BoundaryMode::Toroidal,
            probes: 2000,
        }
    }

    /// Window large enough for about `target` ON BSs of the sparsest active tier.
    pub fn suggested_window(scenario: &NetworkScenario, rho: &AvailabilityVector, target: f64) -> f64 {
        let sparsest = scenario
            .tiers
            .iter()
            .zip(rho.as_slice())
            .map(|(t, r)| r * t.density)
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        if sparsest.is_finite() {
            (target / sparsest).sqrt()
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_side.is_finite() && self.window_side > 0.0) {
            return Err(Error::invalid("window_side", None, "must be positive"));
        }
        if self.replicates < 1 {
            return Err(Error::invalid("replicates", None, "at least one replicate is required"));
        }
        if self.probes < 1 {
            return Err(Error::invalid("probes", None, "at least one probe per replicate is required"));
        }
        if let BoundaryMode::Guard { margin } = self.boundary {
            if !(margin >= 0.0 && margin < self.window_side / 2.0) {
                return Err(Error::invalid("boundary.margin", None, "guard margin must lie in [0, L/2)"));
            }
        }
        Ok(())
    }

    pub(crate) fn replicate_rng(&self, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate as u64);
        rng
    }
}

/// Two-sided 99% Student-t quantile for `n` samples.
fn t99(n: usize) -> f64 {
    StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("n > 1")
        .inverse_cdf(0.995)
}

/// Monte Carlo estimate over independent replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    /// Half-width of the Student-t 99% interval of the mean.
    pub ci_halfwidth_99: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SimEstimate {
    pub fn from_samples(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            t99(n) * (var / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        SimEstimate {
            mean,
            ci_halfwidth_99: ci,
            samples: n,
            seed,
        }
    }

    /// Ratio estimate `sum(num) / sum(den)` with a delta-method interval.
    pub(crate) fn from_ratio(num: &[f64], den: &[f64], seed: u64) -> Self {
        let n = num.len();
        let den_mean = den.iter().sum::<f64>() / n as f64;
        let mean = num.iter().sum::<f64>() / den.iter().sum::<f64>();
        let ci = if n > 1 {
            let var = num
                .iter()
                .zip(den)
                .map(|(a, b)| (a - mean * b).powi(2))
                .sum::<f64>()
                / (n as f64 - 1.0);
            t99(n) * (var / n as f64).sqrt() / den_mean
        } else {
            f64::INFINITY
        };
        SimEstimate {
            mean,
            ci_halfwidth_99: ci,
            samples: n,
            seed,
        }
    }

    /// `|mean - value| <= ci_halfwidth_99`.
    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci_halfwidth_99
    }
}

/// Runs `f` once per replicate in parallel; results come back in replicate order.
pub(crate) fn run_replicates<T, F>(config: &SimConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..config.replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = config.replicate_rng(i);
            f(i, &mut rng)
        })
        .collect()
}
