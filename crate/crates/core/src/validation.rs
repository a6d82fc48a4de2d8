//! Analytic results checked against independent oracles for one scenario.
//!
//! Every check records the two values compared, the tolerance and the seed
//! used (if any), so a failing report can be reproduced exactly.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analytic::{EnergyModel, DEFAULT_MAX_ITER};
use crate::coverage::{coverage_prob, rate_ccdf, RateQuery};
use crate::error::Result;
use crate::markov::{self, PolicySpec};
use crate::model::{AvailabilityVector, NetworkScenario};
use crate::sim::{self, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub analytic: f64,
    pub oracle: f64,
    /// Allowed `|analytic - oracle|`.
    pub tolerance: f64,
    pub seed: Option<u64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
    /// Checks that did not apply or would not finish, with the reason.
    pub skipped: Vec<String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, analytic: f64, oracle: f64, tolerance: f64, seed: Option<u64>) {
        let passed = (analytic - oracle).abs() <= tolerance;
        self.checks.push(CheckOutcome {
            name: name.into(),
            analytic,
            oracle,
            tolerance,
            seed,
            passed,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub replicates: usize,
    /// Probe users per replicate for area and coverage.
    pub probes: usize,
    /// Expected ON count of the sparsest tier in the simulation window.
    pub window_target: f64,
    pub gillespie_cycles: usize,
    /// Cap on simulated CTMC transitions per tier; fewer cycles are run to stay under it.
    pub gillespie_event_budget: f64,
    pub solver_tolerance: f64,
    /// Rate threshold for the rate check; `None` skips it.
    pub rate_target: Option<f64>,
    pub coverage_tolerance: f64,
    pub rate_tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            seed: 1,
            replicates: 40,
            probes: 2500,
            window_target: 60.0,
            gillespie_cycles: 100_000,
            gillespie_event_budget: 2e8,
            solver_tolerance: 1e-12,
            rate_target: Some(0.1),
            coverage_tolerance: 0.01,
            rate_tolerance: 0.03,
        }
    }
}

/// Fewest ON/OFF cycles for which the CTMC interval is still trusted.
const MIN_GILLESPIE_CYCLES: usize = 1000;

/// Largest entrywise `|a - b| / max(1, |b|)`.
fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Runs every analytic-versus-oracle pair that applies to `scenario`.
///
/// `rho` selects where the spatial checks are evaluated; by default the
/// solved availabilities are used, or all ones when some tier is switched off.
pub fn validate_scenario(
    scenario: &NetworkScenario,
    policies: &[PolicySpec],
    rho: Option<&AvailabilityVector>,
    options: &ValidationOptions,
) -> Result<ValidationReport> {
    let model = EnergyModel::new(scenario)?;
    let kk = model.num_tiers();
    let mut report = ValidationReport::default();

    let fixed = model.solve(policies, options.solver_tolerance, DEFAULT_MAX_ITER)?;
    report.push("fixed point residual", fixed.residual, 0.0, options.solver_tolerance, None);
    let gamma = model.gamma();
    report.push(
        "feasible iff gamma > 1",
        f64::from(u8::from(fixed.feasible)),
        f64::from(u8::from(gamma > 1.0)),
        0.0,
        None,
    );

    let solved = fixed.rho.as_slice();
    let energy_point = if solved.iter().all(|&r| r > 0.0) {
        solved.to_vec()
    } else {
        vec![1.0; kk]
    };
    for k in 0..kk {
        let bd = model.birth_death(&energy_point, k)?;
        let gap = relative_gap(&markov::neg_b_inverse(&bd), &markov::neg_b_inverse_lu(&bd));
        report.push(format!("tier {} inverse of -B, closed form vs LU", k + 1), gap, 0.0, 1e-9, None);
        let stat = markov::stationary_availability(&bd);
        let p1 = markov::policy_availability(&bd, PolicySpec::MIN_CUTOFF)?;
        report.push(format!("tier {} S(1) availability vs stationary", k + 1), p1, stat, 1e-12, None);

        if fixed.feasible && solved[k] > 0.0 {
            let name = format!("tier {} availability vs CTMC simulation", k + 1);
            // Transitions per cycle: the ON period plus the OFF births.
            let per_cycle = markov::mean_on_time(&bd, policies[k].cutoff)? * (bd.harvest_rate + bd.utilization_rate)
                + f64::from(policies[k].cutoff);
            let affordable = (options.gillespie_event_budget / per_cycle).floor();
            let cycles = (options.gillespie_cycles as f64).min(affordable) as usize;
            if cycles < MIN_GILLESPIE_CYCLES {
                report.skipped.push(format!("{name}: about {per_cycle:.3e} transitions per cycle"));
                continue;
            }
            let seed = options.seed.wrapping_add(k as u64);
            let est = markov::simulate_on_off(&bd, policies[k], cycles, seed)?;
            report.push(
                name,
                solved[k],
                est.availability,
                est.ci_halfwidth_99,
                Some(seed),
            );
        }
    }

    let spatial = match rho {
        Some(r) => r.clone(),
        None => AvailabilityVector::new(energy_point)?,
    };
    let window = SimConfig::suggested_window(scenario, &spatial, options.window_target);
    let mut config = SimConfig::new(window, options.replicates, options.seed);
    config.probes = options.probes;

    for k in 0..kk {
        if spatial[k] * scenario.tiers[k].density <= 0.0 {
            continue;
        }
        let analytic = model.mean_service_area(spatial.as_slice(), k)?;
        let (est, _) = sim::service_area_mc(scenario, &spatial, k, &config)?;
        report.push(
            format!("tier {} mean service area vs spatial simulation", k + 1),
            analytic,
            est.mean,
            est.ci_halfwidth_99,
            Some(config.seed),
        );
    }

    let pc = coverage_prob(scenario)?;
    let cov = sim::coverage_mc(scenario, &spatial, &config)?;
    report.push(
        "coverage vs spatial simulation",
        pc,
        cov.mean,
        options.coverage_tolerance,
        Some(config.seed),
    );

    if let Some(t) = options.rate_target {
        let analytic = rate_ccdf(scenario, &spatial, RateQuery::new(t))?;
        let mut rate_config = config;
        // Every user in the window is a sample, so fewer replicates suffice.
        rate_config.replicates = options.replicates.div_ceil(4).max(2);
        let est = sim::rate_mc(scenario, &spatial, t, &rate_config)?;
        report.push(
            format!("rate ccdf at T={t} vs spatial simulation"),
            analytic,
            est.mean,
            options.rate_tolerance,
            Some(config.seed),
        );
    }
    Ok(report)
}
