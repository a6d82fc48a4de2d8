//! Closed-form availability analysis.
//!
//! The central object is the map `rho -> Xi(rho)` whose k-th component is the
//! availability a tier-k BS reaches when every other BS's availability is
//! frozen at `rho`. A positive fixed point exists iff the network harvests more
//! energy than its covered users consume.

use serde::{Deserialize, Serialize};

use crate::coverage::coverage_prob;
use crate::error::{Error, Result};
use crate::markov::{empty_probability, policy_availability, BirthDeathSpec, PolicySpec};
use crate::model::{validate, AvailabilityVector, NetworkScenario, ShadowingSpec, TierParams};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// `ln(10) / 5`: converts a dB-scale Gaussian into the exponent of `X^(2/alpha)`.
const DB_TO_NEPER_SQ: f64 = std::f64::consts::LN_10 / 5.0;

/// Fractional moment `E[X^(2/alpha)]` of lognormal shadowing.
pub fn frac_moment(shadowing: ShadowingSpec, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::invalid("path_loss_exp", None, format!("path_loss_exp must exceed 2, got {alpha}")));
    }
    let mean = DB_TO_NEPER_SQ * shadowing.mean_db / alpha;
    let sd = DB_TO_NEPER_SQ * shadowing.std_db / alpha;
    Ok((mean + 0.5 * sd * sd).exp())
}

/// `E[X^(2/alpha)] P^(2/alpha)`, the per-BS pull a tier exerts on users.
pub fn association_weight(tier: &TierParams, alpha: f64) -> Result<f64> {
    Ok(frac_moment(tier.shadowing, alpha)? * tier.tx_power.powf(2.0 / alpha))
}

/// Scenario constants that every availability computation needs, evaluated once.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    weights: Vec<f64>,
    densities: Vec<f64>,
    harvest: Vec<f64>,
    battery: Vec<u32>,
    /// `P_c * lambda_u`: density of users that actually drain energy.
    effective_users: f64,
    coverage: f64,
}

impl EnergyModel {
    pub fn new(scenario: &NetworkScenario) -> Result<Self> {
        validate(scenario)?;
        let alpha = scenario.path_loss_exp;
        let weights = scenario
            .tiers
            .iter()
            .map(|t| association_weight(t, alpha))
            .collect::<Result<Vec<_>>>()?;
        let coverage = coverage_prob(scenario)?;
        Ok(EnergyModel {
            weights,
            densities: scenario.tiers.iter().map(|t| t.density).collect(),
            harvest: scenario.tiers.iter().map(|t| t.harvest_rate).collect(),
            battery: scenario.tiers.iter().map(|t| t.battery).collect(),
            effective_users: coverage * scenario.user_density,
            coverage,
        })
    }

    pub fn num_tiers(&self) -> usize {
        self.weights.len()
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn battery(&self, k: usize) -> u32 {
        self.battery[k]
    }

    pub fn harvest_rate(&self, k: usize) -> f64 {
        self.harvest[k]
    }

    /// Over-provisioning factor `sum lambda mu / (lambda_u P_c)`.
    pub fn gamma(&self) -> f64 {
        let supply: f64 = self.densities.iter().zip(&self.harvest).map(|(l, m)| l * m).sum();
        supply / self.effective_users
    }

    fn check_tier(&self, k: usize) -> Result<()> {
        if k >= self.num_tiers() {
            return Err(Error::TierIndex {
                index: k,
                tiers: self.num_tiers(),
            });
        }
        Ok(())
    }

    fn check_len(&self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.num_tiers() {
            return Err(Error::invalid(
                "rho",
                None,
                format!("expected {} availabilities, got {}", self.num_tiers(), rho.len()),
            ));
        }
        Ok(())
    }

    /// `sum_j rho_j lambda_j w_j`.
    pub fn weighted_density(&self, rho: &[f64]) -> f64 {
        rho.iter()
            .zip(&self.densities)
            .zip(&self.weights)
            .map(|((r, l), w)| r * l * w)
            .sum()
    }

    /// Mean service-region area of a tier-k BS.
    pub fn mean_service_area(&self, rho: &[f64], k: usize) -> Result<f64> {
        self.check_tier(k)?;
        self.check_len(rho)?;
        let denom = self.weighted_density(rho);
        if denom <= 0.0 {
            return Err(Error::NoBsAvailable);
        }
        Ok(self.weights[k] / denom)
    }

    /// Energy drained per second by a tier-k BS while ON, `P_c lambda_u E|A_k|`.
    pub fn utilization(&self, rho: &[f64], k: usize) -> Result<f64> {
        Ok(self.effective_users * self.mean_service_area(rho, k)?)
    }

    /// `mu_k / nu_k`; zero when no BS is available.
    fn load_ratio(&self, rho: &[f64], k: usize) -> f64 {
        self.harvest[k] * self.weighted_density(rho) / (self.effective_users * self.weights[k])
    }

    /// The birth-death chain a tier-k BS sees at availabilities `rho`.
    pub fn birth_death(&self, rho: &[f64], k: usize) -> Result<BirthDeathSpec> {
        BirthDeathSpec::new(self.harvest[k], self.utilization(rho, k)?, self.battery[k])
    }

    /// `g_k(rho)` for the `S(1)` policy: `1 - (1 - r) / (1 - r^(N+1))`.
    pub fn g(&self, rho: &[f64], k: usize) -> Result<f64> {
        self.check_tier(k)?;
        self.check_len(rho)?;
        Ok(self.g_unchecked(rho, k))
    }

    fn g_unchecked(&self, rho: &[f64], k: usize) -> f64 {
        let r = self.load_ratio(rho, k);
        if r <= 0.0 {
            return 0.0;
        }
        1.0 - empty_probability(r, self.battery[k])
    }

    /// Component k of the availability map under an arbitrary `S(c)` policy.
    pub fn tier_map(&self, rho: &[f64], k: usize, policy: PolicySpec) -> Result<f64> {
        self.check_tier(k)?;
        self.check_len(rho)?;
        Ok(self.tier_map_unchecked(rho, k, policy))
    }

    pub(crate) fn tier_map_unchecked(&self, rho: &[f64], k: usize, policy: PolicySpec) -> f64 {
        if policy.cutoff == 1 {
            return self.g_unchecked(rho, k);
        }
        let r = self.load_ratio(rho, k);
        if r <= 0.0 {
            return 0.0;
        }
        // Rates only enter through their ratio and the common time unit cancels.
        let spec = BirthDeathSpec {
            harvest_rate: r,
            utilization_rate: 1.0,
            battery: self.battery[k],
        };
        policy_availability(&spec, policy).expect("policy validated by caller")
    }

    fn check_policies(&self, policies: &[PolicySpec]) -> Result<()> {
        if policies.len() != self.num_tiers() {
            return Err(Error::invalid(
                "policy",
                None,
                format!("expected {} per-tier policies, got {}", self.num_tiers(), policies.len()),
            ));
        }
        for (k, p) in policies.iter().enumerate() {
            p.check(self.battery[k]).map_err(|e| match e {
                Error::Invalid { field, reason, .. } => Error::Invalid {
                    field,
                    tier: Some(k),
                    reason,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Fixed point of the availability map, iterated downward from all-ones.
    pub fn solve(&self, policies: &[PolicySpec], tolerance: f64, max_iter: usize) -> Result<FixedPointResult> {
        self.solve_from(&vec![1.0; self.num_tiers()], policies, tolerance, max_iter)
    }

    /// Same as [`EnergyModel::solve`] but started from an arbitrary positive point.
    pub fn solve_from(
        &self,
        init: &[f64],
        policies: &[PolicySpec],
        tolerance: f64,
        max_iter: usize,
    ) -> Result<FixedPointResult> {
        self.check_len(init)?;
        self.check_policies(policies)?;
        let k = self.num_tiers();
        if self.gamma() <= 1.0 {
            return Ok(FixedPointResult {
                rho: AvailabilityVector::zeros(k),
                iterations: 0,
                residual: 0.0,
                feasible: false,
            });
        }
        let mut rho = init.to_vec();
        let mut next = vec![0.0; k];
        let mut residual = f64::INFINITY;
        for iter in 1..=max_iter {
            for (j, slot) in next.iter_mut().enumerate() {
                *slot = self.tier_map_unchecked(&rho, j, policies[j]);
            }
            residual = rho.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut rho, &mut next);
            if residual <= tolerance {
                // Report the residual of the returned point itself.
                let final_residual = (0..k)
                    .map(|j| (rho[j] - self.tier_map_unchecked(&rho, j, policies[j])).abs())
                    .fold(0.0, f64::max);
                return Ok(FixedPointResult {
                    rho: AvailabilityVector::new(rho)?,
                    iterations: iter,
                    residual: final_residual,
                    feasible: true,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual,
            last: rho,
        })
    }

    /// Condition that every tier's harvest-to-drain ratio exceeds its availability.
    pub fn equivalence_check(&self, rho: &[f64]) -> Result<bool> {
        self.check_len(rho)?;
        if let Some(k) = rho.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::invalid("rho", Some(k), "availabilities must be strictly positive"));
        }
        Ok((0..self.num_tiers()).all(|k| self.load_ratio(rho, k) / rho[k] > 1.0))
    }
}

/// Output of the availability fixed-point solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub rho: AvailabilityVector,
    pub iterations: usize,
    /// `max_k |rho_k - Xi_k(rho)|` at the returned point.
    pub residual: f64,
    pub feasible: bool,
}

pub fn mean_service_area(scenario: &NetworkScenario, rho: &AvailabilityVector, k: usize) -> Result<f64> {
    EnergyModel::new(scenario)?.mean_service_area(rho.as_slice(), k)
}

pub fn energy_utilization(scenario: &NetworkScenario, rho: &AvailabilityVector, k: usize) -> Result<f64> {
    EnergyModel::new(scenario)?.utilization(rho.as_slice(), k)
}

pub fn g(scenario: &NetworkScenario, rho: &AvailabilityVector, k: usize) -> Result<f64> {
    EnergyModel::new(scenario)?.g(rho.as_slice(), k)
}

pub fn solve_availability(
    scenario: &NetworkScenario,
    policies: &[PolicySpec],
    tolerance: f64,
    max_iter: usize,
) -> Result<FixedPointResult> {
    EnergyModel::new(scenario)?.solve(policies, tolerance, max_iter)
}

/// `(gamma > 1, gamma)`.
pub fn check_feasibility(scenario: &NetworkScenario) -> Result<(bool, f64)> {
    let gamma = EnergyModel::new(scenario)?.gamma();
    Ok((gamma > 1.0, gamma))
}

pub fn equivalence_check(scenario: &NetworkScenario, rho: &AvailabilityVector) -> Result<bool> {
    EnergyModel::new(scenario)?.equivalence_check(rho.as_slice())
}

/// Lower bound on the fraction of users that must be dropped, `max(0, 1 - gamma)`.
pub fn energy_outage_bound(scenario: &NetworkScenario) -> Result<f64> {
    let (_, gamma) = check_feasibility(scenario)?;
    Ok((1.0 - gamma).max(0.0))
}

/// User density that yields over-provisioning factor `gamma` for the other parameters.
pub fn user_density_for_gamma(scenario: &NetworkScenario, gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("over_provisioning", None, format!("must be positive, got {gamma}")));
    }
    let pc = coverage_prob(scenario)?;
    Ok(scenario.total_harvest() / (gamma * pc))
}
