//! Availability region: the set of availability tuples reachable by
//! uncoordinated ON/OFF strategies.
//!
//! A point `rho` is in the region iff no coordinate exceeds the largest
//! availability its tier can sustain with the other tiers frozen at `rho`.
//! Points strictly inside are reached by time-sharing `S(1)` with an idle
//! timer, so only the boundary and membership need to be computed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::EnergyModel;
use crate::error::{Error, Result};
use crate::markov::PolicySpec;
use crate::model::{AvailabilityVector, NetworkScenario};

/// Lower end of the bisection bracket.
const BRACKET_LOW: f64 = 1e-12;
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;
/// Slack allowed when comparing a coordinate against its boundary value.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 101;

/// Samples of `rho_k*(rho_other)` along a two-tier sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundary {
    pub tier: usize,
    /// `(conditioning availability, boundary value)` pairs.
    pub grid: Vec<(f64, f64)>,
    pub policy_constraint: Option<PolicySpec>,
}

/// Boundary solver bound to one scenario.
#[derive(Debug, Clone)]
pub struct Region {
    model: EnergyModel,
}

impl Region {
    pub fn new(scenario: &NetworkScenario) -> Result<Self> {
        Ok(Region {
            model: EnergyModel::new(scenario)?,
        })
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    /// Largest `rho_k` in `[0, 1]` with `rho_k = Xi_k(rho)`, where `rho` agrees with
    /// `others` off coordinate `k`. Zero when no positive solution exists.
    ///
    /// `others` has full length K; its k-th entry is ignored.
    pub fn boundary(&self, k: usize, others: &[f64], constraint: Option<PolicySpec>) -> Result<f64> {
        let kk = self.model.num_tiers();
        if k >= kk {
            return Err(Error::TierIndex { index: k, tiers: kk });
        }
        if others.len() != kk {
            return Err(Error::invalid("rho", None, format!("expected {kk} availabilities, got {}", others.len())));
        }
        for (j, &r) in others.iter().enumerate() {
            if j != k && !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid("rho", Some(j), format!("availability must lie in [0, 1], got {r}")));
            }
        }
        let policy = constraint.unwrap_or(PolicySpec::MIN_CUTOFF);
        policy.check(self.model.battery(k))?;

        let mut rho = others.to_vec();
        let mut excess = |x: f64| {
            rho[k] = x;
            self.model.tier_map_unchecked(&rho, k, policy) - x
        };
        // The map stays below one for finite batteries, so excess(1) < 0. Scan down
        // from 1 for the first point with positive excess, then bisect.
        const SCAN: usize = 64;
        let mut hi = 1.0;
        let mut lo = None;
        for step in 1..=SCAN {
            let x = 1.0 - step as f64 / SCAN as f64;
            let x = x.max(BRACKET_LOW);
            if excess(x) > 0.0 {
                lo = Some(x);
                break;
            }
            hi = x;
        }
        let Some(mut lo) = lo else {
            return Ok(0.0);
        };
        while hi - lo > BOUNDARY_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Membership with per-tier optional policy constraints.
    pub fn contains_with(&self, rho: &[f64], constraints: &[Option<PolicySpec>]) -> Result<bool> {
        let kk = self.model.num_tiers();
        if constraints.len() != kk {
            return Err(Error::invalid("constraint", None, format!("expected {kk} entries")));
        }
        for k in 0..kk {
            if rho[k] > self.boundary(k, rho, constraints[k])? + MEMBERSHIP_SLACK {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn contains(&self, rho: &AvailabilityVector) -> Result<bool> {
        self.contains_with(rho.as_slice(), &vec![None; self.model.num_tiers()])
    }

    fn require_two_tiers(&self) -> Result<()> {
        if self.model.num_tiers() != 2 {
            return Err(Error::invalid(
                "tiers",
                None,
                format!("boundary sweeps need exactly 2 tiers, got {}", self.model.num_tiers()),
            ));
        }
        Ok(())
    }

    /// Samples `rho_k*` against the other tier's availability on `resolution`
    /// evenly spaced points of `[0, 1]`.
    pub fn sweep_boundary(&self, k: usize, resolution: usize, constraint: Option<PolicySpec>) -> Result<RegionBoundary> {
        self.require_two_tiers()?;
        if k > 1 {
            return Err(Error::TierIndex { index: k, tiers: 2 });
        }
        if resolution < 2 {
            return Err(Error::invalid("grid", None, "grid resolution must be at least 2"));
        }
        let other = 1 - k;
        let grid = (0..resolution)
            .into_par_iter()
            .map(|i| {
                let x = i as f64 / (resolution - 1) as f64;
                let mut rho = [0.0; 2];
                rho[other] = x;
                self.boundary(k, &rho, constraint).map(|v| (x, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegionBoundary {
            tier: k,
            grid,
            policy_constraint: constraint,
        })
    }

    /// Fraction of a `resolution x resolution` grid on `[0, 1]^2` inside the region.
    pub fn grid_area(&self, resolution: usize, constraints: [Option<PolicySpec>; 2]) -> Result<f64> {
        let first = self.sweep_boundary(0, resolution, constraints[0])?;
        let second = self.sweep_boundary(1, resolution, constraints[1])?;
        let mut inside = 0usize;
        for (i, &(x1, b2)) in second.grid.iter().enumerate() {
            for (j, &(x2, b1)) in first.grid.iter().enumerate() {
                debug_assert_eq!(x1, i as f64 / (resolution - 1) as f64);
                debug_assert_eq!(x2, j as f64 / (resolution - 1) as f64);
                if x1 <= b1 + MEMBERSHIP_SLACK && x2 <= b2 + MEMBERSHIP_SLACK {
                    inside += 1;
                }
            }
        }
        Ok(inside as f64 / (resolution * resolution) as f64)
    }
}

pub fn boundary(
    scenario: &NetworkScenario,
    k: usize,
    others: &[f64],
    constraint: Option<PolicySpec>,
) -> Result<f64> {
    Region::new(scenario)?.boundary(k, others, constraint)
}

pub fn contains(scenario: &NetworkScenario, rho: &AvailabilityVector) -> Result<bool> {
    Region::new(scenario)?.contains(rho)
}

pub fn sweep_boundary(
    scenario: &NetworkScenario,
    k: usize,
    resolution: usize,
    constraint: Option<PolicySpec>,
) -> Result<RegionBoundary> {
    Region::new(scenario)?.sweep_boundary(k, resolution, constraint)
}
