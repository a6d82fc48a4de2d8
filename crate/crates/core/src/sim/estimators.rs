use rand::Rng;

use super::network::{evaluate_user, sample_network, LinkModel, Point};
use super::{run_replicates, SimConfig, SimEstimate};
use crate::error::{Error, Result};
use crate::model::{validate, AvailabilityVector, NetworkScenario};

/// Redraws allowed for a replicate whose realization lacks the BSs it needs.
const MAX_REDRAWS: usize = 1000;

fn check_inputs(scenario: &NetworkScenario, rho: &AvailabilityVector, config: &SimConfig) -> Result<()> {
    validate(scenario)?;
    config.validate()?;
    if rho.len() != scenario.num_tiers() {
        return Err(Error::invalid("rho", None, "availability vector length must match tier count"));
    }
    let active = scenario
        .tiers
        .iter()
        .zip(rho.as_slice())
        .any(|(t, r)| r * t.density > 0.0);
    if !active {
        return Err(Error::NoBsAvailable);
    }
    Ok(())
}

fn probe_points<R: Rng + ?Sized>(lo: f64, hi: f64, count: usize, rng: &mut R) -> Vec<Point> {
    (0..count)
        .map(|_| [rng.random_range(lo..hi), rng.random_range(lo..hi)])
        .collect()
}

/// Mean service-region area of a tier-k BS: window area times the fraction of
/// probe points served by tier k, divided by the number of tier-k BSs.
///
/// Areas and counts are pooled over replicates before dividing; the mean of
/// per-replicate ratios is biased upward by about `1 / E[count]`.
///
/// Returns the estimate and the number of replicates that had to be redrawn
/// because they contained no tier-k BS.
pub fn service_area_mc(
    scenario: &NetworkScenario,
    rho: &AvailabilityVector,
    k: usize,
    config: &SimConfig,
) -> Result<(SimEstimate, usize)> {
    check_inputs(scenario, rho, config)?;
    let tier = scenario.tier(k)?;
    if rho[k] * tier.density <= 0.0 {
        return Err(Error::invalid("rho", Some(k), "tier has no available BSs"));
    }
    let links = LinkModel::new(scenario);
    let results = run_replicates(config, |_, rng| {
        let mut redraws = 0;
        loop {
            let net = sample_network(scenario, rho, config, rng);
            let (lo, hi) = net.measurement_bounds();
            let owned = net.tiers[k].iter().filter(|&&p| net.in_measurement_zone(p)).count();
            if owned == 0 && redraws < MAX_REDRAWS {
                redraws += 1;
                continue;
            }
            let probes = probe_points(lo, hi, config.probes, rng);
            let hits = probes
                .iter()
                .filter(|&&z| evaluate_user(&net, &links, z, false, rng).is_some_and(|u| u.serving.tier == k))
                .count();
            let area = (hi - lo) * (hi - lo);
            return (area * hits as f64 / config.probes as f64, owned as f64, redraws);
        }
    });
    let areas: Vec<f64> = results.iter().map(|r| r.0).collect();
    let counts: Vec<f64> = results.iter().map(|r| r.1).collect();
    let redraws = results.iter().map(|r| r.2).sum();
    Ok((SimEstimate::from_ratio(&areas, &counts, config.seed), redraws))
}

/// Fraction of probe users associated with each tier.
pub fn association_mc(
    scenario: &NetworkScenario,
    rho: &AvailabilityVector,
    config: &SimConfig,
) -> Result<Vec<SimEstimate>> {
    check_inputs(scenario, rho, config)?;
    let links = LinkModel::new(scenario);
    let kk = scenario.num_tiers();
    let per_replicate = run_replicates(config, |_, rng| {
        let mut net = sample_network(scenario, rho, config, rng);
        while net.bs_count() == 0 {
            net = sample_network(scenario, rho, config, rng);
        }
        let (lo, hi) = net.measurement_bounds();
        let mut counts = vec![0usize; kk];
        for z in probe_points(lo, hi, config.probes, rng) {
            if let Some(u) = evaluate_user(&net, &links, z, false, rng) {
                counts[u.serving.tier] += 1;
            }
        }
        counts
            .into_iter()
            .map(|c| c as f64 / config.probes as f64)
            .collect::<Vec<_>>()
    });
    Ok((0..kk)
        .map(|k| {
            let v: Vec<f64> = per_replicate.iter().map(|r| r[k]).collect();
            SimEstimate::from_samples(&v, config.seed)
        })
        .collect())
}

/// Fraction of typical users whose SIR at the strongest long-term link exceeds
/// the target, with per-link Rayleigh fading and lognormal shadowing.
pub fn coverage_mc(scenario: &NetworkScenario, rho: &AvailabilityVector, config: &SimConfig) -> Result<SimEstimate> {
    check_inputs(scenario, rho, config)?;
    let links = LinkModel::new(scenario);
    let beta = scenario.sir_target;
    let values = run_replicates(config, |_, rng| {
        let mut net = sample_network(scenario, rho, config, rng);
        while net.bs_count() == 0 {
            net = sample_network(scenario, rho, config, rng);
        }
        let (lo, hi) = net.measurement_bounds();
        let covered = probe_points(lo, hi, config.probes, rng)
            .into_iter()
            .filter(|&z| evaluate_user(&net, &links, z, true, rng).is_some_and(|u| u.sir > beta))
            .count();
        covered as f64 / config.probes as f64
    });
    Ok(SimEstimate::from_samples(&values, config.seed))
}

/// Empirical `P(R > T)` with `R = log2(1 + SIR) / Psi`, where `Psi` counts the
/// tagged user plus every other covered user sharing its BS.
///
/// All users of the realization are evaluated; only those inside the
/// measurement zone contribute to the estimate.
pub fn rate_mc(
    scenario: &NetworkScenario,
    rho: &AvailabilityVector,
    rate_target: f64,
    config: &SimConfig,
) -> Result<SimEstimate> {
    check_inputs(scenario, rho, config)?;
    if !(rate_target >= 0.0) {
        return Err(Error::invalid("rate_target", None, "must be non-negative"));
    }
    let links = LinkModel::new(scenario);
    let beta = scenario.sir_target;
    let values = run_replicates(config, |_, rng| {
        for _ in 0..MAX_REDRAWS {
            let net = sample_network(scenario, rho, config, rng);
            if net.bs_count() == 0 {
                continue;
            }
            let outcomes: Vec<_> = net
                .users
                .iter()
                .map(|&u| evaluate_user(&net, &links, u, true, rng).expect("non-empty"))
                .collect();
            let mut load: Vec<Vec<usize>> = net.tiers.iter().map(|t| vec![0; t.len()]).collect();
            for o in &outcomes {
                if o.sir > beta {
                    load[o.serving.tier][o.serving.index] += 1;
                }
            }
            let mut tagged = 0usize;
            let mut above = 0usize;
            for (user, o) in net.users.iter().zip(&outcomes) {
                if !net.in_measurement_zone(*user) {
                    continue;
                }
                tagged += 1;
                let others = load[o.serving.tier][o.serving.index] - usize::from(o.sir > beta);
                let rate = (1.0 + o.sir).log2() / (others + 1) as f64;
                if rate > rate_target {
                    above += 1;
                }
            }
            if tagged > 0 {
                return above as f64 / tagged as f64;
            }
        }
        f64::NAN
    });
    Ok(SimEstimate::from_samples(&values, config.seed))
}
