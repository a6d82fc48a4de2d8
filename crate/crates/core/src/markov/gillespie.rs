//! Event-driven simulation of ON/OFF cycles for one BS.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{BirthDeathSpec, PolicySpec};
use crate::error::Result;
use crate::Z99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnOffEstimate {
    /// Fraction of simulated time spent ON.
    pub availability: f64,
    /// Half-width of the 99% interval of the ratio estimator.
    pub ci_halfwidth_99: f64,
    pub mean_on: f64,
    pub mean_off: f64,
    pub cycles: usize,
    pub seed: u64,
}

/// Simulates `cycles` complete ON/OFF periods under `policy`.
///
/// While ON the level moves up at rate `mu` (except at the full level) and down
/// at rate `nu`; reaching level 0 switches the BS OFF. While OFF only births
/// occur, and the BS switches back ON when the level reaches the cutoff.
pub fn simulate_on_off(spec: &BirthDeathSpec, policy: PolicySpec, cycles: usize, seed: u64) -> Result<OnOffEstimate> {
    policy.check(spec.battery)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let birth = Exp::new(spec.harvest_rate).expect("positive rate");
    let total_rate = spec.harvest_rate + spec.utilization_rate;
    let on_clock = Exp::new(total_rate).expect("positive rate");
    let death_only = Exp::new(spec.utilization_rate).expect("positive rate");
    let p_birth = spec.harvest_rate / total_rate;
    let n = spec.battery;

    let mut on_times = Vec::with_capacity(cycles);
    let mut off_times = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        let mut level = policy.cutoff;
        let mut on = 0.0;
        while level > 0 {
            if level == n {
                on += death_only.sample(&mut rng);
                level -= 1;
            } else {
                on += on_clock.sample(&mut rng);
                if rng.random::<f64>() < p_birth {
                    level += 1;
                } else {
                    level -= 1;
                }
            }
        }
        let off: f64 = (0..policy.cutoff).map(|_| birth.sample(&mut rng)).sum();
        on_times.push(on);
        off_times.push(off);
    }

    let count = cycles as f64;
    let sum_on: f64 = on_times.iter().sum();
    let sum_off: f64 = off_times.iter().sum();
    let availability = sum_on / (sum_on + sum_off);
    let mean_cycle = (sum_on + sum_off) / count;
    // Delta-method variance of the regenerative ratio estimator.
    let ss: f64 = on_times
        .iter()
        .zip(&off_times)
        .map(|(a, b)| {
            let d = a - availability * (a + b);
            d * d
        })
        .sum();
    let se = if cycles > 1 {
        (ss / (count - 1.0) / count).sqrt() / mean_cycle
    } else {
        f64::INFINITY
    };
    Ok(OnOffEstimate {
        availability,
        ci_halfwidth_99: Z99 * se,
        mean_on: sum_on / count,
        mean_off: sum_off / count,
        cycles,
        seed,
    })
}
