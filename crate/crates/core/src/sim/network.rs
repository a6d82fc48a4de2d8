use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal, Poisson};

use super::{BoundaryMode, SimConfig};
use crate::error::{Error, Result};
use crate::model::{AvailabilityVector, NetworkScenario};

pub type Point = [f64; 2];

/// One draw of the ON BSs (per tier) and the users in the window.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub side: f64,
    pub boundary: BoundaryMode,
    pub tiers: Vec<Vec<Point>>,
    pub users: Vec<Point>,
}

/// A user's serving BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Serving {
    pub tier: usize,
    pub index: usize,
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn uniform_points<R: Rng + ?Sized>(count: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<Point> {
    (0..count)
        .map(|_| [rng.random_range(lo..hi), rng.random_range(lo..hi)])
        .collect()
}

/// Samples the thinned per-tier PPPs (density `rho_k lambda_k`) and the user PPP.
pub fn sample_network<R: Rng + ?Sized>(
    scenario: &NetworkScenario,
    rho: &AvailabilityVector,
    config: &SimConfig,
    rng: &mut R,
) -> Realization {
    let side = config.window_side;
    let area = side * side;
    let tiers = scenario
        .tiers
        .iter()
        .zip(rho.as_slice())
        .map(|(t, &r)| {
            let n = poisson_count(r * t.density * area, rng);
            uniform_points(n, 0.0, side, rng)
        })
        .collect();
    let users = uniform_points(poisson_count(scenario.user_density * area, rng), 0.0, side, rng);
    Realization {
        side,
        boundary: config.boundary,
        tiers,
        users,
    }
}

impl Realization {
    pub(crate) fn dist2(&self, a: Point, b: Point) -> f64 {
        let mut dx = (a[0] - b[0]).abs();
        let mut dy = (a[1] - b[1]).abs();
        if self.boundary == BoundaryMode::Toroidal {
            dx = dx.min(self.side - dx);
            dy = dy.min(self.side - dy);
        }
        dx * dx + dy * dy
    }

    /// Whether measurements at `p` count (always, unless inside the guard band).
    pub(crate) fn in_measurement_zone(&self, p: Point) -> bool {
        match self.boundary {
            BoundaryMode::Toroidal => true,
            BoundaryMode::Guard { margin } => {
                let hi = self.side - margin;
                p[0] >= margin && p[0] <= hi && p[1] >= margin && p[1] <= hi
            }
        }
    }

    pub(crate) fn measurement_bounds(&self) -> (f64, f64) {
        match self.boundary {
            BoundaryMode::Toroidal => (0.0, self.side),
            BoundaryMode::Guard { margin } => (margin, self.side - margin),
        }
    }

    pub fn bs_count(&self) -> usize {
        self.tiers.iter().map(Vec::len).sum()
    }
}

/// Per-tier link-gain sampler: lognormal shadowing and the path-loss law.
pub(crate) struct LinkModel {
    power: Vec<f64>,
    shadow: Vec<Option<Normal<f64>>>,
    half_alpha: f64,
}

impl LinkModel {
    pub(crate) fn new(scenario: &NetworkScenario) -> Self {
        LinkModel {
            power: scenario.tiers.iter().map(|t| t.tx_power).collect(),
            shadow: scenario
                .tiers
                .iter()
                .map(|t| {
                    let s = t.shadowing;
                    (!s.is_degenerate()).then(|| Normal::new(s.mean_db, s.std_db).expect("valid shadowing"))
                })
                .collect(),
            half_alpha: scenario.path_loss_exp / 2.0,
        }
    }

    /// Long-term received power `P X d^-alpha` with a fresh shadowing draw.
    #[inline]
    pub(crate) fn mean_power<R: Rng + ?Sized>(&self, tier: usize, dist2: f64, rng: &mut R) -> f64 {
        let gain = match &self.shadow[tier] {
            Some(n) => 10f64.powf(n.sample(rng) / 10.0),
            None => 1.0,
        };
        let path = if self.half_alpha == 2.0 {
            1.0 / (dist2 * dist2)
        } else {
            dist2.powf(-self.half_alpha)
        };
        self.power[tier] * gain * path
    }
}

/// Outcome of evaluating every link of one user.
#[derive(Debug, Clone, Copy)]
pub(crate) struct UserLinks {
    pub serving: Serving,
    pub sir: f64,
}

/// Picks the strongest long-term link and, when `fading` is set, also the SIR
/// under unit-mean Rayleigh fading with every other ON BS interfering.
pub(crate) fn evaluate_user<R: Rng + ?Sized>(
    net: &Realization,
    links: &LinkModel,
    user: Point,
    fading: bool,
    rng: &mut R,
) -> Option<UserLinks> {
    let mut best = f64::NEG_INFINITY;
    let mut best_rx = 0.0;
    let mut serving = None;
    let mut total = 0.0;
    for (tier, points) in net.tiers.iter().enumerate() {
        for (index, &bs) in points.iter().enumerate() {
            let avg = links.mean_power(tier, net.dist2(user, bs), rng);
            let rx = if fading {
                let h: f64 = Exp1.sample(rng);
                avg * h
            } else {
                avg
            };
            total += rx;
            if avg > best {
                best = avg;
                best_rx = rx;
                serving = Some(Serving { tier, index });
            }
        }
    }
    serving.map(|serving| {
        let interference = (total - best_rx).max(0.0);
        UserLinks {
            serving,
            sir: if interference > 0.0 { best_rx / interference } else { f64::INFINITY },
        }
    })
}

/// Maps every user of `realization` to the BS with the highest long-term
/// received power, drawing shadowing independently per link.
pub fn associate<R: Rng + ?Sized>(
    realization: &Realization,
    scenario: &NetworkScenario,
    rng: &mut R,
) -> Result<Vec<Serving>> {
    if realization.bs_count() == 0 {
        return Err(Error::EmptyNetwork);
    }
    let links = LinkModel::new(scenario);
    Ok(realization
        .users
        .iter()
        .map(|&u| evaluate_user(realization, &links, u, false, rng).expect("non-empty").serving)
        .collect())
}
