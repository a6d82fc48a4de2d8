use hetnet_core::model::{AvailabilityVector, NetworkScenario, ShadowingSpec, TierParams};
use hetnet_core::sim::{
    associate, association_mc, coverage_mc, rate_mc, sample_network, service_area_mc, BoundaryMode, SimConfig,
    SimEstimate,
};
use hetnet_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tier(density: f64, tx_power: f64) -> TierParams {
    TierParams {
        density,
        tx_power,
        harvest_rate: 1.0,
        battery: 5,
        shadowing: ShadowingSpec::NONE,
    }
}

fn net(tiers: Vec<TierParams>) -> NetworkScenario {
    NetworkScenario {
        tiers,
        user_density: 5.0,
        path_loss_exp: 4.0,
        sir_target: 1.0,
    }
}

fn rho(v: &[f64]) -> AvailabilityVector {
    AvailabilityVector::new(v.to_vec()).unwrap()
}

#[test]
fn identical_seeds_give_identical_estimates() {
    let s = net(vec![tier(1.0, 1.0), tier(4.0, 0.1)]);
    let r = rho(&[0.8, 0.5]);
    let mut cfg = SimConfig::new(8.0, 6, 99);
    cfg.probes = 300;
    let a = coverage_mc(&s, &r, &cfg).unwrap();
    let b = coverage_mc(&s, &r, &cfg).unwrap();
    assert_eq!(a, b);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let c = single.install(|| coverage_mc(&s, &r, &cfg).unwrap());
    assert_eq!(a, c);
    cfg.seed = 100;
    assert_ne!(coverage_mc(&s, &r, &cfg).unwrap().mean, a.mean);
}

#[test]
fn thinned_counts_are_poisson() {
    let s = net(vec![tier(2.0, 1.0), tier(3.0, 1.0)]);
    let r = rho(&[0.5, 0.0]);
    let cfg = SimConfig::new(5.0, 1, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 4000;
    let mut counts = Vec::with_capacity(draws);
    for _ in 0..draws {
        let real = sample_network(&s, &r, &cfg, &mut rng);
        assert!(real.tiers[1].is_empty());
        assert!(real.tiers[0].iter().all(|p| (0.0..5.0).contains(&p[0]) && (0.0..5.0).contains(&p[1])));
        counts.push(real.tiers[0].len() as f64);
    }
    let est = SimEstimate::from_samples(&counts, 7);
    assert!(est.covers(25.0), "{est:?}");
    let var = counts.iter().map(|c| (c - est.mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    assert!((var / 25.0 - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn association_edge_cases() {
    let s = net(vec![tier(1.0, 1.0)]);
    let cfg = SimConfig::new(10.0, 1, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut real = sample_network(&s, &rho(&[1.0]), &cfg, &mut rng);

    // Equal powers and no shadowing: nearest BS in the torus metric.
    let serving = associate(&real, &s, &mut rng).unwrap();
    for (u, sv) in real.users.iter().zip(&serving) {
        let d = |p: &[f64; 2]| {
            let dx = (u[0] - p[0]).abs().min(10.0 - (u[0] - p[0]).abs());
            let dy = (u[1] - p[1]).abs().min(10.0 - (u[1] - p[1]).abs());
            dx * dx + dy * dy
        };
        let nearest = (0..real.tiers[0].len())
            .min_by(|&a, &b| d(&real.tiers[0][a]).total_cmp(&d(&real.tiers[0][b])))
            .unwrap();
        assert_eq!(sv.index, nearest);
    }

    real.tiers[0].truncate(1);
    assert!(associate(&real, &s, &mut rng).unwrap().iter().all(|sv| sv.index == 0 && sv.tier == 0));

    real.tiers[0].clear();
    assert_eq!(associate(&real, &s, &mut rng), Err(Error::EmptyNetwork));
}

#[test]
fn single_tier_cell_area_is_inverse_density() {
    let s = net(vec![tier(2.0, 1.0)]);
    let cfg = SimConfig::new(10.0, 40, 11);
    let (est, redraws) = service_area_mc(&s, &rho(&[1.0]), 0, &cfg).unwrap();
    assert_eq!(redraws, 0);
    assert!(est.covers(0.5), "{est:?}");
    assert!(est.ci_halfwidth_99 < 0.02);
}

#[test]
fn symmetric_tiers_have_equal_areas() {
    let s = net(vec![tier(1.0, 1.0), tier(1.0, 1.0)]);
    let r = rho(&[1.0, 1.0]);
    let cfg = SimConfig::new(12.0, 40, 5);
    let a = service_area_mc(&s, &r, 0, &cfg).unwrap().0;
    let b = service_area_mc(&s, &r, 1, &cfg).unwrap().0;
    assert!((a.mean - b.mean).abs() <= a.ci_halfwidth_99 + b.ci_halfwidth_99);
    assert!(a.covers(0.5) && b.covers(0.5));
}

#[test]
fn association_fractions_track_weights() {
    // No shadowing, alpha = 4: tier k attracts rho_k lambda_k sqrt(P_k) / sum.
    let s = net(vec![tier(1.0, 1.0), tier(10.0, 0.01)]);
    let r = rho(&[1.0, 0.5]);
    let cfg = SimConfig::new(12.0, 30, 1);
    let est = association_mc(&s, &r, &cfg).unwrap();
    let first = 1.0 / (1.0 + 0.5);
    assert!(est[0].covers(first), "{:?}", est[0]);
    assert!(est[1].covers(1.0 - first), "{:?}", est[1]);
}

#[test]
fn coverage_matches_the_constant() {
    let s = net(vec![tier(1.0, 1.0), tier(5.0, 0.1)]);
    let mut cfg = SimConfig::new(12.0, 40, 2);
    cfg.probes = 1000;
    let pc = 1.0 / (1.0 + std::f64::consts::FRAC_PI_4);
    let a = coverage_mc(&s, &rho(&[1.0, 1.0]), &cfg).unwrap();
    let b = coverage_mc(&s, &rho(&[0.3, 0.9]), &cfg).unwrap();
    assert!((a.mean - pc).abs() < 0.01, "{a:?}");
    assert!((b.mean - pc).abs() < 0.01, "{b:?}");
    assert!((a.mean - b.mean).abs() < a.ci_halfwidth_99 + b.ci_halfwidth_99);

    let mut loose = s.clone();
    loose.sir_target = 1e-9;
    assert!(coverage_mc(&loose, &rho(&[1.0, 1.0]), &cfg).unwrap().mean > 0.999);
}

#[test]
fn guard_band_agrees_with_torus() {
    let s = net(vec![tier(1.0, 1.0)]);
    let r = rho(&[1.0]);
    let side = 20.0;
    let torus = SimConfig::new(side, 30, 8);
    let mut guard = torus;
    guard.boundary = BoundaryMode::Guard { margin: 4.0 };
    let a = coverage_mc(&s, &r, &torus).unwrap();
    let b = coverage_mc(&s, &r, &guard).unwrap();
    assert!((a.mean - b.mean).abs() <= a.ci_halfwidth_99 + b.ci_halfwidth_99, "{a:?} {b:?}");
    let (c, _) = service_area_mc(&s, &r, 0, &guard).unwrap();
    assert!(c.covers(1.0), "{c:?}");
    guard.boundary = BoundaryMode::Guard { margin: 10.0 };
    assert!(coverage_mc(&s, &r, &guard).is_err());
}

#[test]
fn interval_shrinks_like_inverse_root() {
    let s = net(vec![tier(1.0, 1.0)]);
    let r = rho(&[1.0]);
    let widths: Vec<f64> = [16, 64, 256]
        .iter()
        .map(|&n| {
            let mut cfg = SimConfig::new(6.0, n, 21);
            cfg.probes = 200;
            coverage_mc(&s, &r, &cfg).unwrap().ci_halfwidth_99
        })
        .collect();
    for w in widths.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.4..2.8).contains(&ratio), "{widths:?}");
    }
}

#[test]
fn rate_edge_cases() {
    let s = net(vec![tier(1.0, 1.0), tier(2.0, 0.01)]);
    let r = rho(&[1.0, 1.0]);
    let cfg = SimConfig::new(6.0, 4, 4);
    assert_eq!(rate_mc(&s, &r, 0.0, &cfg).unwrap().mean, 1.0);
    let high = rate_mc(&s, &r, 50.0, &cfg).unwrap().mean;
    assert!(high < 1e-3);
    assert!(rate_mc(&s, &r, -1.0, &cfg).is_err());
    assert_eq!(rate_mc(&s, &rho(&[0.0, 0.0]), 0.1, &cfg), Err(Error::NoBsAvailable));
}

#[test]
fn denser_second_tier_raises_rate() {
    let r = rho(&[1.0, 1.0]);
    let mut cfg = SimConfig::new(6.0, 16, 9);
    cfg.probes = 1;
    let mut sparse = net(vec![tier(1.0, 1.0), tier(2.0, 0.01)]);
    sparse.user_density = 20.0;
    let mut dense = sparse.clone();
    dense.tiers[1].density = 20.0;
    let a = rate_mc(&sparse, &r, 0.1, &cfg).unwrap();
    let b = rate_mc(&dense, &r, 0.1, &cfg).unwrap();
    assert!(b.mean - b.ci_halfwidth_99 > a.mean + a.ci_halfwidth_99, "{a:?} {b:?}");
}
