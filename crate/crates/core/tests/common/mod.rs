#![allow(dead_code)]

pub mod props;

use edgedim::dimensioning::Scenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Scenarios drawn around the default parameter set.
pub fn random_scenarios(n: usize, seed: u64) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Scenario {
            radius_km: log_uniform(&mut rng, 0.25, 2.0),
            traffic_density: log_uniform(&mut rng, 2.0, 30.0),
            deadline_s: rng.random_range(0.3..0.8),
            omega_min: rng.random_range(0.7..0.9),
            a_min: rng.random_range(0.85..0.92),
            beta1: rng.random_range(0.3..0.7),
            ..Default::default()
        })
        .collect()
}

pub fn radius_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
