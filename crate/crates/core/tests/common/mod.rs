#![allow(dead_code)]

use std::path::PathBuf;

use seasonal_ruin::io::parse_model;
use seasonal_ruin::random::{random_model, RandomModelSpec};
use seasonal_ruin::{DiscreteDist, RiskModel};

pub const FIXTURES: [&str; 7] = [
    "example1",
    "example2",
    "example3",
    "example4",
    "supercritical",
    "critical",
    "degenerate",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> RiskModel {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_model(&text).unwrap()
}

pub fn random_models(seed: u64, count: usize, spec: &RandomModelSpec) -> Vec<RiskModel> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_model(&mut rng, spec)).collect()
}

/// Brute-force `P(W(n) > 0, n = 1..=horizon)` over every claim sequence of a finite-table model.
pub fn enumerate_survival(model: &RiskModel, u: usize, horizon: usize) -> f64 {
    fn go(tables: &[Vec<f64>], kappa: i64, w: i64, n: usize, horizon: usize, p: f64) -> f64 {
        if n > horizon {
            return p;
        }
        let t = &tables[(n - 1) % tables.len()];
        let mut acc = 0.0;
        for (x, &px) in t.iter().enumerate() {
            let next = w + kappa - x as i64;
            if px > 0.0 && next > 0 {
                acc += go(tables, kappa, next, n + 1, horizon, p * px);
            }
        }
        acc
    }
    let tables: Vec<Vec<f64>> = model
        .seasons
        .iter()
        .map(|d| match d {
            DiscreteDist::FiniteTable { probs } => probs.clone(),
            _ => panic!("enumeration needs finite tables"),
        })
        .collect();
    go(&tables, model.kappa as i64, u as i64, 1, horizon, 1.0)
}

/// Smallest `k` with `P(Binomial(n, p) ≤ k) ≥ q`.
pub fn binomial_quantile(n: usize, p: f64, q: f64) -> usize {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut cdf = pmf;
    let mut k = 0;
    while cdf < q && k < n {
        pmf *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
        k += 1;
        cdf += pmf;
    }
    k
}

/// Two-sided normal quantile for 99% coverage.
pub const Z99: f64 = 2.575_829_303_548_901;
