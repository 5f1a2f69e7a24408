mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seasonal_ruin::dist::DiscreteDist;
use seasonal_ruin::montecarlo::{estimate_survival, simulate_path, SimConfig};
use seasonal_ruin::survival::finite_survival;

use common::*;

fn cfg(u: usize, horizon: usize, paths: u64, seed: u64) -> SimConfig {
    SimConfig {
        paths,
        horizon,
        seed,
        u,
    }
}

#[test]
fn table_five_cell_within_ci() {
    let e = estimate_survival(&fixture("example4"), &cfg(0, 10, 1_000_000, 5)).unwrap();
    // the reference value carries up to 1e-3 of rounding
    assert!((e.p_hat - 0.235).abs() <= e.half_width_95 + 1e-3, "{e:?}");
}

#[test]
fn long_horizon_approaches_ultimate() {
    let e = estimate_survival(&fixture("example1"), &cfg(5, 200, 1_000_000, 6)).unwrap();
    assert!((e.p_hat - 0.958).abs() <= e.half_width_95 + 5e-3, "{e:?}");
    assert!(e.p_hat >= 0.958 - e.half_width_95 - 1e-3);
}

/// Survival for `u = 2`, two periods of Example 1: `X_1 ≤ 3` and `X_1 + X_2 ≤ 5`.
#[test]
fn two_period_constraint_set() {
    let m = fixture("example1");
    let x1 = DiscreteDist::poisson(1.0, 0).unwrap();
    let x2 = DiscreteDist::poisson(2.0, 0).unwrap();
    let exact: f64 = (0..=3).map(|a| x1.pmf(a) * x2.cdf(5 - a as i64)).sum();
    let grid = finite_survival(&m, 2, 2).unwrap();
    assert!((grid.get(2, 2) - exact).abs() < 1e-14);
    let e = estimate_survival(&m, &cfg(2, 2, 1_000_000, 8)).unwrap();
    let (lo, hi) = e.wilson(Z99);
    assert!(lo <= exact && exact <= hi, "{e:?} vs {exact}");
}

#[test]
fn fixtures_inside_monte_carlo_ci() {
    let mut cells = 0;
    let mut misses = Vec::new();
    for (k, name) in FIXTURES.iter().enumerate() {
        let m = fixture(name);
        let grid = finite_survival(&m, 3, 20).unwrap();
        for u in [0, 3] {
            for t in 1..=20 {
                let seed = 10_000 + (k * 100 + u * 20 + t) as u64;
                let e = estimate_survival(&m, &cfg(u, t, 1_000_000, seed)).unwrap();
                let (lo, hi) = e.wilson(Z99);
                let v = grid.get(u, t);
                cells += 1;
                if v < lo || v > hi {
                    misses.push(format!("{name} u={u} T={t}: {v} vs {:.6}", e.p_hat));
                }
            }
        }
    }
    let allowed = binomial_quantile(cells, 0.01, 0.999);
    assert!(
        misses.len() <= allowed,
        "{} misses of {cells} (allowed {allowed}): {misses:?}",
        misses.len()
    );
}

#[test]
fn paired_seeds_decrease_in_horizon() {
    let m = fixture("example2");
    for seed in 0..5 {
        let short = estimate_survival(&m, &cfg(4, 5, 200_000, seed)).unwrap();
        let long = estimate_survival(&m, &cfg(4, 25, 200_000, seed)).unwrap();
        assert!(long.p_hat <= short.p_hat + short.half_width_95 + long.half_width_95);
    }
}

#[test]
fn same_seed_same_estimate() {
    let m = fixture("example3");
    let a = estimate_survival(&m, &cfg(0, 30, 300_000, 99)).unwrap();
    let b = estimate_survival(&m, &cfg(0, 30, 300_000, 99)).unwrap();
    let c = estimate_survival(&m, &cfg(0, 30, 300_000, 100)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.p_hat, c.p_hat);
}

#[test]
fn degenerate_fixture_paths() {
    let m = fixture("degenerate");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(!simulate_path(&m, 0, 5, &mut rng).unwrap());
    assert!(simulate_path(&m, 1, 500, &mut rng).unwrap());
}

#[test]
fn invalid_configs_rejected() {
    let m = fixture("example1");
    assert!(estimate_survival(&m, &cfg(0, 0, 10, 0)).is_err());
    assert!(estimate_survival(&m, &cfg(0, 5, 0, 0)).is_err());
}
