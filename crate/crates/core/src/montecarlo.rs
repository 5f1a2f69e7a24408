//! Monte Carlo estimates of finite-time survival.
//!
//! Paths are split into fixed chunks of [`CHUNK_PATHS`]; chunk `c` draws from
//! a ChaCha8 stream seeded with `seed` on stream `c`, so results do not depend
//! on the number of worker threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::model::RiskModel;

pub const RNG_ID: &str = "chacha8";
pub const CHUNK_PATHS: u64 = 65_536;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    pub paths: u64,
    /// Horizon in periods.
    pub horizon: usize,
    pub seed: u64,
    pub u: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidArgument("paths must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub half_width_95: f64,
    pub paths: u64,
}

impl Estimate {
    pub fn from_count(survived: u64, paths: u64) -> Self {
        let p_hat = survived as f64 / paths as f64;
        Estimate {
            p_hat,
            half_width_95: Z95 * (p_hat * (1.0 - p_hat) / paths as f64).sqrt(),
            paths,
        }
    }

    /// Normal-approximation half width at quantile `z`.
    pub fn half_width(&self, z: f64) -> f64 {
        z * (self.p_hat * (1.0 - self.p_hat) / self.paths as f64).sqrt()
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.p_hat - self.half_width_95, self.p_hat + self.half_width_95)
    }

    /// Wilson score interval at quantile `z`; never degenerate at `p_hat ∈ {0, 1}`.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        let n = self.paths as f64;
        let z2 = z * z;
        let center = (self.p_hat + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = z / (1.0 + z2 / n) * (self.p_hat * (1.0 - self.p_hat) / n + z2 / (4.0 * n * n)).sqrt();
        ((center - half).max(0.0), (center + half).min(1.0))
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Cdf(Vec<f64>),
    Poisson { lambda: f64, shift: usize, p0: f64 },
}

impl Sampler {
    fn new(d: &DiscreteDist) -> Result<Self> {
        match d {
            DiscreteDist::FiniteTable { probs } => {
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Ok(Sampler::Cdf(cdf))
            }
            DiscreteDist::DisplacedPoisson { lambda, shift } => {
                let p0 = (-lambda).exp();
                if p0 == 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "Poisson rate {lambda} is too large for sequential inversion"
                    )));
                }
                Ok(Sampler::Poisson {
                    lambda: *lambda,
                    shift: *shift,
                    p0,
                })
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let v: f64 = rng.gen();
        match self {
            Sampler::Cdf(cdf) => cdf.iter().position(|&c| v < c).unwrap_or(cdf.len() - 1),
            Sampler::Poisson { lambda, shift, p0 } => {
                let mut k = 0usize;
                let mut p = *p0;
                let mut f = p;
                while v >= f {
                    k += 1;
                    p *= lambda / k as f64;
                    if p == 0.0 && k as f64 > *lambda {
                        break;
                    }
                    f += p;
                }
                shift + k
            }
        }
    }
}

/// Per-season samplers for one model.
#[derive(Debug, Clone)]
pub struct PathSampler {
    kappa: i64,
    seasons: Vec<Sampler>,
}

impl PathSampler {
    pub fn new(model: &RiskModel) -> Result<Self> {
        Ok(PathSampler {
            kappa: model.kappa as i64,
            seasons: model.seasons.iter().map(Sampler::new).collect::<Result<_>>()?,
        })
    }

    /// Claim of period `n` (1-based).
    pub fn claim<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> usize {
        self.seasons[(n - 1) % self.seasons.len()].sample(rng)
    }

    /// First period `n ≤ horizon` with `W(n) ≤ 0`, if any.
    pub fn ruin_time<R: Rng + ?Sized>(&self, u: usize, horizon: usize, rng: &mut R) -> Option<usize> {
        let mut w = u as i64;
        for n in 1..=horizon {
            w += self.kappa - self.claim(n, rng) as i64;
            if w <= 0 {
                return Some(n);
            }
        }
        None
    }
}

/// One path of `W`: true iff `W(n) > 0` for `n = 1..=horizon`.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &RiskModel,
    u: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<bool> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    Ok(PathSampler::new(model)?.ruin_time(u, horizon, rng).is_none())
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn ruin_histogram(model: &RiskModel, u: usize, horizon: usize, paths: u64, seed: u64) -> Result<Vec<u64>> {
    let sampler = PathSampler::new(model)?;
    let chunks = paths.div_ceil(CHUNK_PATHS);
    let hist = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let n = CHUNK_PATHS.min(paths - c * CHUNK_PATHS);
            let mut h = vec![0u64; horizon + 1];
            for _ in 0..n {
                match sampler.ruin_time(u, horizon, &mut rng) {
                    Some(t) => h[t - 1] += 1,
                    None => h[horizon] += 1,
                }
            }
            h
        })
        .reduce(
            || vec![0u64; horizon + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(hist)
}

/// Fraction of `cfg.paths` paths surviving `cfg.horizon` periods.
pub fn estimate_survival(model: &RiskModel, cfg: &SimConfig) -> Result<Estimate> {
    cfg.validate()?;
    let hist = ruin_histogram(model, cfg.u, cfg.horizon, cfg.paths, cfg.seed)?;
    Ok(Estimate::from_count(hist[cfg.horizon], cfg.paths))
}

/// Survival estimates for every horizon `1..=cfg.horizon` from one set of paths.
pub fn estimate_survival_curve(model: &RiskModel, cfg: &SimConfig) -> Result<Vec<Estimate>> {
    cfg.validate()?;
    let hist = ruin_histogram(model, cfg.u, cfg.horizon, cfg.paths, cfg.seed)?;
    let mut survived = cfg.paths;
    Ok(hist[..cfg.horizon]
        .iter()
        .map(|&ruined| {
            survived -= ruined;
            Estimate::from_count(survived, cfg.paths)
        })
        .collect())
}

/// Horizon used to approximate ultimate survival: `100·N` periods.
pub fn default_ultimate_horizon(model: &RiskModel) -> usize {
    100 * model.n_seasons()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrajectoryPoint {
    pub n: usize,
    /// 1-based season of period `n`; 0 at the start.
    pub season: usize,
    pub claim: usize,
    pub surplus: i64,
}

/// One path `W(0..=n)` drawn from stream 0 of `seed`.
pub fn trajectory(model: &RiskModel, u: usize, n: usize, seed: u64) -> Result<Vec<TrajectoryPoint>> {
    let sampler = PathSampler::new(model)?;
    let mut rng = chunk_rng(seed, 0);
    let mut w = u as i64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(TrajectoryPoint {
        n: 0,
        season: 0,
        claim: 0,
        surplus: w,
    });
    for t in 1..=n {
        let x = sampler.claim(t, &mut rng);
        w += model.kappa as i64 - x as i64;
        out.push(TrajectoryPoint {
            n: t,
            season: (t - 1) % model.n_seasons() + 1,
            claim: x,
            surplus: w,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let safe = RiskModel::new(1, vec![DiscreteDist::degenerate(0)]).unwrap();
        let doomed = RiskModel {
            kappa: 1,
            seasons: vec![DiscreteDist::degenerate(2)],
            name: None,
            description: None,
        };
        for _ in 0..100 {
            assert!(simulate_path(&safe, 0, 50, &mut rng).unwrap());
            assert!(!simulate_path(&doomed, 0, 50, &mut rng).unwrap());
        }
        assert!(simulate_path(&safe, 0, 0, &mut rng).is_err());
    }

    #[test]
    fn single_path_estimate() {
        let m = RiskModel::new(
            2,
            vec![
                DiscreteDist::poisson(1.0, 0).unwrap(),
                DiscreteDist::poisson(2.0, 0).unwrap(),
            ],
        )
        .unwrap();
        let cfg = SimConfig {
            paths: 1,
            horizon: 4,
            seed: 9,
            u: 1,
        };
        let e = estimate_survival(&m, &cfg).unwrap();
        assert!(e.p_hat == 0.0 || e.p_hat == 1.0);
        assert_eq!(e.half_width_95, 0.0);
    }

    #[test]
    fn deterministic_and_chunk_consistent() {
        let m = RiskModel::new(
            2,
            vec![
                DiscreteDist::poisson(1.0, 0).unwrap(),
                DiscreteDist::poisson(2.0, 0).unwrap(),
            ],
        )
        .unwrap();
        let cfg = SimConfig {
            paths: 150_000,
            horizon: 8,
            seed: 42,
            u: 2,
        };
        let a = estimate_survival(&m, &cfg).unwrap();
        let b = estimate_survival(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let curve = estimate_survival_curve(&m, &cfg).unwrap();
        assert_eq!(curve[7], a);
        assert!(curve.windows(2).all(|w| w[0].p_hat >= w[1].p_hat));
    }

    #[test]
    fn poisson_sampler_mean() {
        let s = Sampler::new(&DiscreteDist::poisson(3.5, 2).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mean = (0..n).map(|_| s.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 5.5).abs() < 0.02);
    }

    #[test]
    fn trajectory_tracks_surplus() {
        let m = RiskModel::new(
            3,
            vec![
                DiscreteDist::table(vec![0.4096, 0.4096, 0.1536, 0.0256, 0.0016]).unwrap(),
                DiscreteDist::table(vec![0.04, 0.32, 0.64]).unwrap(),
            ],
        )
        .unwrap();
        let path = trajectory(&m, 5, 10, 1).unwrap();
        assert_eq!(path.len(), 11);
        for w in path.windows(2) {
            assert_eq!(w[1].surplus, w[0].surplus + 3 - w[1].claim as i64);
        }
        assert_eq!(path, trajectory(&m, 5, 10, 1).unwrap());
    }
}
