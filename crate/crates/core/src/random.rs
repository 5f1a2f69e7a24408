//! Random finite-table models for probes and property tests.

use rand::Rng;

use crate::dist::DiscreteDist;
use crate::model::{net_profit_margin, RiskModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelSpec {
    pub kappa_max: usize,
    pub n_max: usize,
    /// Largest claim value a season can take.
    pub max_claim: usize,
    /// Force `P(X_j = 0) > 0` in every season.
    pub positive_zero_mass: bool,
}

/// Random probability table on `0..=len-1` with every entry positive.
pub fn random_table<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DiscreteDist {
    let w: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
    // push the rounding residue into the largest cell
    let resid = 1.0 - probs.iter().sum::<f64>();
    let (imax, _) = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    probs[imax] += resid;
    DiscreteDist::FiniteTable { probs }
}

/// Rejection-samples a net-profit model.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, spec: &RandomModelSpec) -> RiskModel {
    loop {
        let kappa = rng.gen_range(1..=spec.kappa_max);
        let n = rng.gen_range(1..=spec.n_max);
        let seasons: Vec<DiscreteDist> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=spec.max_claim + 1);
                let t = random_table(rng, len);
                if spec.positive_zero_mass || rng.gen_bool(0.6) {
                    t
                } else {
                    let DiscreteDist::FiniteTable { mut probs } = t else {
                        unreachable!()
                    };
                    let shift = rng.gen_range(1..=kappa);
                    let mut shifted = vec![0.0; shift];
                    shifted.append(&mut probs);
                    DiscreteDist::FiniteTable { probs: shifted }
                }
            })
            .collect();
        let model = RiskModel {
            kappa,
            seasons,
            name: None,
            description: None,
        };
        if net_profit_margin(&model) > 1e-3 && model.validate().is_ok() {
            return model;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_models_are_valid_and_profitable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = RandomModelSpec {
            kappa_max: 3,
            n_max: 4,
            max_claim: 5,
            positive_zero_mass: false,
        };
        for _ in 0..200 {
            let m = random_model(&mut rng, &spec);
            assert!(m.validate().is_ok());
            assert!(net_profit_margin(&m) > 0.0);
            assert!(m.kappa <= 3 && m.n_seasons() <= 4);
        }
    }
}
