use crate::dist::DiscreteDist;
use crate::error::{Error, Result};

/// Premium rate `κ` per period and the seasonal claim laws `X_1..X_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskModel {
    pub kappa: usize,
    pub seasons: Vec<DiscreteDist>,
    pub name: Option<String>,
    pub description: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    NetProfit,
    Supercritical,
    CriticalNondegenerate,
    Degenerate,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::NetProfit => "NetProfit",
            Regime::Supercritical => "Supercritical",
            Regime::CriticalNondegenerate => "CriticalNondegenerate",
            Regime::Degenerate => "Degenerate",
        };
        f.write_str(s)
    }
}

impl RiskModel {
    pub fn new(kappa: usize, seasons: Vec<DiscreteDist>) -> Result<Self> {
        let m = RiskModel {
            kappa,
            seasons,
            name: None,
            description: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa < 1 {
            return Err(Error::InvalidArgument("kappa must be at least 1".into()));
        }
        if self.seasons.is_empty() {
            return Err(Error::InvalidArgument("at least one season is required".into()));
        }
        for d in &self.seasons {
            d.validate()?;
        }
        Ok(())
    }

    pub fn n_seasons(&self) -> usize {
        self.seasons.len()
    }

    /// `κN`, the premium collected over one full cycle.
    pub fn cycle_premium(&self) -> usize {
        self.kappa * self.seasons.len()
    }

    /// `E S_N`.
    pub fn mean_cycle_claims(&self) -> f64 {
        self.seasons.iter().map(DiscreteDist::mean).sum()
    }

    /// `min-support(S_N) = Σ_j d(X_j)`.
    pub fn cycle_min_support(&self) -> usize {
        self.seasons.iter().map(DiscreteDist::min_support).sum()
    }

    /// Season index following `j` (0-based, cyclic).
    pub fn next(&self, j: usize) -> usize {
        (j + 1) % self.seasons.len()
    }

    /// Season index preceding `j` (0-based, cyclic).
    pub fn prev(&self, j: usize) -> usize {
        (j + self.seasons.len() - 1) % self.seasons.len()
    }

    /// Distribution of `S_N`.
    pub fn cycle_claims(&self) -> DiscreteDist {
        self.seasons
            .iter()
            .fold(DiscreteDist::degenerate(0), |acc, d| acc.convolve(d))
    }
}

/// `κN − E S_N`; positive exactly when the net profit condition holds.
pub fn net_profit_margin(model: &RiskModel) -> f64 {
    model.cycle_premium() as f64 - model.mean_cycle_claims()
}

/// Relative slack used when comparing `E S_N` to `κN`.
const REGIME_TOL: f64 = 1e-12;

pub fn classify_regime(model: &RiskModel) -> Regime {
    let premium = model.cycle_premium() as f64;
    let margin = net_profit_margin(model);
    if margin > REGIME_TOL * premium {
        return Regime::NetProfit;
    }
    if margin < -REGIME_TOL * premium {
        return Regime::Supercritical;
    }
    let points: Option<usize> = model.seasons.iter().map(DiscreteDist::point_mass).sum();
    if points == Some(model.cycle_premium()) {
        Regime::Degenerate
    } else {
        Regime::CriticalNondegenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: f64, s: usize) -> DiscreteDist {
        DiscreteDist::poisson(l, s).unwrap()
    }

    #[test]
    fn margins() {
        let ex1 = RiskModel::new(2, vec![p(1.0, 0), p(2.0, 0)]).unwrap();
        assert!((net_profit_margin(&ex1) - 1.0).abs() < 1e-15);

        let seasons = (1..=10)
            .map(|k| p(k as f64 / (k as f64 + 1.0) + 4.0, 0))
            .collect();
        let ex4 = RiskModel::new(5, seasons).unwrap();
        assert!((net_profit_margin(&ex4) - 55991.0 / 27720.0).abs() < 1e-12);

        let edge = RiskModel::new(1, vec![DiscreteDist::degenerate(1)]).unwrap();
        assert_eq!(net_profit_margin(&edge), 0.0);
    }

    #[test]
    fn regimes() {
        let ex1 = RiskModel::new(2, vec![p(1.0, 0), p(2.0, 0)]).unwrap();
        assert_eq!(classify_regime(&ex1), Regime::NetProfit);
        let sup = RiskModel::new(1, vec![DiscreteDist::degenerate(2)]).unwrap();
        assert_eq!(classify_regime(&sup), Regime::Supercritical);
        let deg = RiskModel::new(1, vec![DiscreteDist::degenerate(0), DiscreteDist::degenerate(2)]).unwrap();
        assert_eq!(classify_regime(&deg), Regime::Degenerate);
        let crit = RiskModel::new(1, vec![DiscreteDist::table(vec![0.5, 0.0, 0.5]).unwrap()]).unwrap();
        assert_eq!(classify_regime(&crit), Regime::CriticalNondegenerate);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(RiskModel::new(0, vec![p(1.0, 0)]).is_err());
        assert!(RiskModel::new(1, vec![]).is_err());
    }
}
