//! Non-negative integer-valued claim distributions.
//!
//! Two families are supported: finite probability tables and displaced
//! Poisson laws `P(λ, ξ)` (a Poisson(λ) variable shifted right by `ξ`).
//! Everything here works in `f64`; the arbitrary-precision counterparts used
//! by the analytic pipeline live in [`crate::precise`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for `Σ p_i = 1` on finite tables.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Tail mass left behind when a Poisson factor is materialized as a table
/// inside a mixed convolution.
pub const CONVOLUTION_TAIL: f64 = 1e-15;

/// Slack allowed beyond the closed unit disk when evaluating an infinite-support PGF.
pub const DISK_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum DiscreteDist {
    /// `probs[i] = P(X = i)`.
    #[serde(rename = "table")]
    FiniteTable { probs: Vec<f64> },
    /// Poisson(`lambda`) shifted right by `shift`.
    #[serde(rename = "poisson")]
    DisplacedPoisson { lambda: f64, shift: usize },
}

/// A finite prefix of a distribution together with the mass cut off beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedDist {
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl DiscreteDist {
    pub fn table(probs: Vec<f64>) -> Result<Self> {
        let d = DiscreteDist::FiniteTable { probs };
        d.validate()?;
        Ok(d)
    }

    pub fn poisson(lambda: f64, shift: usize) -> Result<Self> {
        let d = DiscreteDist::DisplacedPoisson { lambda, shift };
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `value`.
    pub fn degenerate(value: usize) -> Self {
        let mut probs = vec![0.0; value + 1];
        probs[value] = 1.0;
        DiscreteDist::FiniteTable { probs }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DiscreteDist::FiniteTable { probs } => {
                if probs.is_empty() {
                    return Err(Error::InvalidDistribution("empty probability table".into()));
                }
                if let Some((i, p)) = probs
                    .iter()
                    .enumerate()
                    .find(|(_, p)| !p.is_finite() || **p < 0.0)
                {
                    return Err(Error::InvalidDistribution(format!(
                        "probability at index {i} is {p}; entries must be finite and non-negative"
                    )));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidDistribution(format!(
                        "probabilities sum to {total}, not 1"
                    )));
                }
                Ok(())
            }
            DiscreteDist::DisplacedPoisson { lambda, .. } => {
                if !lambda.is_finite() || *lambda <= 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "poisson rate must be positive, got {lambda}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Smallest `i` with `P(X = i) > 0`.
    pub fn min_support(&self) -> usize {
        match self {
            DiscreteDist::FiniteTable { probs } => probs.iter().position(|p| *p > 0.0).unwrap_or(0),
            DiscreteDist::DisplacedPoisson { shift, .. } => *shift,
        }
    }

    /// Largest `i` with `P(X = i) > 0`, `None` for unbounded support.
    pub fn max_support(&self) -> Option<usize> {
        match self {
            DiscreteDist::FiniteTable { probs } => probs.iter().rposition(|p| *p > 0.0),
            DiscreteDist::DisplacedPoisson { .. } => None,
        }
    }

    /// The atom if the distribution is a point mass.
    pub fn point_mass(&self) -> Option<usize> {
        match self {
            DiscreteDist::FiniteTable { probs } => {
                let lo = self.min_support();
                if (probs[lo] - 1.0).abs() <= NORMALIZATION_TOL {
                    Some(lo)
                } else {
                    None
                }
            }
            DiscreteDist::DisplacedPoisson { .. } => None,
        }
    }

    pub fn pmf(&self, i: usize) -> f64 {
        match self {
            DiscreteDist::FiniteTable { probs } => probs.get(i).copied().unwrap_or(0.0),
            DiscreteDist::DisplacedPoisson { lambda, shift } => {
                if i < *shift {
                    return 0.0;
                }
                let k = i - shift;
                let ln_fact: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
                (k as f64 * lambda.ln() - lambda - ln_fact).exp()
            }
        }
    }

    /// `P(X = 0), …, P(X = len - 1)`.
    pub fn pmf_vec(&self, len: usize) -> Vec<f64> {
        match self {
            DiscreteDist::FiniteTable { probs } => {
                let mut out = probs.clone();
                out.resize(len, 0.0);
                out
            }
            DiscreteDist::DisplacedPoisson { lambda, shift } => {
                let mut out = vec![0.0; len];
                if *shift >= len {
                    return out;
                }
                // log-space recursion stays finite for rates beyond the exp underflow limit
                let mut ln_p = -lambda;
                for k in 0..len - shift {
                    if k > 0 {
                        ln_p += (lambda / k as f64).ln();
                    }
                    out[shift + k] = ln_p.exp();
                }
                out
            }
        }
    }

    /// `P(X ≤ k)`; zero for negative `k`.
    pub fn cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let k = k as usize;
        match self {
            DiscreteDist::FiniteTable { probs } => probs.iter().take(k + 1).sum::<f64>().min(1.0),
            DiscreteDist::DisplacedPoisson { .. } => self.pmf_vec(k + 1).iter().sum::<f64>().min(1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DiscreteDist::FiniteTable { probs } => probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum(),
            DiscreteDist::DisplacedPoisson { lambda, shift } => lambda + *shift as f64,
        }
    }

    fn check_disk(&self, s: Complex64) -> Result<()> {
        if matches!(self, DiscreteDist::DisplacedPoisson { .. }) && s.norm() > 1.0 + DISK_SLACK {
            return Err(Error::Domain(format!(
                "poisson PGF evaluated at |s| = {} outside the closed unit disk",
                s.norm()
            )));
        }
        Ok(())
    }

    /// `G_X(s) = E s^X`.
    pub fn pgf(&self, s: Complex64) -> Result<Complex64> {
        self.check_disk(s)?;
        Ok(match self {
            DiscreteDist::FiniteTable { probs } => probs
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, p| acc * s + p),
            DiscreteDist::DisplacedPoisson { lambda, shift } => {
                s.powu(*shift as u32) * ((s - 1.0) * lambda).exp()
            }
        })
    }

    /// Taylor coefficients `G^{(k)}(s) / k!` for `k = 0..=order`.
    pub fn pgf_jet(&self, s: Complex64, order: usize) -> Result<Vec<Complex64>> {
        self.check_disk(s)?;
        Ok(match self {
            DiscreteDist::FiniteTable { probs } => {
                let mut b: Vec<Complex64> = probs.iter().map(|p| Complex64::new(*p, 0.0)).collect();
                let deg = b.len() - 1;
                let mut jet = Vec::with_capacity(order + 1);
                for k in 0..=order {
                    if k > deg {
                        jet.push(Complex64::new(0.0, 0.0));
                        continue;
                    }
                    for i in (k..deg).rev() {
                        let carry = b[i + 1] * s;
                        b[i] += carry;
                    }
                    jet.push(b[k]);
                }
                jet
            }
            DiscreteDist::DisplacedPoisson { lambda, shift } => {
                let e = ((s - 1.0) * lambda).exp();
                let mut exp_jet = Vec::with_capacity(order + 1);
                let mut c = e;
                for k in 0..=order {
                    if k > 0 {
                        c = c * lambda / k as f64;
                    }
                    exp_jet.push(c);
                }
                let pow_jet = monomial_jet(s, *shift as i64, order);
                jet_product(&exp_jet, &pow_jet)
            }
        })
    }

    /// `n`-th derivative of the PGF at `s`.
    pub fn pgf_derivative(&self, s: Complex64, n: usize) -> Result<Complex64> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "derivative order must be at least 1".into(),
            ));
        }
        let jet = self.pgf_jet(s, n)?;
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        Ok(jet[n] * fact)
    }

    /// Distribution of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &DiscreteDist) -> DiscreteDist {
        use DiscreteDist::*;
        if self.point_mass() == Some(0) {
            return other.clone();
        }
        if other.point_mass() == Some(0) {
            return self.clone();
        }
        match (self, other) {
            (
                DisplacedPoisson {
                    lambda: l1,
                    shift: s1,
                },
                DisplacedPoisson {
                    lambda: l2,
                    shift: s2,
                },
            ) => DisplacedPoisson {
                lambda: l1 + l2,
                shift: s1 + s2,
            },
            _ => {
                let a = self.truncate(CONVOLUTION_TAIL).probs;
                let b = other.truncate(CONVOLUTION_TAIL).probs;
                FiniteTable {
                    probs: convolve_slices(&a, &b),
                }
            }
        }
    }

    /// Shortest prefix whose cut-off tail is at most `eps`.
    pub fn truncate(&self, eps: f64) -> TruncatedDist {
        match self {
            DiscreteDist::FiniteTable { probs } => TruncatedDist {
                probs: probs.clone(),
                tail_mass: 0.0,
            },
            DiscreteDist::DisplacedPoisson { lambda, shift } => {
                // generate well past the mode, then read tails off reverse partial sums
                let mut len = shift + (*lambda as usize) + 16;
                loop {
                    let p = self.pmf_vec(len);
                    let last = p[len - 1];
                    if len > shift + *lambda as usize + 1 && last < eps * 1e-6 {
                        let mut tail = vec![0.0; len + 1];
                        for i in (0..len).rev() {
                            tail[i] = tail[i + 1] + p[i];
                        }
                        let beyond = (1.0 - tail[0]).max(0.0);
                        let cut = (1..=len).find(|&k| tail[k] + beyond <= eps).unwrap_or(len);
                        return TruncatedDist {
                            probs: p[..cut].to_vec(),
                            tail_mass: tail[cut] + beyond,
                        };
                    }
                    len *= 2;
                }
            }
        }
    }
}

/// Taylor coefficients of `s^m` around `s`, for any integer `m`.
pub fn monomial_jet(s: Complex64, m: i64, order: usize) -> Vec<Complex64> {
    let mut jet = Vec::with_capacity(order + 1);
    let mut binom = 1.0;
    for k in 0..=order {
        if k > 0 {
            binom *= (m - k as i64 + 1) as f64 / k as f64;
        }
        if binom == 0.0 {
            jet.push(Complex64::new(0.0, 0.0));
        } else {
            jet.push(s.powi((m - k as i64) as i32) * binom);
        }
    }
    jet
}

/// Truncated product of two Taylor jets of equal order.
pub fn jet_product(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let order = a.len().min(b.len());
    (0..order)
        .map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum())
        .collect()
}

pub(crate) fn convolve_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
