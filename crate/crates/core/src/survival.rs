//! Ultimate- and finite-time survival probabilities.

use rayon::prelude::*;
use rug::Float;

use crate::boundary::{solve_boundary, BoundaryMasses, ColumnState, CLAMP_TOL};
use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::model::RiskModel;
pub use crate::model::{classify_regime, Regime};
use crate::precise::{self, PreciseModel};
use crate::roots::{characteristic_roots, RootConfig, RootSet};

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    /// `phi[u] = φ(u)`, `u = 0..=u_max`.
    pub phi: Vec<f64>,
    pub regime: Regime,
}

impl SurvivalTable {
    pub fn get(&self, u: usize) -> f64 {
        self.phi[u]
    }

    pub fn u_max(&self) -> usize {
        self.phi.len() - 1
    }
}

#[derive(Debug, Clone)]
pub struct MassSequence {
    pub kappa: usize,
    /// `masses[j−1][n] = m_n^{(j)}`, clamped at zero.
    pub masses: Vec<Vec<f64>>,
}

impl MassSequence {
    pub fn get(&self, j: usize, n: usize) -> f64 {
        self.masses[j - 1][n]
    }

    /// `φ(u+1) = Σ_{i≤u} m_i^{(1)}`.
    pub fn partial_sum(&self, j: usize, u: usize) -> f64 {
        self.masses[j - 1][..=u].iter().sum()
    }
}

/// Working precision for an analytic run reaching index `extent`.
///
/// Errors in the forward recurrences grow like `|α_min|^{−n}`.
pub fn working_precision(roots: &RootSet, extent: usize, kappa_n: usize) -> u32 {
    let rho = roots.min_nonzero_modulus().unwrap_or(1.0).clamp(1e-300, 1.0);
    let per_step = (1.0 / rho).log2();
    let bits = 160.0 + 1.5 * per_step * (extent + 2 * kappa_n) as f64;
    (bits.ceil() as u32).clamp(precise::DEFAULT_PRECISION, precise::MAX_PRECISION)
}

/// Memoized solver of the cyclic mass system.
///
/// For a season `j` with predecessor `p`, `d = d(X_p)` and `n = t + d ≥ κ`,
/// `m_t^{(j)} x_d^{(p)} = m_{n−κ}^{(p)} − Σ_{i<t} m_i^{(j)} x_{n−i}^{(p)} − [n = κ] Σ_{i<t} m_i^{(j)} F_p(κ−1−i)`.
struct Extender {
    kappa: usize,
    n: usize,
    prec: u32,
    mins: Vec<usize>,
    pmfs: Vec<Vec<Float>>,
    cdfs: Vec<Vec<Float>>,
    boundary: Vec<Vec<Float>>,
    states: Vec<Vec<ColumnState>>,
    memo: Vec<Vec<Option<Float>>>,
    busy: Vec<Vec<bool>>,
}

impl Extender {
    fn new(pm: &PreciseModel, b: &BoundaryMasses) -> Self {
        let kappa = pm.kappa;
        let pmfs: Vec<Vec<Float>> = pm.seasons.iter().map(|d| d.pmf_vec(kappa + 1)).collect();
        let cdfs: Vec<Vec<Float>> = pmfs
            .iter()
            .map(|p| {
                let mut acc = Float::new(pm.prec);
                p.iter()
                    .map(|x| {
                        acc += x;
                        acc.clone()
                    })
                    .collect()
            })
            .collect();
        Extender {
            kappa,
            n: pm.n(),
            prec: pm.prec,
            mins: pm.seasons.iter().map(|d| d.min_support()).collect(),
            pmfs,
            cdfs,
            boundary: b.exact.clone(),
            states: b.state.clone(),
            memo: vec![Vec::new(); pm.n()],
            busy: vec![Vec::new(); pm.n()],
        }
    }

    fn ensure_pmfs(&mut self, pm: &PreciseModel, len: usize) {
        if self.pmfs[0].len() < len {
            self.pmfs = pm
                .seasons
                .iter()
                .map(|d| d.pmf_vec(len.max(2 * self.pmfs[0].len())))
                .collect();
        }
    }

    fn x(&self, p: usize, k: usize) -> &Float {
        &self.pmfs[p][k]
    }

    fn mass(&mut self, j: usize, t: usize) -> Result<Float> {
        if t < self.kappa {
            match self.states[j][t] {
                ColumnState::Solved => return Ok(self.boundary[j][t].clone()),
                ColumnState::KnownZero => return Ok(Float::new(self.prec)),
                ColumnState::ZeroColumn => {}
            }
        }
        if self.memo[j].len() <= t {
            self.memo[j].resize(t + 1, None);
            self.busy[j].resize(t + 1, false);
        }
        if let Some(v) = &self.memo[j][t] {
            return Ok(v.clone());
        }
        if self.busy[j][t] {
            return Err(Error::ZeroDivisor { season: j + 1 });
        }
        self.busy[j][t] = true;
        let p = (j + self.n - 1) % self.n;
        let d = self.mins[p];
        let n = t + d;
        let mut v = self.mass(p, n - self.kappa)?;
        for i in 0..t {
            let mi = self.mass(j, i)?;
            let x = self.x(p, n - i);
            if !x.is_zero() {
                v -= Float::with_val(self.prec, &mi * x);
            }
            if n == self.kappa {
                let f = &self.cdfs[p][self.kappa - 1 - i];
                if !f.is_zero() {
                    v -= Float::with_val(self.prec, &mi * f);
                }
            }
        }
        let div = self.x(p, d);
        if div.is_zero() {
            return Err(Error::ZeroDivisor { season: p + 1 });
        }
        v /= div;
        self.busy[j][t] = false;
        self.memo[j][t] = Some(v.clone());
        Ok(v)
    }
}

/// Roots, boundary masses and the mass recurrence at a precision sized for the requested range.
pub struct AnalyticSolution {
    pub roots: RootSet,
    pub boundary: BoundaryMasses,
    pub(crate) pm: PreciseModel,
    ext: Extender,
}

impl AnalyticSolution {
    /// Prepares a solution that stays accurate for indices up to `extent`.
    pub fn new(model: &RiskModel, extent: usize) -> Result<Self> {
        Self::with_config(model, extent, &RootConfig::default())
    }

    pub fn with_config(model: &RiskModel, extent: usize, cfg: &RootConfig) -> Result<Self> {
        let roots = characteristic_roots(model, cfg)?;
        let bits = working_precision(&roots, extent, model.cycle_premium());
        let roots = roots.refined(model, bits)?;
        let boundary = solve_boundary(model, &roots)?;
        let pm = PreciseModel::new(model, roots.precision_bits);
        let mut ext = Extender::new(&pm, &boundary);
        let sum_d: usize = ext.mins.iter().sum();
        ext.ensure_pmfs(&pm, extent + 2 * sum_d + 2 * model.kappa + 2);
        Ok(AnalyticSolution {
            roots,
            boundary,
            pm,
            ext,
        })
    }

    pub fn precision_bits(&self) -> u32 {
        self.pm.prec
    }

    pub(crate) fn exact_mass(&mut self, j: usize, n: usize) -> Result<Float> {
        let sum_d: usize = self.ext.mins.iter().sum();
        self.ext
            .ensure_pmfs(&self.pm, n + 2 * sum_d + 2 * self.pm.kappa + 2);
        self.ext.mass(j - 1, n)
    }

    pub fn masses(&mut self, n_max: usize) -> Result<MassSequence> {
        let n = self.pm.n();
        let mut masses = vec![Vec::with_capacity(n_max + 1); n];
        for t in 0..=n_max {
            for (j, row) in masses.iter_mut().enumerate() {
                let v = self.exact_mass(j + 1, t)?.to_f64();
                if v < -CLAMP_TOL {
                    return Err(Error::NegativeMass {
                        season: j + 1,
                        index: t,
                        value: v,
                    });
                }
                row.push(v.max(0.0));
            }
        }
        Ok(MassSequence {
            kappa: self.pm.kappa,
            masses,
        })
    }

    /// `φ(0..=u_max)` in working precision: prefix sums of `m^{(1)}`, and `φ(0)` from the one-cycle recurrence.
    pub(crate) fn phi_exact(&mut self, u_max: usize) -> Result<Vec<Float>> {
        let kn = self.pm.kappa * self.pm.n();
        let top = u_max.max(kn);
        let mut phi = Vec::with_capacity(top + 1);
        phi.push(Float::new(self.pm.prec));
        let mut acc = Float::new(self.pm.prec);
        for i in 0..top {
            acc += self.exact_mass(1, i)?;
            phi.push(acc.clone());
        }
        phi[0] = phi_zero(&self.pm, &phi[1..=kn]);
        phi.truncate(u_max + 1);
        Ok(phi)
    }

    pub fn survival(&mut self, u_max: usize) -> Result<Vec<f64>> {
        Ok(self
            .phi_exact(u_max)?
            .iter()
            .map(|p| p.to_f64().clamp(0.0, 1.0))
            .collect())
    }

    /// `φ(0..=u_max)` from `φ(1..κN)` and the one-cycle recurrence alone.
    pub fn block_recurrence(&mut self, u_max: usize) -> Result<Vec<f64>> {
        let kn = self.pm.kappa * self.pm.n();
        let init = self.phi_exact(kn)?;
        Ok(block_recurrence_exact(&self.pm, &init[1..], u_max)
            .iter()
            .map(|p| p.to_f64().clamp(0.0, 1.0))
            .collect())
    }
}

/// Weights `w_v = Σ Π x_{i_k}^{(k)}` over multi-indices with `Σ i = v` and
/// running bounds `i_1 + … + i_k ≤ u + κk − 1`.
fn cycle_weights(pm: &PreciseModel, pmfs: &[Vec<Float>], u: usize) -> Vec<Float> {
    let prec = pm.prec;
    let mut dist = vec![Float::with_val(prec, 1)];
    for (k, x) in pmfs.iter().enumerate() {
        let bound = u + pm.kappa * (k + 1) - 1;
        let mut next = vec![Float::new(prec); bound + 1];
        for (s, w) in dist.iter().enumerate() {
            if w.is_zero() || s > bound {
                continue;
            }
            for i in 0..=bound - s {
                if !x[i].is_zero() {
                    next[s + i] += Float::with_val(prec, w * &x[i]);
                }
            }
        }
        dist = next;
    }
    dist
}

/// `φ(0)` from `φ(1..=κN)`.
fn phi_zero(pm: &PreciseModel, phi_1_to_kn: &[Float]) -> Float {
    let kn = pm.kappa * pm.n();
    let pmfs: Vec<Vec<Float>> = pm.seasons.iter().map(|d| d.pmf_vec(kn + 1)).collect();
    let w = cycle_weights(pm, &pmfs, 0);
    let mut acc = Float::new(pm.prec);
    for (v, wv) in w.iter().enumerate() {
        if !wv.is_zero() {
            acc += Float::with_val(pm.prec, wv * &phi_1_to_kn[kn - v - 1]);
        }
    }
    acc
}

fn block_recurrence_exact(pm: &PreciseModel, phi_init: &[Float], u_max: usize) -> Vec<Float> {
    let kn = pm.kappa * pm.n();
    let delta = pm.delta();
    let mut phi = Vec::with_capacity(u_max.max(kn) + 1);
    phi.push(phi_zero(pm, phi_init));
    phi.extend(phi_init.iter().cloned());
    let pmfs: Vec<Vec<Float>> = pm.seasons.iter().map(|d| d.pmf_vec(u_max + kn + 1)).collect();
    let mut lead = Float::with_val(pm.prec, 1);
    for (k, x) in pmfs.iter().enumerate() {
        lead *= &x[pm.seasons[k].min_support()];
    }
    // φ(u) = Σ_v w_v φ(u + κN − v), solved for the top term v = δ
    for target in kn + 1..=u_max {
        let u = target + delta - kn;
        let w = cycle_weights(pm, &pmfs, u);
        let mut acc = phi[u].clone();
        for (v, wv) in w.iter().enumerate().skip(delta + 1) {
            if !wv.is_zero() {
                acc -= Float::with_val(pm.prec, wv * &phi[u + kn - v]);
            }
        }
        acc /= &lead;
        phi.push(acc);
    }
    phi.truncate(u_max + 1);
    phi
}

/// Runs the one-cycle recurrence from `φ(1..=κN)` given in `f64`.
///
/// The forward direction is unstable in finite precision; this entry point
/// is meant for short ranges.  [`AnalyticSolution::block_recurrence`] keeps
/// the initial values at working precision.
pub fn survival_via_block_recurrence(model: &RiskModel, phi_init: &[f64], u_max: usize) -> Result<Vec<f64>> {
    let kn = model.cycle_premium();
    if phi_init.len() != kn {
        return Err(Error::InvalidArgument(format!(
            "expected {kn} initial values φ(1..=κN), got {}",
            phi_init.len()
        )));
    }
    let pm = PreciseModel::new(model, precise::DEFAULT_PRECISION);
    let init: Vec<Float> = phi_init.iter().map(|p| Float::with_val(pm.prec, *p)).collect();
    Ok(block_recurrence_exact(&pm, &init, u_max)
        .iter()
        .map(|p| p.to_f64().clamp(0.0, 1.0))
        .collect())
}

/// Extends solved boundary masses to `m_n^{(j)}`, `n ≤ n_max`, at the precision of `b`.
pub fn extend_masses(model: &RiskModel, b: &BoundaryMasses, n_max: usize) -> Result<MassSequence> {
    if n_max < model.kappa {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} must be at least kappa = {}",
            model.kappa
        )));
    }
    if classify_regime(model) != Regime::NetProfit {
        return Err(Error::NetProfitViolated {
            mean_claims: model.mean_cycle_claims(),
            premium: model.cycle_premium() as f64,
        });
    }
    let pm = PreciseModel::new(model, b.precision_bits);
    let mut ext = Extender::new(&pm, b);
    let sum_d: usize = ext.mins.iter().sum();
    ext.ensure_pmfs(&pm, n_max + 2 * sum_d + 2 * model.kappa + 2);
    let mut masses = vec![Vec::with_capacity(n_max + 1); model.n_seasons()];
    for t in 0..=n_max {
        for (j, row) in masses.iter_mut().enumerate() {
            let v = ext.mass(j, t)?.to_f64();
            if v < -CLAMP_TOL {
                return Err(Error::NegativeMass {
                    season: j + 1,
                    index: t,
                    value: v,
                });
            }
            row.push(v.max(0.0));
        }
    }
    Ok(MassSequence {
        kappa: model.kappa,
        masses,
    })
}

/// `φ(u)` when `S_N ≡ κN`.
fn degenerate_survival(model: &RiskModel, u_max: usize) -> Vec<f64> {
    let kappa = model.kappa as i64;
    let mut best = i64::MAX;
    let mut acc = 0i64;
    for (k, d) in model.seasons.iter().enumerate() {
        acc += d.point_mass().unwrap_or(0) as i64;
        best = best.min(kappa * (k as i64 + 1) - acc);
    }
    (0..=u_max)
        .map(|u| if u as i64 + best > 0 { 1.0 } else { 0.0 })
        .collect()
}

pub fn ultimate_survival(model: &RiskModel, u_max: usize) -> Result<SurvivalTable> {
    model.validate()?;
    let regime = classify_regime(model);
    let phi = match regime {
        Regime::Supercritical | Regime::CriticalNondegenerate => vec![0.0; u_max + 1],
        Regime::Degenerate => degenerate_survival(model, u_max),
        Regime::NetProfit => {
            AnalyticSolution::new(model, u_max.max(model.cycle_premium()))?.survival(u_max)?
        }
    };
    Ok(SurvivalTable { phi, regime })
}

/// `φ(u, t)` for `u ≤ u_max`, `t ≤ horizon`; `t` counts periods.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonGrid {
    pub u_max: usize,
    pub horizon: usize,
    /// `phi[t−1][u]`.
    pub phi: Vec<Vec<f64>>,
}

impl HorizonGrid {
    pub fn get(&self, u: usize, t: usize) -> f64 {
        self.phi[t - 1][u]
    }
}

/// Poisson laws are cut where the remaining tail drops below this.
const FINITE_TAIL: f64 = 1e-18;

pub fn finite_survival(model: &RiskModel, u_max: usize, horizon: usize) -> Result<HorizonGrid> {
    model.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let kappa = model.kappa;
    let n = model.n_seasons();
    let width = |t: usize| u_max + kappa * (horizon - t) + 1;
    let pmfs: Vec<Vec<f64>> = model
        .seasons
        .iter()
        .map(|d| match d {
            DiscreteDist::FiniteTable { .. } => d.pmf_vec(d.max_support().unwrap_or(0) + 1),
            DiscreteDist::DisplacedPoisson { .. } => d.truncate(FINITE_TAIL).probs,
        })
        .collect();

    // layer 1: φ^{(j)}(u, 1) = F_j(u + κ − 1)
    let mut layer: Vec<Vec<f64>> = pmfs
        .iter()
        .map(|x| {
            let mut acc = 0.0;
            let cdf: Vec<f64> = x
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            (0..width(1))
                .map(|u| cdf.get(u + kappa - 1).copied().unwrap_or(acc).min(1.0))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(horizon);
    out.push(layer[0][..=u_max].to_vec());
    for t in 2..=horizon {
        let w = width(t);
        layer = (0..n)
            .into_par_iter()
            .map(|j| {
                let next = &layer[(j + 1) % n];
                let x = &pmfs[j];
                (0..w)
                    .map(|u| {
                        let top = (u + kappa - 1).min(x.len() - 1);
                        (0..=top).map(|i| next[u + kappa - i] * x[i]).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        out.push(layer[0][..=u_max].to_vec());
    }
    Ok(HorizonGrid {
        u_max,
        horizon,
        phi: out,
    })
}
