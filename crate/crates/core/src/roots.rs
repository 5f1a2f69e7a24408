//! Roots of `G_{S_N}(s) = s^{κN}` in the closed unit disk.
//!
//! Candidates come from a polynomial surrogate (the PGF of `S_N` truncated to
//! a finite table) solved with the Aberth–Ehrlich iteration.  They are then
//! refined against the exact function in arbitrary precision, clustered into
//! multiple roots, and checked against the expected count `κN − 1`.

use num_complex::Complex64;
use rug::{Complex, Float};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::model::{net_profit_margin, RiskModel};
use crate::precise::{self, PreciseModel};

#[derive(Debug, Clone, PartialEq)]
pub struct RootConfig {
    /// Tail mass discarded when `S_N` is truncated to a polynomial.
    pub truncation_eps: f64,
    /// Roots with `|s| ≤ 1 + band` count as inside the disk.
    pub band: f64,
    /// Candidates within this distance of `s = 1` are the trivial root.
    pub exclusion_tol: f64,
    pub cluster_tol: f64,
    pub max_newton: usize,
    /// Threshold of the scaled derivative test that confirms multiplicities.
    pub derivative_tol: f64,
    pub precision_bits: u32,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            truncation_eps: 1e-14,
            band: 1e-6,
            exclusion_tol: 1e-8,
            cluster_tol: 1e-6,
            max_newton: 100,
            derivative_tol: 1e-5,
            precision_bits: precise::DEFAULT_PRECISION,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
    /// `|G_{S_N}(α) − α^{κN}|`.
    pub residual: f64,
    /// The root `s = 0` forced by a positive minimal support of `S_N`.
    pub at_zero: bool,
    /// `1 < |α| ≤ 1 + band`.
    pub in_band: bool,
    /// Multiplicity agrees with the derivative test.
    pub confirmed: bool,
    pub(crate) exact: Complex,
}

impl Root {
    pub fn exact(&self) -> &Complex {
        &self.exact
    }
}

#[derive(Debug, Clone)]
pub struct RootSet {
    pub roots: Vec<Root>,
    pub total_with_multiplicity: usize,
    pub precision_bits: u32,
}

impl RootSet {
    pub fn nonzero(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| !r.at_zero)
    }

    pub fn zero_multiplicity(&self) -> usize {
        self.roots
            .iter()
            .filter(|r| r.at_zero)
            .map(|r| r.multiplicity)
            .sum()
    }

    pub fn min_nonzero_modulus(&self) -> Option<f64> {
        self.nonzero().map(|r| r.value.norm()).reduce(f64::min)
    }

    pub fn max_residual(&self, multiple: bool) -> f64 {
        self.roots
            .iter()
            .filter(|r| (r.multiplicity > 1) == multiple && !r.at_zero)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }

    /// True when every non-real root has a conjugate partner of equal multiplicity.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        self.roots.iter().all(|r| {
            r.value.im.abs() <= tol
                || self
                    .roots
                    .iter()
                    .any(|q| q.multiplicity == r.multiplicity && (q.value - r.value.conj()).norm() <= tol)
        })
    }

    /// Re-polish every nonzero root at `bits` of working precision.
    pub fn refined(&self, model: &RiskModel, bits: u32) -> Result<RootSet> {
        if bits <= self.precision_bits {
            return Ok(self.clone());
        }
        let pm = PreciseModel::new(model, bits);
        let roots = self
            .roots
            .iter()
            .map(|r| {
                if r.at_zero {
                    let mut z = r.clone();
                    z.exact = precise::zero(bits);
                    return z;
                }
                let start = Complex::with_val(bits, &r.exact);
                let exact = polish_multiple(&pm, start, r.multiplicity, 200);
                Root {
                    value: precise::to_c64(&exact),
                    residual: precise::abs_f64(&pm.h(&exact)),
                    exact,
                    ..r.clone()
                }
            })
            .collect();
        Ok(RootSet {
            roots,
            total_with_multiplicity: self.total_with_multiplicity,
            precision_bits: bits,
        })
    }
}

/// All roots of `Σ coeffs[k] s^k` (Aberth–Ehrlich with Newton-polygon starting points).
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let top = match coeffs.iter().rposition(|c| *c != 0.0) {
        Some(t) => t,
        None => return Vec::new(),
    };
    let low = coeffs.iter().position(|c| *c != 0.0).unwrap_or(0);
    let a = &coeffs[low..=top];
    let n = a.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); low];
    if n == 0 {
        return roots;
    }
    let mut z = initial_guesses(a);
    let mut done = vec![false; n];
    for _ in 0..1000 {
        let mut active = false;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let (ratio, converged) = newton_ratio(a, z[i]);
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d != Complex64::new(0.0, 0.0) {
                        sum += 1.0 / d;
                    }
                }
            }
            let w = ratio / (1.0 - ratio * sum);
            if w.is_finite() {
                z[i] -= w;
            }
            if converged {
                done[i] = true;
            } else {
                active = true;
            }
        }
        if !active {
            break;
        }
    }
    roots.extend(z);
    roots
}

fn initial_guesses(a: &[f64]) -> Vec<Complex64> {
    let n = a.len() - 1;
    let pts: Vec<(usize, f64)> = a
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (i, c.abs().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (i1, y1) = hull[hull.len() - 2];
            let (i2, y2) = hull[hull.len() - 1];
            let cross = (i2 as f64 - i1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - i1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut z = Vec::with_capacity(n);
    let tau = std::f64::consts::TAU;
    for w in hull.windows(2) {
        let (i, yi) = w[0];
        let (j, yj) = w[1];
        let count = j - i;
        let r = ((yi - yj) / count as f64).exp();
        for k in 0..count {
            let theta = tau * k as f64 / count as f64 + tau * i as f64 / n as f64 + 0.4;
            z.push(Complex64::from_polar(r, theta));
        }
    }
    z
}

/// `p(z)/p'(z)` and whether `z` already meets a componentwise backward-error test.
fn newton_ratio(a: &[f64], z: Complex64) -> (Complex64, bool) {
    let n = a.len() - 1;
    let tol = 4.0 * (n as f64 + 1.0) * f64::EPSILON;
    if z.norm() <= 1.0 {
        let (p, dp, bound) = horner(a.iter().rev(), z);
        (safe_div(p, dp), p.norm() <= tol * bound)
    } else {
        let w = 1.0 / z;
        let (q, dq, bound) = horner(a.iter(), w);
        let denom = q * n as f64 - w * dq;
        (safe_div(z * q, denom), q.norm() <= tol * bound)
    }
}

fn horner<'a>(coeffs: impl Iterator<Item = &'a f64>, z: Complex64) -> (Complex64, Complex64, f64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    let mut bound = 0.0;
    let r = z.norm();
    for c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
        bound = bound * r + c.abs();
    }
    (p, dp, bound)
}

fn safe_div(p: Complex64, dp: Complex64) -> Complex64 {
    if dp.norm() == 0.0 {
        p
    } else {
        p / dp
    }
}

/// Greedy union-find grouping of points closer than `tol`.
pub(crate) fn cluster_indices(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Clusters raw root approximations; centroids are arithmetic means.
pub fn cluster_multiplicities(raw: &[Complex64], tol: f64) -> RootSet {
    let roots: Vec<Root> = cluster_indices(raw, tol)
        .into_iter()
        .map(|g| {
            let c = g.iter().map(|&i| raw[i]).sum::<Complex64>() / g.len() as f64;
            Root {
                value: c,
                multiplicity: g.len(),
                residual: f64::NAN,
                at_zero: c.norm() == 0.0,
                in_band: c.norm() > 1.0,
                confirmed: false,
                exact: precise::from_c64(53, c),
            }
        })
        .collect();
    RootSet {
        total_with_multiplicity: roots.iter().map(|r| r.multiplicity).sum(),
        roots,
        precision_bits: 53,
    }
}

/// Newton on `h̃^{(r−1)}`, which has a simple root where `h̃` has a root of multiplicity `r`.
fn polish_multiple(pm: &PreciseModel, mut z: Complex, r: usize, max_iter: usize) -> Complex {
    let prec = pm.prec;
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32 - 16)));
    for _ in 0..max_iter {
        let jet = pm.reduced_h_jet(&z, r);
        if jet[r].is_zero() {
            break;
        }
        let mut step = Complex::with_val(prec, &jet[r - 1] / &jet[r]);
        step /= r as u32;
        z -= &step;
        let size = precise::abs(&z).max(&Float::with_val(prec, 1e-300));
        if precise::abs(&step) <= Float::with_val(prec, &eps * &size) {
            break;
        }
    }
    z
}

/// Simultaneous MP refinement of the disk candidates, with the trivial root `s = 1` held fixed.
fn aberth_refine(pm: &PreciseModel, start: &[Complex64], max_iter: usize) -> Vec<Complex> {
    let prec = pm.prec;
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32 - 16)));
    let unit = precise::one(prec);
    let mut z: Vec<Complex> = start.iter().map(|c| precise::from_c64(prec, *c)).collect();
    let mut done = vec![false; z.len()];
    for _ in 0..max_iter {
        let mut active = false;
        for i in 0..z.len() {
            if done[i] {
                continue;
            }
            let jet = pm.reduced_h_jet(&z[i], 1);
            if jet[1].is_zero() {
                done[i] = true;
                continue;
            }
            let ratio = Complex::with_val(prec, &jet[0] / &jet[1]);
            let mut sum = Complex::with_val(prec, 1 / Complex::with_val(prec, &z[i] - &unit));
            for j in 0..z.len() {
                if j == i {
                    continue;
                }
                let d = Complex::with_val(prec, &z[i] - &z[j]);
                if !d.is_zero() {
                    sum += Complex::with_val(prec, 1 / d);
                }
            }
            let mut denom = Complex::with_val(prec, &ratio * &sum);
            denom = Complex::with_val(prec, 1 - denom);
            let w = if denom.is_zero() {
                ratio
            } else {
                Complex::with_val(prec, &ratio / &denom)
            };
            z[i] -= &w;
            let size = precise::abs(&z[i]).max(&Float::with_val(prec, 1e-300));
            if precise::abs(&w) <= Float::with_val(prec, &eps * &size) {
                done[i] = true;
            } else {
                active = true;
            }
        }
        if !active {
            break;
        }
    }
    z
}

/// Smallest `k ≥ 1` whose scaled Taylor coefficient of `h̃` at `α` exceeds `tol`.
fn derivative_multiplicity(pm: &PreciseModel, alpha: &Complex, max_order: usize, tol: f64) -> usize {
    let r = precise::abs(alpha);
    let scale = pm.reduced_scale(alpha);
    let jet = pm.reduced_h_jet(alpha, max_order);
    let mut rk = Float::with_val(pm.prec, 1);
    for (k, c) in jet.iter().enumerate().skip(1) {
        rk *= &r;
        let t = Float::with_val(pm.prec, precise::abs(c) * &rk) / &scale;
        if t.to_f64() > tol {
            return k;
        }
    }
    max_order + 1
}

/// Polynomial surrogate of `G_{S_N}(s)/s^δ − s^{κN−δ}`, coefficients low to high.
fn surrogate(model: &RiskModel, eps: f64) -> Vec<f64> {
    let delta = model.cycle_min_support();
    let degree = model.cycle_premium() - delta;
    let cycle = model.cycle_claims();
    let probs = match &cycle {
        DiscreteDist::FiniteTable { .. } => cycle.truncate(eps).probs,
        DiscreteDist::DisplacedPoisson { lambda, .. } => {
            DiscreteDist::DisplacedPoisson {
                lambda: *lambda,
                shift: 0,
            }
            .truncate(eps)
            .probs
        }
    };
    let start = if matches!(cycle, DiscreteDist::FiniteTable { .. }) {
        delta
    } else {
        0
    };
    let mut p: Vec<f64> = probs.get(start..).map(|s| s.to_vec()).unwrap_or_default();
    if p.len() <= degree {
        p.resize(degree + 1, 0.0);
    }
    p[degree] -= 1.0;
    p
}

pub fn characteristic_roots(model: &RiskModel, cfg: &RootConfig) -> Result<RootSet> {
    model.validate()?;
    let margin = net_profit_margin(model);
    if margin <= 0.0 {
        return Err(Error::NetProfitViolated {
            mean_claims: model.mean_cycle_claims(),
            premium: model.cycle_premium() as f64,
        });
    }
    let expected = model.cycle_premium() - 1;
    let prec = cfg.precision_bits;
    let pm = PreciseModel::new(model, prec);

    // h̃'(1) = E S_N − κN
    let slope = pm.reduced_h_jet(&precise::one(prec), 1)[1].real().to_f64();
    if slope >= 0.0 {
        return Err(Error::NetProfitViolated {
            mean_claims: model.mean_cycle_claims(),
            premium: model.cycle_premium() as f64,
        });
    }

    let delta = pm.delta();
    let mut roots = Vec::new();
    if pm.reduced_degree() > 1 {
        let raw = polynomial_roots(&surrogate(model, cfg.truncation_eps));
        let mut cands: Vec<Complex64> = raw
            .into_iter()
            .filter(|z| z.norm() <= 1.0 + cfg.band.max(1e-4))
            .collect();
        if let Some(k) =
            (0..cands.len()).min_by(|&i, &j| (cands[i] - 1.0).norm().total_cmp(&(cands[j] - 1.0).norm()))
        {
            cands.swap_remove(k);
        }
        let refined = aberth_refine(&pm, &cands, cfg.max_newton);
        let approx: Vec<Complex64> = refined.iter().map(precise::to_c64).collect();
        for group in cluster_indices(&approx, cfg.cluster_tol) {
            let r = group.len();
            let mut centroid = precise::zero(prec);
            for &i in &group {
                centroid += &refined[i];
            }
            centroid /= r as u32;
            let exact = if r > 1 {
                polish_multiple(&pm, centroid, r, cfg.max_newton)
            } else {
                centroid
            };
            let value = precise::to_c64(&exact);
            if value.norm() > 1.0 + cfg.band || (value - 1.0).norm() <= cfg.exclusion_tol {
                continue;
            }
            let confirmed = derivative_multiplicity(&pm, &exact, r + 1, cfg.derivative_tol) == r;
            roots.push(Root {
                value,
                multiplicity: r,
                residual: precise::abs_f64(&pm.h(&exact)),
                at_zero: false,
                in_band: value.norm() > 1.0,
                confirmed,
                exact,
            });
        }
    }
    if delta > 0 {
        roots.push(Root {
            value: Complex64::new(0.0, 0.0),
            multiplicity: delta,
            residual: 0.0,
            at_zero: true,
            in_band: false,
            confirmed: true,
            exact: precise::zero(prec),
        });
    }
    roots.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    let found: usize = roots.iter().map(|r| r.multiplicity).sum();
    if found != expected {
        return Err(Error::RootCountMismatch { expected, found });
    }
    Ok(RootSet {
        roots,
        total_with_multiplicity: found,
        precision_bits: prec,
    })
}
