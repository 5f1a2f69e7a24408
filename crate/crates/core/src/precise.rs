//! Arbitrary-precision helpers for the analytic pipeline.
//!
//! The forward recurrences that turn boundary masses into survival
//! probabilities lose roughly `log2(1/|α_min|)` bits per step, so every
//! quantity that feeds them is carried in MPFR/MPC.

use num_complex::Complex64;
use rug::float::Constant;
use rug::{Complex, Float};
use std::cmp::Ordering;

use crate::dist::DiscreteDist;

pub const DEFAULT_PRECISION: u32 = 256;
pub const MAX_PRECISION: u32 = 16384;

pub fn zero(prec: u32) -> Complex {
    Complex::new(prec)
}

pub fn one(prec: u32) -> Complex {
    Complex::with_val(prec, 1)
}

pub fn real(prec: u32, x: &Float) -> Complex {
    Complex::with_val(prec, (x, 0))
}

pub fn from_c64(prec: u32, z: Complex64) -> Complex {
    Complex::with_val(prec, (z.re, z.im))
}

pub fn to_c64(z: &Complex) -> Complex64 {
    Complex64::new(z.real().to_f64(), z.imag().to_f64())
}

pub fn abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

pub fn abs_f64(z: &Complex) -> f64 {
    abs(z).to_f64()
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, Constant::Pi)
}

/// `z^n` for any integer `n`; `z` must be nonzero when `n < 0`.
pub fn powi(z: &Complex, n: i64) -> Complex {
    let prec = z.prec().0;
    let mut base = z.clone();
    let mut e = n.unsigned_abs();
    let mut acc = one(prec);
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        e >>= 1;
        if e > 0 {
            let sq = Complex::with_val(prec, base.square_ref());
            base = sq;
        }
    }
    if n < 0 {
        acc = Complex::with_val(prec, 1 / &acc);
    }
    acc
}

/// Truncated product of Taylor jets (same length).
pub fn jet_mul(a: &[Complex], b: &[Complex]) -> Vec<Complex> {
    let len = a.len().min(b.len());
    let prec = a.first().map(|z| z.prec().0).unwrap_or(DEFAULT_PRECISION);
    (0..len)
        .map(|k| {
            let mut acc = zero(prec);
            for i in 0..=k {
                acc += &a[i] * &b[k - i];
            }
            acc
        })
        .collect()
}

/// Taylor coefficients of `s^m` around `s`, `k = 0..=order`.
pub fn monomial_jet(s: &Complex, m: i64, order: usize) -> Vec<Complex> {
    let prec = s.prec().0;
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = Float::with_val(prec, 1);
    for k in 0..=order {
        if k > 0 {
            binom *= m - k as i64 + 1;
            binom /= k as u32;
        }
        if binom.is_zero() {
            out.push(zero(prec));
        } else {
            let mut t = powi(s, m - k as i64);
            t *= &binom;
            out.push(t);
        }
    }
    out
}

/// Lifts `x` through its shortest round-trip decimal form, so that inputs
/// written as decimals (`0.4096`) are carried as those decimals rather than
/// as their binary neighbours.
pub fn from_decimal(prec: u32, x: f64) -> Float {
    match Float::parse(format!("{x:e}")) {
        Ok(v) => Float::with_val(prec, v),
        Err(_) => Float::with_val(prec, x),
    }
}

/// A claim law carried at a fixed working precision.
#[derive(Debug, Clone)]
pub enum PreciseDist {
    Table { probs: Vec<Float>, min: usize },
    Poisson { lambda: Float, shift: usize },
}

impl PreciseDist {
    /// Tables are renormalized by their exact sum so that `G(1) = 1` holds at working precision.
    pub fn new(d: &DiscreteDist, prec: u32) -> Self {
        match d {
            DiscreteDist::FiniteTable { probs } => {
                let last = d.max_support().unwrap_or(0);
                let mut ps: Vec<Float> = probs[..=last].iter().map(|p| from_decimal(prec, *p)).collect();
                let total = Float::with_val(prec, Float::sum(ps.iter()));
                for p in ps.iter_mut() {
                    *p /= &total;
                }
                PreciseDist::Table {
                    probs: ps,
                    min: d.min_support(),
                }
            }
            DiscreteDist::DisplacedPoisson { lambda, shift } => PreciseDist::Poisson {
                lambda: from_decimal(prec, *lambda),
                shift: *shift,
            },
        }
    }

    pub fn prec(&self) -> u32 {
        match self {
            PreciseDist::Table { probs, .. } => probs[0].prec(),
            PreciseDist::Poisson { lambda, .. } => lambda.prec(),
        }
    }

    pub fn min_support(&self) -> usize {
        match self {
            PreciseDist::Table { min, .. } => *min,
            PreciseDist::Poisson { shift, .. } => *shift,
        }
    }

    pub fn pmf_vec(&self, len: usize) -> Vec<Float> {
        let prec = self.prec();
        match self {
            PreciseDist::Table { probs, .. } => (0..len)
                .map(|i| probs.get(i).cloned().unwrap_or_else(|| Float::new(prec)))
                .collect(),
            PreciseDist::Poisson { lambda, shift } => {
                let mut out = vec![Float::new(prec); len];
                let mut p = Float::with_val(prec, -lambda).exp();
                for k in 0..len.saturating_sub(*shift) {
                    if k > 0 {
                        p *= lambda;
                        p /= k as u32;
                    }
                    out[shift + k] = p.clone();
                }
                out
            }
        }
    }

    pub fn mean(&self) -> Float {
        let prec = self.prec();
        match self {
            PreciseDist::Table { probs, .. } => {
                let mut acc = Float::new(prec);
                for (i, p) in probs.iter().enumerate() {
                    acc += Float::with_val(prec, p * i as u32);
                }
                acc
            }
            PreciseDist::Poisson { lambda, shift } => Float::with_val(prec, lambda + *shift as u32),
        }
    }

    /// Taylor coefficients at `s` of `G(s)`, or of `G(s)/s^d` when `reduced`.
    pub fn jet(&self, s: &Complex, order: usize, reduced: bool) -> Vec<Complex> {
        let prec = s.prec().0;
        match self {
            PreciseDist::Table { probs, min } => {
                let start = if reduced { *min } else { 0 };
                let mut b: Vec<Complex> = probs[start..].iter().map(|p| real(prec, p)).collect();
                let deg = b.len() - 1;
                let mut out = Vec::with_capacity(order + 1);
                for k in 0..=order {
                    if k > deg {
                        out.push(zero(prec));
                        continue;
                    }
                    for i in (k..deg).rev() {
                        let carry = Complex::with_val(prec, &b[i + 1] * s);
                        b[i] += carry;
                    }
                    out.push(b[k].clone());
                }
                out
            }
            PreciseDist::Poisson { lambda, shift } => {
                let mut e = Complex::with_val(prec, s - 1u32);
                e *= lambda;
                let mut c = e.exp();
                let mut exp_jet = Vec::with_capacity(order + 1);
                for k in 0..=order {
                    if k > 0 {
                        c *= lambda;
                        c /= k as u32;
                    }
                    exp_jet.push(c.clone());
                }
                if reduced || *shift == 0 {
                    exp_jet
                } else {
                    jet_mul(&exp_jet, &monomial_jet(s, *shift as i64, order))
                }
            }
        }
    }

    pub fn value(&self, s: &Complex, reduced: bool) -> Complex {
        self.jet(s, 0, reduced).swap_remove(0)
    }
}

/// Every season of a model at one precision.
#[derive(Debug, Clone)]
pub struct PreciseModel {
    pub kappa: usize,
    pub seasons: Vec<PreciseDist>,
    pub prec: u32,
}

impl PreciseModel {
    pub fn new(model: &crate::model::RiskModel, prec: u32) -> Self {
        PreciseModel {
            kappa: model.kappa,
            seasons: model.seasons.iter().map(|d| PreciseDist::new(d, prec)).collect(),
            prec,
        }
    }

    pub fn n(&self) -> usize {
        self.seasons.len()
    }

    pub fn delta(&self) -> usize {
        self.seasons.iter().map(PreciseDist::min_support).sum()
    }

    /// `κN − δ`: degree of `s^{κN}/s^δ`.
    pub fn reduced_degree(&self) -> usize {
        self.kappa * self.n() - self.delta()
    }

    /// Jet of `G_{S_N}(s)/s^δ − s^{κN−δ}` at `s`.
    pub fn reduced_h_jet(&self, s: &Complex, order: usize) -> Vec<Complex> {
        let g = self.reduced_cycle_jet(s, order);
        let p = monomial_jet(s, self.reduced_degree() as i64, order);
        g.iter()
            .zip(&p)
            .map(|(a, b)| Complex::with_val(self.prec, a - b))
            .collect()
    }

    pub fn reduced_cycle_jet(&self, s: &Complex, order: usize) -> Vec<Complex> {
        let mut acc = self.seasons[0].jet(s, order, true);
        for d in &self.seasons[1..] {
            acc = jet_mul(&acc, &d.jet(s, order, true));
        }
        acc
    }

    /// `G_{S_N}(s) − s^{κN}` at full (unreduced) form.
    pub fn h(&self, s: &Complex) -> Complex {
        let mut g = one(self.prec);
        for d in &self.seasons {
            g *= d.value(s, false);
        }
        g -= powi(s, (self.kappa * self.n()) as i64);
        g
    }

    /// `|G̃(α)| + |α|^{κN−δ}`: the size of the two terms of `h̃` at `α`.
    pub fn reduced_scale(&self, alpha: &Complex) -> Float {
        let g = self.reduced_cycle_jet(alpha, 0).swap_remove(0);
        let mut out = abs(&g);
        out += abs(&powi(alpha, self.reduced_degree() as i64));
        out
    }
}

/// LU factorization with partial pivoting of a dense complex matrix.
#[derive(Debug, Clone)]
pub struct ComplexLu {
    lu: Vec<Vec<Complex>>,
    perm: Vec<usize>,
    swaps: usize,
    pub singular: bool,
}

fn cmp_norm(a: &Complex, b: &Complex) -> Ordering {
    let na = Float::with_val(a.prec().0, a.norm_ref());
    let nb = Float::with_val(b.prec().0, b.norm_ref());
    na.partial_cmp(&nb).unwrap_or(Ordering::Equal)
}

impl ComplexLu {
    pub fn new(mut a: Vec<Vec<Complex>>) -> Self {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| cmp_norm(&a[i][k], &a[j][k])).unwrap_or(k);
            if a[piv][k].is_zero() {
                singular = true;
                continue;
            }
            if piv != k {
                a.swap(piv, k);
                perm.swap(piv, k);
                swaps += 1;
            }
            let (top, rest) = a.split_at_mut(k + 1);
            let pivot_row = &top[k];
            for row in rest.iter_mut() {
                let f = Complex::with_val(pivot_row[k].prec().0, &row[k] / &pivot_row[k]);
                for c in k + 1..n {
                    let t = Complex::with_val(f.prec().0, &f * &pivot_row[c]);
                    row[c] -= t;
                }
                row[k] = f;
            }
        }
        ComplexLu {
            lu: a,
            perm,
            swaps,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.lu.len()
    }

    pub fn solve(&self, b: &[Complex]) -> Vec<Complex> {
        let n = self.dim();
        let mut x: Vec<Complex> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let t = Complex::with_val(x[i].prec().0, &self.lu[i][j] * &x[j]);
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = Complex::with_val(x[i].prec().0, &self.lu[i][j] * &x[j]);
                x[i] -= t;
            }
            x[i] /= &self.lu[i][i];
        }
        x
    }

    pub fn determinant(&self) -> Complex {
        let prec = self
            .lu
            .first()
            .map(|r| r[0].prec().0)
            .unwrap_or(DEFAULT_PRECISION);
        let mut d = one(prec);
        for i in 0..self.dim() {
            d *= &self.lu[i][i];
        }
        if self.swaps % 2 == 1 {
            d = -d;
        }
        d
    }

    /// Columns of the inverse.
    pub fn inverse_columns(&self) -> Vec<Vec<Complex>> {
        let n = self.dim();
        let prec = self
            .lu
            .first()
            .map(|r| r[0].prec().0)
            .unwrap_or(DEFAULT_PRECISION);
        (0..n)
            .map(|j| {
                let e: Vec<Complex> = (0..n)
                    .map(|i| if i == j { one(prec) } else { zero(prec) })
                    .collect();
                self.solve(&e)
            })
            .collect()
    }
}

/// Matrix 1-norm: maximum absolute column sum.
pub fn norm1(columns: &[Vec<Complex>]) -> f64 {
    columns
        .iter()
        .map(|c| c.iter().map(abs_f64).sum::<f64>())
        .fold(0.0, f64::max)
}
