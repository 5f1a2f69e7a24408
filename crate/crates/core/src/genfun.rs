//! The survival generating function `Ξ(s) = Σ_{u≥0} φ(u+1) s^u`.
//!
//! `Ξ(s) = uᵀv / (G_{S_N}(s) − s^{κN})` with
//! `u_k = s^{κ(N−k)} G_{X_1+…+X_{k−1}}(s)` and
//! `v_k = Σ_i m_i^{(k+1)} Σ_{j=i}^{κ−1} s^j F_{X_k}(j−i)` (season `N+1` is season 1).
//! Numerator and denominator share the factor `s^δ`, `δ = min-support(S_N)`,
//! which is cancelled before evaluating or expanding.

use num_complex::Complex64;
use rug::{Complex, Float};

use crate::error::{Error, Result};
use crate::model::RiskModel;
use crate::precise::{self, PreciseModel};
use crate::survival::AnalyticSolution;

/// Relative to `|G_{S_N}(s)/s^δ| + |s|^{κN−δ}`.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct XiFunction {
    pub model: RiskModel,
    /// `masses[j−1][i] = m_i^{(j)}`, `i < κ`.
    pub masses: Vec<Vec<f64>>,
    /// Series length the working precision was sized for.
    pub extent: usize,
    pm: PreciseModel,
    exact: Vec<Vec<Float>>,
}

impl XiFunction {
    /// Solves the model with precision sized for `n_terms` series coefficients.
    pub fn new(model: &RiskModel, n_terms: usize) -> Result<Self> {
        let sol = AnalyticSolution::new(model, n_terms.max(model.cycle_premium()))?;
        Ok(Self::from_solution(model, &sol, n_terms))
    }

    pub fn from_solution(model: &RiskModel, sol: &AnalyticSolution, n_terms: usize) -> Self {
        XiFunction {
            model: model.clone(),
            masses: sol.boundary.m.clone(),
            extent: n_terms,
            pm: sol.pm.clone(),
            exact: sol.boundary.exact.clone(),
        }
    }

    fn kappa(&self) -> usize {
        self.pm.kappa
    }

    fn n(&self) -> usize {
        self.pm.n()
    }

    /// Coefficients of `v_k` (1-based `k`), lowest power first, length `κ`.
    fn v_coeffs(&self, k: usize) -> Vec<Float> {
        let kappa = self.kappa();
        let prec = self.pm.prec;
        let season = k - 1;
        let masses = &self.exact[k % self.n()];
        let pmf = self.pm.seasons[season].pmf_vec(kappa);
        let mut cdf = Vec::with_capacity(kappa);
        let mut acc = Float::new(prec);
        for x in &pmf {
            acc += x;
            cdf.push(acc.clone());
        }
        (0..kappa)
            .map(|j| {
                let mut c = Float::new(prec);
                for i in 0..=j {
                    c += Float::with_val(prec, &masses[i] * &cdf[j - i]);
                }
                c
            })
            .collect()
    }

    /// Terms `u_k v_k / s^δ` at `s`, the reduced denominator `h(s)/s^δ`, and
    /// the numerator evaluated with every coefficient and factor in modulus.
    fn reduced_parts(&self, s: &Complex) -> Result<(Vec<Complex>, Complex, f64)> {
        let prec = self.pm.prec;
        let kappa = self.kappa();
        let n = self.n();
        let delta = self.pm.delta() as i64;
        let mut terms = Vec::with_capacity(n);
        let mut scale = 0.0;
        let r = precise::abs_f64(s);
        let mut prefix = precise::one(prec);
        let mut prefix_shift = 0i64;
        for k in 1..=n {
            let d = self.pm.seasons[k - 1].min_support();
            if d < kappa {
                let coeffs = self.v_coeffs(k);
                let mut v = precise::zero(prec);
                let mut v_abs = 0.0;
                for c in coeffs[d..].iter().rev() {
                    v *= s;
                    v += c;
                    v_abs = v_abs * r + c.to_f64().abs();
                }
                let e = (kappa * (n - k)) as i64 + prefix_shift + d as i64 - delta;
                if e < 0 && s.is_zero() {
                    return Err(Error::Domain(
                        "generating function numerator is not reducible termwise at s = 0".into(),
                    ));
                }
                let mut t = precise::powi(s, e);
                scale += precise::abs_f64(&t) * precise::abs_f64(&prefix) * v_abs;
                t *= &prefix;
                t *= &v;
                terms.push(t);
            }
            prefix *= self.pm.seasons[k - 1].value(s, true);
            prefix_shift += d as i64;
        }
        let denom = self.pm.reduced_h_jet(s, 0).swap_remove(0);
        Ok((terms, denom, scale))
    }

    /// `uᵀv / s^δ` and the same sum taken over the moduli of its coefficients.
    pub fn numerator(&self, s: Complex64) -> Result<(Complex64, f64)> {
        let z = precise::from_c64(self.pm.prec, s);
        let (terms, _, scale) = self.reduced_parts(&z)?;
        let mut sum = precise::zero(self.pm.prec);
        for t in &terms {
            sum += t;
        }
        Ok((precise::to_c64(&sum), scale))
    }
}

pub fn xi_eval(x: &XiFunction, s: Complex64) -> Result<Complex64> {
    if !(s.norm() < 1.0) {
        return Err(Error::Domain(format!(
            "Ξ is defined for |s| < 1, got |s| = {}",
            s.norm()
        )));
    }
    let z = precise::from_c64(x.pm.prec, s);
    let (terms, denom, _) = x.reduced_parts(&z)?;
    let scale = x.pm.reduced_scale(&z).to_f64();
    if precise::abs_f64(&denom) <= POLE_TOL * scale {
        return Err(Error::PoleProximity { re: s.re, im: s.im });
    }
    let mut num = precise::zero(x.pm.prec);
    for t in &terms {
        num += t;
    }
    Ok(precise::to_c64(&Complex::with_val(x.pm.prec, &num / &denom)))
}

fn series_mul(a: &[Float], b: &[Float], len: usize, prec: u32) -> Vec<Float> {
    let mut out = vec![Float::new(prec); len];
    for (i, ai) in a.iter().enumerate().take(len) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(len - i) {
            if !bj.is_zero() {
                out[i + j] += Float::with_val(prec, ai * bj);
            }
        }
    }
    out
}

/// `φ(1), …, φ(n_terms)` as Taylor coefficients of `Ξ` at 0, by power-series division.
pub fn xi_series(x: &XiFunction, n_terms: usize) -> Result<Vec<f64>> {
    if n_terms == 0 {
        return Err(Error::InvalidArgument("n_terms must be at least 1".into()));
    }
    if n_terms > x.extent {
        return xi_series(&XiFunction::new(&x.model, n_terms)?, n_terms);
    }
    let pm = &x.pm;
    let prec = pm.prec;
    let kappa = pm.kappa;
    let n = pm.n();
    let delta = pm.delta();
    let len = n_terms + delta;
    let pmfs: Vec<Vec<Float>> = pm.seasons.iter().map(|d| d.pmf_vec(len)).collect();

    let mut numer = vec![Float::new(prec); len];
    let mut prefix = vec![Float::with_val(prec, 1)];
    for k in 1..=n {
        let shift = kappa * (n - k);
        let v = x.v_coeffs(k);
        if shift < len {
            let uv = series_mul(&prefix, &v, len - shift, prec);
            for (i, c) in uv.into_iter().enumerate() {
                numer[shift + i] += c;
            }
        }
        prefix = series_mul(&prefix, &pmfs[k - 1], len, prec);
    }
    let mut denom = prefix;
    if kappa * n < len {
        denom[kappa * n] -= 1u32;
    }
    let a = &numer[delta..];
    let b = &denom[delta..];
    let mut q: Vec<Float> = Vec::with_capacity(n_terms);
    for k in 0..n_terms {
        let mut acc = a[k].clone();
        for i in 1..=k {
            if !b[i].is_zero() {
                acc -= Float::with_val(prec, &b[i] * &q[k - i]);
            }
        }
        acc /= &b[0];
        q.push(acc);
    }
    Ok(q.iter().map(|c| c.to_f64()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDist;

    fn example1() -> RiskModel {
        RiskModel::new(
            2,
            vec![
                DiscreteDist::poisson(1.0, 0).unwrap(),
                DiscreteDist::poisson(2.0, 0).unwrap(),
            ],
        )
        .unwrap()
    }

    fn example3() -> RiskModel {
        RiskModel::new(
            3,
            vec![
                DiscreteDist::table(vec![0.4096, 0.4096, 0.1536, 0.0256, 0.0016]).unwrap(),
                DiscreteDist::table(vec![0.04, 0.32, 0.64]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn xi_at_zero_is_phi_one() {
        let x = XiFunction::new(&example1(), 10).unwrap();
        let v = xi_eval(&x, Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.re - x.masses[0][0]).abs() < 1e-14);
        assert!((v.re - 0.6501).abs() < 5e-5);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn example_two_reduced_form() {
        let m = RiskModel::new(
            2,
            vec![
                DiscreteDist::poisson(1.0, 1).unwrap(),
                DiscreteDist::poisson(0.9, 1).unwrap(),
            ],
        )
        .unwrap();
        let x = XiFunction::new(&m, 10).unwrap();
        let v = xi_eval(&x, Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.re - 0.1270).abs() < 1e-4);
    }

    #[test]
    fn example_three_closed_form() {
        let x = XiFunction::new(&example3(), 10).unwrap();
        for s in [
            Complex64::new(0.3, 0.2),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, 0.9),
        ] {
            let expect = 1.0 / (1.0 - s) - 0.0016;
            assert!((xi_eval(&x, s).unwrap() - expect).norm() < 1e-12);
        }
        let series = xi_series(&x, 4).unwrap();
        for (c, e) in series.iter().zip([0.9984, 1.0, 1.0, 1.0]) {
            assert!((c - e).abs() < 1e-12);
        }
    }

    #[test]
    fn series_matches_table_one() {
        let x = XiFunction::new(&example1(), 5).unwrap();
        let s = xi_series(&x, 5).unwrap();
        for (c, e) in s.iter().zip([0.650, 0.790, 0.876, 0.928, 0.958]) {
            assert!((c - e).abs() < 1e-3);
        }
    }

    #[test]
    fn domain_and_poles() {
        let x = XiFunction::new(&example1(), 5).unwrap();
        assert!(matches!(
            xi_eval(&x, Complex64::new(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
        let rs = crate::roots::characteristic_roots(&example1(), &Default::default()).unwrap();
        let alpha = rs.roots[0].value;
        assert!(matches!(xi_eval(&x, alpha), Err(Error::PoleProximity { .. })));
        let (num, scale) = x.numerator(alpha).unwrap();
        assert!(num.norm() <= 1e-8 * scale);
        assert!(xi_series(&x, 0).is_err());
    }
}
