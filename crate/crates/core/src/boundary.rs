//! The boundary linear system for the masses `m_i^{(j)} = P(M_j = i)`, `i < κ`.
//!
//! Columns are ordered season-major: `(j, i)` sits at `(j−1)κ + i` before
//! reduction.  Each nonzero characteristic root of multiplicity `r`
//! contributes `r` rows (Taylor coefficients `0..r`), and the mean identity
//! closes the system.  Columns whose coefficients vanish identically, or whose
//! masses are forced to zero by the support of the claims, are dropped.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rug::{Complex, Float};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{net_profit_margin, RiskModel};
use crate::precise::{self, ComplexLu, PreciseModel};
use crate::random::{random_model, RandomModelSpec};
use crate::roots::{characteristic_roots, RootConfig, RootSet};

pub const CONDITION_LIMIT: f64 = 1e12;
pub const IMAGINARY_TOL: f64 = 1e-8;
pub const CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowTag {
    /// Taylor coefficient `order` of the root identity at root number `root`.
    Root {
        root: usize,
        order: usize,
    },
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ColumnState {
    Solved,
    /// Coefficient vanishes at every root and in the mean row.
    ZeroColumn,
    /// The mass is zero because `M_j` cannot take that value.
    KnownZero,
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub kappa: usize,
    pub n_seasons: usize,
    pub row_tags: Vec<RowTag>,
    /// `(j, i)` with `j` 1-based, for each surviving column.
    pub column_map: Vec<(usize, usize)>,
    pub dropped: Vec<(usize, usize, ColumnState)>,
    /// Set when the reduction went beyond the plain zero-column rule.
    pub irregular: bool,
    pub precision_bits: u32,
    matrix: Vec<Vec<Complex>>,
    rhs: Vec<Complex>,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.column_map.len()
    }

    pub fn matrix(&self) -> Vec<Vec<Complex64>> {
        self.matrix
            .iter()
            .map(|r| r.iter().map(precise::to_c64).collect())
            .collect()
    }

    pub fn rhs(&self) -> Vec<Complex64> {
        self.rhs.iter().map(precise::to_c64).collect()
    }

    pub fn exact_matrix(&self) -> &[Vec<Complex>] {
        &self.matrix
    }

    pub fn exact_rhs(&self) -> &[Complex] {
        &self.rhs
    }

    /// Rows scaled to unit max-modulus, with the scale factors.
    fn equilibrated(&self) -> (Vec<Vec<Complex>>, Vec<Complex>, Vec<Float>) {
        let prec = self.precision_bits;
        let mut scales = Vec::with_capacity(self.matrix.len());
        let mut m = self.matrix.clone();
        let mut b = self.rhs.clone();
        for (row, rhs) in m.iter_mut().zip(b.iter_mut()) {
            let s = row
                .iter()
                .map(precise::abs)
                .fold(Float::new(prec), |a, x| if x > a { x } else { a });
            if !s.is_zero() {
                for c in row.iter_mut() {
                    *c /= &s;
                }
                *rhs /= &s;
            }
            scales.push(s);
        }
        (m, b, scales)
    }

    /// Determinant of the unscaled matrix.
    pub fn determinant(&self) -> Complex64 {
        precise::to_c64(&ComplexLu::new(self.matrix.clone()).determinant())
    }

    /// 1-norm condition number of the row-equilibrated matrix.
    pub fn condition_number(&self) -> f64 {
        let (m, _, _) = self.equilibrated();
        condition_of(&m, &ComplexLu::new(m.clone()))
    }
}

fn condition_of(m: &[Vec<Complex>], lu: &ComplexLu) -> f64 {
    if lu.singular {
        return f64::INFINITY;
    }
    let n = m.len();
    let cols: Vec<Vec<Complex>> = (0..n).map(|j| m.iter().map(|r| r[j].clone()).collect()).collect();
    precise::norm1(&cols) * precise::norm1(&lu.inverse_columns())
}

/// `D_j`: the smallest value `M_j` can take.
fn minimal_supremum(mins: &[usize], kappa: usize, j: usize) -> usize {
    let n = mins.len();
    let mut best = 0i64;
    let mut acc = 0i64;
    for l in 0..n {
        acc += mins[(j + l) % n] as i64 - kappa as i64;
        best = best.max(acc);
    }
    best as usize
}

/// Column classification before reduction, indexed `[j][i]` with `j` 0-based.
pub(crate) fn column_states(model: &RiskModel) -> Vec<Vec<ColumnState>> {
    let kappa = model.kappa;
    let n = model.n_seasons();
    let mins: Vec<usize> = model.seasons.iter().map(|d| d.min_support()).collect();
    (0..n)
        .map(|j| {
            let dp = mins[model.prev(j)];
            let floor = minimal_supremum(&mins, kappa, j);
            (0..kappa)
                .map(|i| {
                    if i + dp >= kappa {
                        ColumnState::ZeroColumn
                    } else if i < floor {
                        ColumnState::KnownZero
                    } else {
                        ColumnState::Solved
                    }
                })
                .collect()
        })
        .collect()
}

pub fn build_system(model: &RiskModel, roots: &RootSet) -> Result<AssembledSystem> {
    build_at(model, roots, &PreciseModel::new(model, roots.precision_bits))
}

fn build_at(model: &RiskModel, roots: &RootSet, pm: &PreciseModel) -> Result<AssembledSystem> {
    let margin = net_profit_margin(model);
    if margin <= 0.0 {
        return Err(Error::NetProfitViolated {
            mean_claims: model.mean_cycle_claims(),
            premium: model.cycle_premium() as f64,
        });
    }
    let prec = pm.prec;
    let kappa = model.kappa;
    let n = model.n_seasons();
    let states = column_states(model);
    let mut column_map = Vec::new();
    let mut dropped = Vec::new();
    for (j, row) in states.iter().enumerate() {
        for (i, st) in row.iter().enumerate() {
            match st {
                ColumnState::Solved => column_map.push((j + 1, i)),
                s => dropped.push((j + 1, i, *s)),
            }
        }
    }
    let irregular = dropped.iter().any(|d| d.2 == ColumnState::KnownZero);

    // F_{p(j)}(0..κ) and x^{(p(j))}_{0..κ}, p(j) the preceding season
    let pmfs: Vec<Vec<Float>> = pm.seasons.iter().map(|d| d.pmf_vec(kappa)).collect();
    let cdfs: Vec<Vec<Float>> = pmfs
        .iter()
        .map(|p| {
            let mut acc = Float::new(prec);
            p.iter()
                .map(|x| {
                    acc += x;
                    acc.clone()
                })
                .collect()
        })
        .collect();

    let mut matrix = Vec::new();
    let mut row_tags = Vec::new();
    for (ri, root) in roots.roots.iter().enumerate() {
        if root.at_zero {
            continue;
        }
        let alpha = Complex::with_val(prec, root.exact());
        let r = root.multiplicity;
        // prefix jets: P_1 = 1, P_j = G_{X_N} G_{X_1} ⋯ G_{X_{j−2}}
        let mut prefix: Vec<Vec<Complex>> = Vec::with_capacity(n);
        let mut acc: Vec<Complex> = (0..r)
            .map(|k| {
                if k == 0 {
                    precise::one(prec)
                } else {
                    precise::zero(prec)
                }
            })
            .collect();
        for j in 0..n {
            if j > 0 {
                let factor = if j == 1 { n - 1 } else { j - 2 };
                acc = precise::jet_mul(&acc, &pm.seasons[factor].jet(&alpha, r - 1, false));
            }
            prefix.push(acc.clone());
        }
        // coefficient jets of P_j(s) s^{l − κ(j−1)}, l = 0..κ
        let blocks: Vec<Vec<Vec<Complex>>> = (0..n)
            .map(|j| {
                (0..kappa)
                    .map(|l| {
                        let m = l as i64 - (kappa * j) as i64;
                        precise::jet_mul(&prefix[j], &precise::monomial_jet(&alpha, m, r - 1))
                    })
                    .collect()
            })
            .collect();
        for order in 0..r {
            let row: Vec<Complex> = column_map
                .iter()
                .map(|&(j1, i)| {
                    let j = j1 - 1;
                    let p = model.prev(j);
                    let mut e = precise::zero(prec);
                    for l in i..kappa {
                        let f = &cdfs[p][l - i];
                        if !f.is_zero() {
                            e += Complex::with_val(prec, &blocks[j][l][order] * f);
                        }
                    }
                    e
                })
                .collect();
            matrix.push(row);
            row_tags.push(RowTag::Root { root: ri, order });
        }
    }
    let mean_row: Vec<Complex> = column_map
        .iter()
        .map(|&(j1, i)| {
            let p = model.prev(j1 - 1);
            let mut e = Float::new(prec);
            for l in 0..kappa - i {
                e += Float::with_val(prec, &pmfs[p][l] * (kappa - i - l) as u32);
            }
            precise::real(prec, &e)
        })
        .collect();
    matrix.push(mean_row);
    row_tags.push(RowTag::Mean);

    let mut mean = Float::new(prec);
    for d in &pm.seasons {
        mean += d.mean();
    }
    let rhs_last = Float::with_val(prec, (kappa * n) as u32 - mean);
    let mut rhs = vec![precise::zero(prec); matrix.len()];
    *rhs.last_mut().unwrap() = precise::real(prec, &rhs_last);

    if matrix.len() != column_map.len() {
        return Err(Error::DimensionMismatch {
            rows: matrix.len(),
            cols: column_map.len(),
        });
    }
    Ok(AssembledSystem {
        kappa,
        n_seasons: n,
        row_tags,
        column_map,
        dropped,
        irregular,
        precision_bits: prec,
        matrix,
        rhs,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Residuals {
    /// Simple-root rows, after row equilibration.
    pub root: f64,
    /// Derivative rows of multiple roots, after row equilibration.
    pub derivative: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct BoundaryMasses {
    pub kappa: usize,
    pub n_seasons: usize,
    /// `m[j−1][i] = m_i^{(j)}`, clamped to `[0, 1]`.
    pub m: Vec<Vec<f64>>,
    pub state: Vec<Vec<ColumnState>>,
    pub condition: f64,
    pub determinant: Complex64,
    pub residuals: Residuals,
    pub irregular: bool,
    pub precision_bits: u32,
    pub(crate) exact: Vec<Vec<Float>>,
}

impl BoundaryMasses {
    /// `m_i^{(j)}` with `j` 1-based.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.m[j - 1][i]
    }

    /// Solved unknowns in column order.
    pub fn solution(&self) -> Vec<f64> {
        self.m.iter().flatten().copied().collect()
    }
}

pub fn solve_boundary(model: &RiskModel, roots: &RootSet) -> Result<BoundaryMasses> {
    let sys = build_system(model, roots)?;
    solve_system(&sys)
}

pub fn solve_system(sys: &AssembledSystem) -> Result<BoundaryMasses> {
    let prec = sys.precision_bits;
    let (m, b, scales) = sys.equilibrated();
    let lu = ComplexLu::new(m.clone());
    let mut det = lu.determinant();
    for s in &scales {
        det *= s;
    }
    let determinant = precise::to_c64(&det);
    let condition = condition_of(&m, &lu);
    if lu.singular || !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularSystem {
            condition,
            determinant: determinant.norm(),
        });
    }
    let x = lu.solve(&b);
    let max_imag = x.iter().map(|z| z.imag().to_f64().abs()).fold(0.0, f64::max);
    if max_imag > IMAGINARY_TOL {
        return Err(Error::ImaginaryResidue { max_imag });
    }

    let (kappa, n) = (sys.kappa, sys.n_seasons);
    let mut exact = vec![vec![Float::new(prec); kappa]; n];
    let mut state = vec![vec![ColumnState::Solved; kappa]; n];
    for &(j, i, s) in &sys.dropped {
        state[j - 1][i] = s;
    }
    for (&(j, i), z) in sys.column_map.iter().zip(&x) {
        exact[j - 1][i] = Float::with_val(prec, z.real());
    }
    let mut out = vec![vec![0.0; kappa]; n];
    for j in 0..n {
        for i in 0..kappa {
            let v = exact[j][i].to_f64();
            if v < -CLAMP_TOL {
                return Err(Error::NegativeMass {
                    season: j + 1,
                    index: i,
                    value: v,
                });
            }
            out[j][i] = v.clamp(0.0, 1.0);
        }
    }

    // residuals with the rounded masses, rows scaled to unit max-modulus
    let xr: Vec<Complex> = sys
        .column_map
        .iter()
        .map(|&(j, i)| precise::from_c64(prec, Complex64::new(out[j - 1][i], 0.0)))
        .collect();
    let mut residuals = Residuals::default();
    let roots_mult: Vec<bool> =
        sys.row_tags
            .iter()
            .map(|t| match t {
                RowTag::Root { root, order } => {
                    *order > 0
                        || sys.row_tags.iter().any(
                            |u| matches!(u, RowTag::Root { root: r2, order: o2 } if r2 == root && *o2 > 0),
                        )
                }
                RowTag::Mean => false,
            })
            .collect();
    for (k, (row, tag)) in m.iter().zip(&sys.row_tags).enumerate() {
        let mut acc = Complex::with_val(prec, -&b[k]);
        for (a, xv) in row.iter().zip(&xr) {
            acc += Complex::with_val(prec, a * xv);
        }
        let r = precise::abs_f64(&acc);
        match tag {
            RowTag::Mean => residuals.mean = r * scales[k].to_f64(),
            RowTag::Root { .. } if roots_mult[k] => residuals.derivative = residuals.derivative.max(r),
            RowTag::Root { .. } => residuals.root = residuals.root.max(r),
        }
    }

    Ok(BoundaryMasses {
        kappa,
        n_seasons: n,
        m: out,
        state,
        condition,
        determinant,
        residuals,
        irregular: sys.irregular,
        precision_bits: prec,
        exact,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSample {
    pub trial: usize,
    pub kappa: usize,
    pub seasons: usize,
    pub condition: f64,
    pub abs_determinant: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub seed: u64,
    pub kappa_max: usize,
    pub n_max: usize,
    pub min_abs_determinant: f64,
    pub max_condition: f64,
    /// Samples whose condition number exceeded the singularity threshold.
    pub singular_instances: usize,
    /// Samples that failed for any reason, including singular ones.
    pub findings: Vec<ProbeSample>,
}

/// Random search for singular boundary systems among models with `P(X_j = 0) > 0`.
pub fn probe_conjecture(kappa_max: usize, n_max: usize, trials: usize, seed: u64) -> Result<ProbeReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if kappa_max == 0 || n_max == 0 {
        return Err(Error::InvalidArgument(
            "kappa_max and n_max must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomModelSpec {
        kappa_max,
        n_max,
        max_claim: 4,
        positive_zero_mass: true,
    };
    let mut report = ProbeReport {
        trials,
        seed,
        kappa_max,
        n_max,
        min_abs_determinant: f64::INFINITY,
        max_condition: 0.0,
        singular_instances: 0,
        findings: Vec::new(),
    };
    for trial in 0..trials {
        let model = random_model(&mut rng, &spec);
        let mut sample = ProbeSample {
            trial,
            kappa: model.kappa,
            seasons: model.n_seasons(),
            condition: f64::NAN,
            abs_determinant: f64::NAN,
            error: None,
        };
        let outcome =
            characteristic_roots(&model, &RootConfig::default()).and_then(|rs| build_system(&model, &rs));
        match outcome {
            Ok(sys) => {
                sample.condition = sys.condition_number();
                sample.abs_determinant = sys.determinant().norm();
                report.min_abs_determinant = report.min_abs_determinant.min(sample.abs_determinant);
                report.max_condition = report.max_condition.max(sample.condition);
                if !(sample.condition <= CONDITION_LIMIT) {
                    report.singular_instances += 1;
                    sample.error = Some("condition number above threshold".into());
                    report.findings.push(sample);
                }
            }
            Err(e) => {
                sample.error = Some(e.to_string());
                report.findings.push(sample);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDist;

    fn poisson(l: f64, s: usize) -> DiscreteDist {
        DiscreteDist::poisson(l, s).unwrap()
    }

    fn solve(model: &RiskModel) -> BoundaryMasses {
        let rs = characteristic_roots(model, &RootConfig::default()).unwrap();
        solve_boundary(model, &rs).unwrap()
    }

    #[test]
    fn example_one_masses() {
        let m = RiskModel::new(2, vec![poisson(1.0, 0), poisson(2.0, 0)]).unwrap();
        let b = solve(&m);
        let expect = [0.6501, 0.1395, 0.5083, 0.1855];
        for (x, e) in b.solution().iter().zip(expect) {
            assert!((x - e).abs() < 5e-5, "{x} vs {e}");
        }
        assert!(b.residuals.root < 1e-8);
        assert!(b.residuals.mean < 1e-10);
    }

    #[test]
    fn example_two_reduces_to_two_columns() {
        let m = RiskModel::new(2, vec![poisson(1.0, 1), poisson(0.9, 1)]).unwrap();
        let rs = characteristic_roots(&m, &RootConfig::default()).unwrap();
        let sys = build_system(&m, &rs).unwrap();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.column_map, vec![(1, 0), (2, 0)]);
        assert!(!sys.irregular);
        let b = solve_system(&sys).unwrap();
        assert!((b.get(1, 0) - 0.126953565016641396).abs() < 1e-15);
        assert!((b.get(2, 0) - 0.131522794843486531).abs() < 1e-15);
        assert_eq!(b.state[0][1], ColumnState::ZeroColumn);
    }

    #[test]
    fn example_three_uses_a_derivative_row() {
        let m = RiskModel::new(
            3,
            vec![
                DiscreteDist::table(vec![0.4096, 0.4096, 0.1536, 0.0256, 0.0016]).unwrap(),
                DiscreteDist::table(vec![0.04, 0.32, 0.64]).unwrap(),
            ],
        )
        .unwrap();
        let rs = characteristic_roots(&m, &RootConfig::default()).unwrap();
        let sys = build_system(&m, &rs).unwrap();
        assert_eq!(sys.dim(), 6);
        assert_eq!(
            sys.row_tags
                .iter()
                .filter(|t| matches!(t, RowTag::Root { order: 1, .. }))
                .count(),
            1
        );
        let b = solve_system(&sys).unwrap();
        let expect = [0.9984, 0.0016, 0.0, 1.0, 0.0, 0.0];
        for (x, e) in b.solution().iter().zip(expect) {
            assert!((x - e).abs() < 1e-12, "{x} vs {e}");
        }
        assert!(b.residuals.derivative < 1e-6);
    }

    #[test]
    fn single_season_unit_premium() {
        // κ = N = 1: m_0 = (1 − EX)/x_0
        let d = DiscreteDist::table(vec![0.6, 0.25, 0.15]).unwrap();
        let m = RiskModel::new(1, vec![d.clone()]).unwrap();
        let b = solve(&m);
        assert!((b.get(1, 0) - (1.0 - d.mean()) / 0.6).abs() < 1e-14);
    }

    #[test]
    fn probe_rejects_zero_trials() {
        assert!(probe_conjecture(2, 2, 0, 1).is_err());
    }

    #[test]
    fn probe_single_cell_determinant_is_x0() {
        let r = probe_conjecture(1, 1, 20, 5).unwrap();
        assert_eq!(r.singular_instances, 0);
        assert!(r.findings.is_empty());
    }

    #[test]
    fn minimal_supremum_examples() {
        assert_eq!(minimal_supremum(&[1, 1], 2, 0), 0);
        assert_eq!(minimal_supremum(&[3, 0], 2, 0), 1);
        assert_eq!(minimal_supremum(&[3, 0], 2, 1), 0);
    }
}
