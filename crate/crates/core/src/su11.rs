//! SU(1,1) ladder operators on the dual state space and on polynomials, and
//! the matrix checks of the symmetry statements.
//!
//! Operators act on functions. A [`SectorOperator`] evaluates its result at
//! the states of `source_total` and reads its argument on `target_total`:
//! `(A f)(n, N - n) = sum_j A[n, j] f(j, N' - j)`. With that convention
//! `K_1^+ + K_2^+` reads one sector up, so it maps sector-`(N+1)` functions to
//! sector-`N` functions, and `K^-` reads one sector down.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dual::{sector_generator, transient_matrix, DiscreteGammaMeasure};
use crate::duality::{duality_monomial, self_duality_two_site};
use crate::error::{Error, Result};
use crate::specialfn::{site_weight, ModelParams};

/// Dense operator between two conserved-total sectors, rows indexed by the
/// first-vertex count in `source_total`, columns by the first-vertex count in
/// `target_total`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorOperator {
    source_total: u64,
    target_total: u64,
    matrix: DMatrix<f64>,
}

impl SectorOperator {
    pub fn new(source_total: u64, target_total: u64, matrix: DMatrix<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), source_total as usize + 1);
        Self {
            source_total,
            target_total,
            matrix,
        }
    }

    pub fn source_total(&self) -> u64 {
        self.source_total
    }

    pub fn target_total(&self) -> u64 {
        self.target_total
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SectorOperator) -> Result<SectorOperator> {
        if self.matrix.ncols() != other.matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.ncols(),
                got: other.matrix.nrows(),
            });
        }
        Ok(SectorOperator {
            source_total: self.source_total,
            target_total: other.target_total,
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// Largest entrywise difference to an operator of the same shape.
    pub fn max_diff(&self, other: &SectorOperator) -> f64 {
        assert_eq!(self.matrix.shape(), other.matrix.shape());
        (&self.matrix - &other.matrix).amax()
    }
}

/// Which ladder operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ladder {
    Plus,
    Minus,
    Zero,
}

impl Ladder {
    pub const ALL: [Ladder; 3] = [Ladder::Plus, Ladder::Minus, Ladder::Zero];

    pub fn name(&self) -> &'static str {
        match self {
            Ladder::Plus => "plus",
            Ladder::Minus => "minus",
            Ladder::Zero => "zero",
        }
    }
}

/// Matrix of `K_1^α + K_2^α` with rows on sector `total`.
///
/// * plus: `(s+t+n) f(n+1, m) + (s+t+m) f(n, m+1)`, reads sector `total + 1`
/// * minus: `n f(n-1, m) + m f(n, m-1)`, reads sector `total - 1`; the zero map on `total = 0`
/// * zero: `(s+t+total) f(n, m)`
pub fn build_k_operator(params: &ModelParams, kind: Ladder, total: u64) -> SectorOperator {
    let a = params.shape();
    let rows = total as usize + 1;
    match kind {
        Ladder::Plus => {
            let mut m = DMatrix::zeros(rows, rows + 1);
            for n in 0..rows {
                let other = (rows - 1 - n) as f64;
                m[(n, n + 1)] += a + n as f64;
                m[(n, n)] += a + other;
            }
            SectorOperator::new(total, total + 1, m)
        }
        Ladder::Minus => {
            if total == 0 {
                return SectorOperator::new(0, 0, DMatrix::zeros(1, 0));
            }
            let mut m = DMatrix::zeros(rows, rows - 1);
            for n in 0..rows {
                let other = rows - 1 - n;
                if n > 0 {
                    m[(n, n - 1)] += n as f64;
                }
                if other > 0 {
                    m[(n, n)] += other as f64;
                }
            }
            SectorOperator::new(total, total - 1, m)
        }
        Ladder::Zero => {
            let m = DMatrix::identity(rows, rows) * (a + total as f64);
            SectorOperator::new(total, total, m)
        }
    }
}

/// `max over N in totals` of `|ℒ K^α - K^α ℒ|` with sectors aligned.
pub fn verify_commutation(params: &ModelParams, kind: Ladder, totals: impl IntoIterator<Item = u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for total in totals {
        let target = match kind {
            Ladder::Plus => total + 1,
            Ladder::Minus if total == 0 => continue,
            Ladder::Minus => total - 1,
            Ladder::Zero => total,
        };
        let k = build_k_operator(params, kind, total);
        let gen_here = sector_generator(params, total);
        let gen_there = sector_generator(params, target);
        let left = gen_here.compose(&k).expect("aligned sectors");
        let right = k.compose(&gen_there).expect("aligned sectors");
        worst = worst.max(left.max_diff(&right));
    }
    worst
}

/// A single-site operator on `{0..=n_max}` with the rows that are unaffected by
/// the truncation marked.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub matrix: DMatrix<f64>,
    pub exact_rows: Vec<bool>,
}

impl TruncatedOperator {
    /// `K^α` on one site. Only `K^+` loses a row: at `n_max` it would read
    /// `f(n_max + 1)`.
    pub fn single_site(params: &ModelParams, kind: Ladder, n_max: usize) -> Self {
        let a = params.shape();
        let size = n_max + 1;
        let mut m = DMatrix::zeros(size, size);
        let mut exact = vec![true; size];
        match kind {
            Ladder::Plus => {
                for n in 0..n_max {
                    m[(n, n + 1)] = a + n as f64;
                }
                exact[n_max] = false;
            }
            Ladder::Minus => {
                for n in 1..size {
                    m[(n, n - 1)] = n as f64;
                }
            }
            Ladder::Zero => {
                for n in 0..size {
                    m[(n, n)] = a / 2.0 + n as f64;
                }
            }
        }
        Self { matrix: m, exact_rows: exact }
    }

    /// Row `i` of a product is exact when row `i` of `self` is exact and every
    /// row of `other` that it touches is exact.
    pub fn mul(&self, other: &TruncatedOperator) -> TruncatedOperator {
        let matrix = &self.matrix * &other.matrix;
        let exact_rows = (0..self.matrix.nrows())
            .map(|i| {
                self.exact_rows[i]
                    && (0..self.matrix.ncols()).all(|j| self.matrix[(i, j)] == 0.0 || other.exact_rows[j])
            })
            .collect();
        TruncatedOperator { matrix, exact_rows }
    }

    pub fn combine(&self, other: &TruncatedOperator, a: f64, b: f64) -> TruncatedOperator {
        TruncatedOperator {
            matrix: &self.matrix * a + &other.matrix * b,
            exact_rows: self.exact_rows.iter().zip(&other.exact_rows).map(|(x, y)| *x && *y).collect(),
        }
    }

    pub fn commutator(&self, other: &TruncatedOperator) -> TruncatedOperator {
        self.mul(other).combine(&other.mul(self), 1.0, -1.0)
    }

    /// Largest entry difference restricted to rows exact in both.
    pub fn interior_diff(&self, other: &TruncatedOperator) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.matrix.nrows() {
            if self.exact_rows[i] && other.exact_rows[i] {
                for j in 0..self.matrix.ncols() {
                    worst = worst.max((self.matrix[(i, j)] - other.matrix[(i, j)]).abs());
                }
            }
        }
        worst
    }

    pub fn interior_rows(&self) -> usize {
        self.exact_rows.iter().filter(|e| **e).count()
    }
}

/// Residuals of `[K^+, K^-] = 2K^0`, `[K^+, K^0] = K^+`, `[K^-, K^0] = -K^-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraResiduals {
    pub plus_minus: f64,
    pub plus_zero: f64,
    pub minus_zero: f64,
    /// Rows compared for `[K^+, K^-]`.
    pub interior_rows: usize,
}

impl AlgebraResiduals {
    pub fn max(&self) -> f64 {
        self.plus_minus.max(self.plus_zero).max(self.minus_zero)
    }
}

/// The SU(1,1) commutation relations of the single-site operators on
/// `{0..=n_max}`, checked on the rows the truncation does not reach.
pub fn verify_su11_relations(params: &ModelParams, n_max: usize) -> AlgebraResiduals {
    let plus = TruncatedOperator::single_site(params, Ladder::Plus, n_max);
    let minus = TruncatedOperator::single_site(params, Ladder::Minus, n_max);
    let zero = TruncatedOperator::single_site(params, Ladder::Zero, n_max);

    let pm = plus.commutator(&minus);
    let two_zero = zero.combine(&zero, 1.0, 1.0);
    let pz = plus.commutator(&zero);
    let mz = minus.commutator(&zero);
    let neg_minus = minus.combine(&minus, -1.0, 0.0);
    AlgebraResiduals {
        plus_minus: pm.interior_diff(&two_zero),
        plus_zero: pz.interior_diff(&plus),
        minus_zero: mz.interior_diff(&neg_minus),
        interior_rows: pm.interior_rows(),
    }
}

/// `W K^+ = θ^{-1} (K^-)^T W` with `W = diag(ν_θ)` on functions supported on
/// `{0..n_max-1}`; returns the largest difference relative to the largest
/// entry.
pub fn verify_adjointness(params: &ModelParams, theta: f64, n_max: usize) -> Result<f64> {
    let measure = DiscreteGammaMeasure::with_truncation(*params, theta, n_max as u64)?;
    let plus = TruncatedOperator::single_site(params, Ladder::Plus, n_max).matrix;
    let minus = TruncatedOperator::single_site(params, Ladder::Minus, n_max).matrix;
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n_max + 1,
        (0..=n_max as u64).map(|n| measure.pmf(n)),
    ));
    let lhs = &w * &plus;
    let rhs = minus.transpose() * &w / theta;
    let block = n_max;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..block {
        for j in 0..block {
            worst = worst.max((lhs[(i, j)] - rhs[(i, j)]).abs());
            scale = scale.max(lhs[(i, j)].abs());
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Ladder operators on polynomials in one variable:
/// `𝒦^+ = x`, `𝒦^- = x ∂² + (s+t) ∂`, `𝒦^0 = x ∂ + (s+t)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonomialOperator {
    pub kind: Ladder,
    pub shape: f64,
}

impl MonomialOperator {
    pub fn new(params: &ModelParams, kind: Ladder) -> Self {
        Self {
            kind,
            shape: params.shape(),
        }
    }

    /// Image of `x^n` as `(exponent, coefficient)` terms.
    pub fn apply_monomial(&self, n: u64) -> Vec<(u64, f64)> {
        let nf = n as f64;
        match self.kind {
            Ladder::Plus => vec![(n + 1, 1.0)],
            Ladder::Minus if n == 0 => vec![],
            Ladder::Minus => vec![(n - 1, nf * (nf - 1.0) + self.shape * nf)],
            Ladder::Zero => vec![(n, nf + self.shape / 2.0)],
        }
    }

    /// Image of a polynomial given by ascending coefficients.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; coeffs.len() + 1];
        for (n, &c) in coeffs.iter().enumerate() {
            for (e, w) in self.apply_monomial(n as u64) {
                out[e as usize] += c * w;
            }
        }
        out
    }
}

/// Coefficients of `d_{s,t}(n, x) = c_n x^n`, padded to `len`.
fn duality_coeffs(params: &ModelParams, n: u64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[n as usize] = duality_monomial(params, n, 1.0);
    v
}

/// `𝒦^α d(n, ·) = K^α d(·, x)[n]` coefficientwise for `n <= n_max` and all `α`;
/// returns the largest difference relative to the coefficient size.
pub fn verify_intertwining(params: &ModelParams, n_max: u64) -> f64 {
    let a = params.shape();
    let len = n_max as usize + 2;
    let mut worst: f64 = 0.0;
    for kind in Ladder::ALL {
        let op = MonomialOperator::new(params, kind);
        for n in 0..=n_max {
            let mut continuous = op.apply(&duality_coeffs(params, n, len - 1));
            continuous.resize(len, 0.0);
            let discrete: Vec<f64> = match kind {
                Ladder::Plus => duality_coeffs(params, n + 1, len).iter().map(|c| c * (a + n as f64)).collect(),
                Ladder::Minus if n == 0 => vec![0.0; len],
                Ladder::Minus => duality_coeffs(params, n - 1, len).iter().map(|c| c * n as f64).collect(),
                Ladder::Zero => duality_coeffs(params, n, len).iter().map(|c| c * (a / 2.0 + n as f64)).collect(),
            };
            let scale = discrete.iter().chain(&continuous).fold(0.0f64, |m, c| m.max(c.abs()));
            let diff = continuous.iter().zip(&discrete).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
        }
    }
    worst
}

/// The cheap self-duality function `δ_{(n',m'),(n,m)} / (w(n) w(m))`, with
/// `w(k) = Γ(s+t+k) / (Γ(s+t) k!)`.
pub fn cheap_duality(params: &ModelParams, left: (u64, u64), right: (u64, u64)) -> f64 {
    if left != right {
        return 0.0;
    }
    1.0 / (site_weight(params, right.0) * site_weight(params, right.1))
}

/// Self-duality of the cheap function on sector `total` at `time`:
/// `Ê_a 𝒟(X_t; b) = Ê_b 𝒟(a; X_t)` for every pair of states. `theta` only has
/// to be admissible; it cancels on a fixed sector.
pub fn cheap_duality_consistency(params: &ModelParams, theta: f64, total: u64, time: f64) -> Result<f64> {
    DiscreteGammaMeasure::with_truncation(*params, theta, 0)?;
    let pt = transient_matrix(params, total, time)?;
    let state = |k: u64| (k, total - k);
    let mut worst: f64 = 0.0;
    for a in 0..=total {
        for b in 0..=total {
            let lhs = pt[(a as usize, b as usize)] * cheap_duality(params, state(b), state(b));
            let rhs = pt[(b as usize, a as usize)] * cheap_duality(params, state(a), state(a));
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

fn sector_offset(total: u64) -> usize {
    let t = total as usize;
    t * (t + 1) / 2
}

/// `K_1^+ + K_2^+` on the direct sum of sectors `0..=n_max`. Rows of the top
/// sector would read sector `n_max + 1` and are left at zero.
pub fn plus_on_direct_sum(params: &ModelParams, n_max: u64) -> DMatrix<f64> {
    let dim = sector_offset(n_max + 1);
    let mut m = DMatrix::zeros(dim, dim);
    for total in 0..n_max {
        let k = build_k_operator(params, Ladder::Plus, total);
        let (r0, c0) = (sector_offset(total), sector_offset(total + 1));
        let block = k.matrix();
        m.view_mut((r0, c0), block.shape()).copy_from(block);
    }
    m
}

/// `exp(A)` for nilpotent `A` with `A^(order+1) = 0`, summed exactly.
fn nilpotent_exp(a: &DMatrix<f64>, order: u64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut acc = term.clone();
    for j in 1..=order {
        term = &term * a / j as f64;
        acc += &term;
    }
    acc
}

/// Largest gap between `exp(K_1^+ + K_2^+) 𝒟(·; n, m)` and `D(·; n, m)` over all
/// states of sectors `0..=n_max` and every `(n, m)` with `n + m <= n_max`.
pub fn regenerate_self_duality(params: &ModelParams, n_max: u64) -> f64 {
    let exp_plus = nilpotent_exp(&plus_on_direct_sum(params, n_max), n_max);
    let states: Vec<(u64, u64)> = (0..=n_max).flat_map(|t| (0..=t).map(move |k| (k, t - k))).collect();
    let mut worst: f64 = 0.0;
    for (col, &target) in states.iter().enumerate() {
        let cheap = cheap_duality(params, target, target);
        for (row, &(k, l)) in states.iter().enumerate() {
            let regenerated = exp_plus[(row, col)] * cheap;
            let closed = self_duality_two_site(params, k, l, target.0, target.1);
            worst = worst.max((regenerated - closed).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_operator_is_scalar() {
        let p = ModelParams::new(2.5, 0.7).unwrap();
        let k = build_k_operator(&p, Ladder::Zero, 5);
        assert_eq!(k.matrix(), &(DMatrix::identity(6, 6) * 8.2));
        assert_eq!(verify_commutation(&p, Ladder::Zero, 0..10), 0.0);
    }

    #[test]
    fn plus_on_sector_one_by_hand() {
        // Rows (0,1), (1,0); columns (0,2), (1,1), (2,0).
        // (0,1): (2+0) f(1,1) + (2+1) f(0,2); (1,0): (2+1) f(2,0) + (2+0) f(1,1).
        let k = build_k_operator(&ModelParams::uniform(), Ladder::Plus, 1);
        let want = DMatrix::from_row_slice(2, 3, &[3.0, 2.0, 0.0, 0.0, 2.0, 3.0]);
        assert_eq!(k.matrix(), &want);
        assert_eq!((k.source_total(), k.target_total()), (1, 2));
    }

    #[test]
    fn minus_on_sector_two_by_hand() {
        // Rows (0,2), (1,1), (2,0); columns (0,1), (1,0).
        let k = build_k_operator(&ModelParams::uniform(), Ladder::Minus, 2);
        let want = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        assert_eq!(k.matrix(), &want);
        let empty = build_k_operator(&ModelParams::uniform(), Ladder::Minus, 0);
        assert_eq!(empty.matrix().shape(), (1, 0));
    }

    #[test]
    fn compose_checks_shapes() {
        let p = ModelParams::uniform();
        let plus = build_k_operator(&p, Ladder::Plus, 2);
        assert!(plus.compose(&build_k_operator(&p, Ladder::Zero, 2)).is_err());
        assert!(plus.compose(&build_k_operator(&p, Ladder::Zero, 3)).is_ok());
    }

    #[test]
    fn algebra_interior_is_computed() {
        let r = verify_su11_relations(&ModelParams::uniform(), 20);
        assert_eq!(r.interior_rows, 20);
        assert!(r.max() <= 1e-12);
    }

    #[test]
    fn adjointness_two_term_check() {
        // f = δ_0, g = δ_1: LHS = (s+t) ν(0); RHS = θ^{-1} · 1 · ν(1).
        let p = ModelParams::new(2.0, 3.0).unwrap();
        let theta = 0.4;
        let m = DiscreteGammaMeasure::with_truncation(p, theta, 5).unwrap();
        assert_relative_eq!(5.0 * m.pmf(0), m.pmf(1) / theta, max_relative = 1e-14);
        assert!(verify_adjointness(&p, theta, 5).unwrap() <= 1e-13);
        assert!(verify_adjointness(&p, 1.4, 5).is_err());
    }

    #[test]
    fn intertwining_first_cases() {
        let p = ModelParams::new(0.8, 1.7).unwrap();
        let plus = MonomialOperator::new(&p, Ladder::Plus);
        assert_eq!(plus.apply(&[1.0]), vec![0.0, 1.0]);
        // (x∂² + (s+t)∂) x/(s+t) = 1
        let minus = MonomialOperator::new(&p, Ladder::Minus);
        let out = minus.apply(&[0.0, 1.0 / 2.5]);
        assert_relative_eq!(out[0], 1.0, max_relative = 1e-15);
        assert!(verify_intertwining(&p, 12) <= 1e-12);
    }

    #[test]
    fn cheap_function_at_time_zero() {
        let p = ModelParams::new(2.0, 3.0).unwrap();
        assert_eq!(cheap_duality_consistency(&p, 0.5, 6, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn direct_sum_layout() {
        let m = plus_on_direct_sum(&ModelParams::uniform(), 2);
        assert_eq!(m.shape(), (6, 6));
        // Sector 0 row reads sector 1: (0,0) -> 2 f(1,0) + 2 f(0,1).
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(0, 2)], 2.0);
        // Top sector rows are zero.
        assert!(m.rows(3, 3).iter().all(|v| *v == 0.0));
    }
}
