//! The discrete dual: particles redistributed across an edge by two
//! independent Beta-binomial draws.
//!
//! On a two-vertex system the total `N` is conserved, so the chain lives on the
//! sector `{(n, N - n) : n = 0..=N}`. Sector states are indexed by `n`, the
//! count at the first vertex, in ascending order.

mod measure;

pub use measure::{discrete_gamma_pmf, DiscreteGammaMeasure, GAMMA_TAIL};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::continuous::{run_edge_clocks, ExchangeKernel};
use crate::error::{domain, Error, Result};
use crate::markov::uniformize;
use crate::specialfn::{beta_binomial_row, beta_binomial_unchecked, site_weight, BetaSampler, ModelParams, RngStream};
use crate::su11::SectorOperator;

/// Particle counts per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OccupationVector(Vec<u64>);

impl OccupationVector {
    pub fn new(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    /// A single particle at vertex `i` of `n` vertices.
    pub fn delta(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        Self(v)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|xi|`, the number of particles.
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// A probability vector over the sector states `(k, N - k)`, `k = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorDistribution {
    pub total: u64,
    pub probs: Vec<f64>,
}

impl SectorDistribution {
    pub fn point_mass(total: u64, index: u64) -> Self {
        let mut probs = vec![0.0; total as usize + 1];
        probs[index as usize] = 1.0;
        Self { total, probs }
    }

    /// Total variation distance to another distribution on the same sector.
    pub fn total_variation(&self, other: &SectorDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `sum_k probs[k] f(k, N - k)`.
    pub fn expect(&self, f: impl Fn(u64, u64) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * f(k as u64, self.total - k as u64))
            .sum()
    }
}

/// Jump rate `r_{s,t}(n, m; k, l) = w(n, k) w(m, l)` from `(n, m)` to
/// `(n - k + l, m - l + k)`.
pub fn dual_rate(params: &ModelParams, n: u64, m: u64, k: u64, l: u64) -> Result<f64> {
    if k > n || l > m {
        return domain(format!("dual_rate requires k <= n and l <= m, got n={n} m={m} k={k} l={l}"));
    }
    Ok(beta_binomial_unchecked(params, n, k) * beta_binomial_unchecked(params, m, l))
}

/// Stochastic matrix of the transition operator `P` on sector `total`.
///
/// Row `n` is the law of `n - X_1 + X_2` with independent
/// `X_1 ~ BetaBin(n, s, t)` and `X_2 ~ BetaBin(total - n, s, t)`. The `k = l`
/// terms stay on the diagonal.
pub fn sector_transition_matrix(params: &ModelParams, total: u64) -> SectorOperator {
    let size = total as usize + 1;
    let rows: Vec<Vec<f64>> = (0..=total).map(|n| beta_binomial_row(params, n)).collect();
    let mut p = DMatrix::zeros(size, size);
    for n in 0..size {
        let m = size - 1 - n;
        for (k, wk) in rows[n].iter().enumerate() {
            for (l, wl) in rows[m].iter().enumerate() {
                p[(n, n - k + l)] += wk * wl;
            }
        }
    }
    SectorOperator::new(total, total, p)
}

/// Generator matrix `P - I` on sector `total`.
pub fn sector_generator(params: &ModelParams, total: u64) -> SectorOperator {
    let p = sector_transition_matrix(params, total);
    let size = total as usize + 1;
    SectorOperator::new(total, total, p.matrix() - DMatrix::identity(size, size))
}

/// `(P - I) f` for a function `f` on sector `total`.
pub fn dual_generator_apply(params: &ModelParams, total: u64, f: &[f64]) -> Result<Vec<f64>> {
    let size = total as usize + 1;
    if f.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            got: f.len(),
        });
    }
    let g = sector_generator(params, total);
    Ok((g.matrix() * DVector::from_column_slice(f)).iter().copied().collect())
}

/// `exp(time (P - I))` on sector `total`: entry `(a, b)` is the probability of
/// moving from state `a` to state `b` within `time`.
pub fn transient_matrix(params: &ModelParams, total: u64, time: f64) -> Result<DMatrix<f64>> {
    if !(time >= 0.0) || !time.is_finite() {
        return domain(format!("time must be finite and nonnegative, got {time}"));
    }
    let size = total as usize + 1;
    let p = sector_transition_matrix(params, total);
    Ok(uniformize(&DMatrix::identity(size, size), p.matrix(), time))
}

/// Law at `time` of the two-vertex chain started at `(start, total - start)`.
pub fn transient_distribution(params: &ModelParams, total: u64, start: u64, time: f64) -> Result<SectorDistribution> {
    if start > total {
        return domain(format!("start index {start} outside sector {total}"));
    }
    if !(time >= 0.0) || !time.is_finite() {
        return domain(format!("time must be finite and nonnegative, got {time}"));
    }
    let size = total as usize + 1;
    let p = sector_transition_matrix(params, total);
    let mut init = DMatrix::zeros(1, size);
    init[(0, start as usize)] = 1.0;
    let row = uniformize(&init, p.matrix(), time);
    Ok(SectorDistribution {
        total,
        probs: row.iter().copied().collect(),
    })
}

/// Stationary law of a sector together with its partition function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalMeasure {
    pub distribution: SectorDistribution,
    pub partition: f64,
}

/// Closed-form stationary law on sector `total`:
/// `nu(k, l) ∝ Γ(s+t+k)/(Γ(s+t) k!) · Γ(s+t+l)/(Γ(s+t) l!)`.
pub fn canonical_measure(params: &ModelParams, total: u64) -> CanonicalMeasure {
    let weights: Vec<f64> = (0..=total)
        .map(|k| site_weight(params, k) * site_weight(params, total - k))
        .collect();
    let partition: f64 = weights.iter().sum();
    CanonicalMeasure {
        distribution: SectorDistribution {
            total,
            probs: weights.iter().map(|w| w / partition).collect(),
        },
        partition,
    }
}

/// Largest violation of
/// `r(n,m;k,l) nu(n) nu(m) = r(n',m';l,k) nu(n') nu(m')`
/// over `n + m <= n_max`, where `nu` is the discrete Gamma law.
pub fn detailed_balance_check(params: &ModelParams, theta: f64, n_max: u64) -> Result<f64> {
    let measure = DiscreteGammaMeasure::with_truncation(*params, theta, n_max)?;
    let nu: Vec<f64> = (0..=n_max).map(|n| measure.pmf(n)).collect();
    let rows: Vec<Vec<f64>> = (0..=n_max).map(|n| beta_binomial_row(params, n)).collect();
    let mut worst: f64 = 0.0;
    for total in 0..=n_max as usize {
        for n in 0..=total {
            let m = total - n;
            for k in 0..=n {
                for l in 0..=m {
                    let (n2, m2) = (n - k + l, m - l + k);
                    let forward = rows[n][k] * rows[m][l] * nu[n] * nu[m];
                    let backward = rows[n2][l] * rows[m2][k] * nu[n2] * nu[m2];
                    worst = worst.max((forward - backward).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Gillespie run of the dual on a graph, same edge clocks as the continuous
/// process. On edge `{i, j}` the site counts become
/// `(xi_i - X_1 + X_2, xi_j - X_2 + X_1)`.
pub fn simulate_dual(
    params: &ModelParams,
    kernel: &ExchangeKernel,
    init: &OccupationVector,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<OccupationVector> {
    if kernel.num_vertices() != init.len() {
        return Err(Error::DimensionMismatch {
            expected: kernel.num_vertices(),
            got: init.len(),
        });
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return domain(format!("horizon must be finite and nonnegative, got {horizon}"));
    }
    let sampler = BetaSampler::new(params);
    let mut state = init.counts().to_vec();
    run_edge_clocks(kernel, horizon, rng, |e, rng| {
        let out_i = sampler.sample_beta_binomial(state[e.i], rng);
        let out_j = sampler.sample_beta_binomial(state[e.j], rng);
        state[e.i] = state[e.i] - out_i + out_j;
        state[e.j] = state[e.j] - out_j + out_i;
    });
    Ok(OccupationVector(state))
}
