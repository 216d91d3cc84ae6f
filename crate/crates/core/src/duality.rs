//! Duality functions linking the continuous process and its discrete dual,
//! the self-duality functions of the dual, and the engines that check them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::{apply_generator_quadrature, simulate_graph, ExchangeKernel, WealthVector};
use crate::dual::{canonical_measure, dual_rate, simulate_dual, transient_matrix, DiscreteGammaMeasure, OccupationVector};
use crate::error::{domain, Error, Result};
use crate::specialfn::{beta_binomial_row, binomial, ln_factorial, ln_gamma, product_or_log, BetaSampler, ModelParams, RngStream};
use crate::stats::{replicate, Estimate};

/// `ln( Γ(s+t) / Γ(s+t+n) )`.
#[inline]
fn ln_norm(params: &ModelParams, n: u64) -> f64 {
    let a = params.shape();
    ln_gamma(a) - ln_gamma(a + n as f64)
}

/// `d_{s,t}(n, x) = x^n Γ(s+t) / Γ(s+t+n)`.
pub fn duality_monomial(params: &ModelParams, n: u64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    let a = params.shape();
    product_or_log(n, |j| x / (a + j), || n as f64 * x.ln() + ln_norm(params, n))
}

/// `D_{s,t}(n, m; x, y) = d(n, x) d(m, y)`.
pub fn duality_two_site(params: &ModelParams, n: u64, m: u64, x: f64, y: f64) -> f64 {
    duality_monomial(params, n, x) * duality_monomial(params, m, y)
}

/// The duality function `D(xi, ·) = prod_i d_{s,t}(xi_i, ·)` for a fixed dual
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityPolynomial {
    pub params: ModelParams,
    pub multi_index: OccupationVector,
}

impl DualityPolynomial {
    pub fn new(params: ModelParams, multi_index: OccupationVector) -> Self {
        Self { params, multi_index }
    }

    pub fn degree(&self) -> u64 {
        self.multi_index.total()
    }

    pub fn eval(&self, x: &WealthVector) -> Result<f64> {
        eval_duality(self, x)
    }
}

/// `D(xi, x)`.
pub fn eval_duality(poly: &DualityPolynomial, x: &WealthVector) -> Result<f64> {
    let xi = poly.multi_index.counts();
    if xi.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            got: x.len(),
        });
    }
    Ok(eval_duality_raw(&poly.params, xi, x.values()))
}

fn eval_duality_raw(params: &ModelParams, xi: &[u64], x: &[f64]) -> f64 {
    let direct: f64 = xi.iter().zip(x).map(|(&n, &xv)| duality_monomial(params, n, xv)).product();
    if direct.is_normal() || direct == 0.0 && xi.iter().zip(x).any(|(&n, &xv)| n > 0 && xv == 0.0) {
        return direct;
    }
    let ln: f64 = xi
        .iter()
        .zip(x)
        .filter(|(n, _)| **n > 0)
        .map(|(&n, &xv)| n as f64 * xv.ln() + ln_norm(params, n))
        .sum();
    ln.exp()
}

/// Discrete self-duality function `d_{s,t}(k, ·)` of a fixed order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfDualityPolynomial {
    pub params: ModelParams,
    pub order: u64,
}

impl SelfDualityPolynomial {
    pub fn eval(&self, n: u64) -> f64 {
        eval_self_duality(&self.params, self.order, n)
    }
}

/// `d_{s,t}(k, n) = n!/(n-k)! · Γ(s+t)/Γ(s+t+k)`, zero for `k > n`.
pub fn eval_self_duality(params: &ModelParams, k: u64, n: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let (a, nf) = (params.shape(), n as f64);
    product_or_log(k, |j| (nf - j) / (a + j), || {
        ln_factorial(n) - ln_factorial(n - k) + ln_norm(params, k)
    })
}

/// `D_{s,t}(k, l; n, m) = d(k, n) d(l, m)`.
pub fn self_duality_two_site(params: &ModelParams, k: u64, l: u64, n: u64, m: u64) -> f64 {
    eval_self_duality(params, k, n) * eval_self_duality(params, l, m)
}

/// `∫ D(xi, x) dν_θ(x) = θ^{|xi|}` for the Gamma(s+t, θ) product measure.
pub fn gamma_transform(_params: &ModelParams, theta: f64, xi: &OccupationVector) -> Result<f64> {
    if !(theta > 0.0) {
        return domain(format!("theta must be positive, got {theta}"));
    }
    Ok(theta.powf(xi.total() as f64))
}

/// `ρ(θ) = θ / (1 - θ)`.
pub fn rho(theta: f64) -> f64 {
    theta / (1.0 - theta)
}

/// `sum_n d_{s,t}(k, n) ν_θ(n)` for the discrete Gamma measure, summed until
/// the geometric tail bound falls under `1e-16` of the partial sum. Never
/// stops before the measure's own truncation.
pub fn discrete_transform(measure: &DiscreteGammaMeasure, k: u64) -> f64 {
    let params = measure.params();
    let theta = measure.theta();
    let a = params.shape();
    let mut sum = 0.0;
    let mut n = k;
    loop {
        let term = (measure.ln_pmf(n) + ln_factorial(n) - ln_factorial(n - k) + ln_norm(params, k)).exp();
        sum += term;
        let ratio = theta * (a + n as f64) / ((n - k) as f64 + 1.0);
        let r = ratio.max(theta);
        if n >= measure.truncation() && r < 1.0 && term * r / (1.0 - r) <= 1e-16 * sum {
            return sum;
        }
        n += 1;
    }
}

/// Generator-level duality residual `|L D - ℒ D| / (1 + |ℒ D|)` at `(n, m; x, y)`.
///
/// `L D` acts on the wealth variables by exact Gauss-Jacobi quadrature; `ℒ D`
/// acts on `(n, m)` through the explicit rate sum.
pub fn verify_generator_duality(params: &ModelParams, n: u64, m: u64, x: f64, y: f64) -> Result<f64> {
    if !(x >= 0.0) || !(y >= 0.0) {
        return domain(format!("wealth must be nonnegative, got ({x}, {y})"));
    }
    let lhs = apply_generator_quadrature(
        params,
        (n + m) as usize,
        |a, b| duality_two_site(params, n, m, a, b),
        x,
        y,
    );
    let here = duality_two_site(params, n, m, x, y);
    let mut rhs = 0.0;
    for k in 0..=n {
        for l in 0..=m {
            let r = dual_rate(params, n, m, k, l)?;
            rhs += r * (duality_two_site(params, n - k + l, m - l + k, x, y) - here);
        }
    }
    Ok((lhs - rhs).abs() / (1.0 + rhs.abs()))
}

/// Both sides of `E_x D(xi, x_t) = Ê_xi D(xi_t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDualityReport {
    pub mc_mean: f64,
    pub mc_se: f64,
    /// Dual side; exact when `dual_exact` is set.
    pub dual_value: f64,
    pub dual_se: f64,
    pub dual_exact: bool,
}

impl PathDualityReport {
    /// Agreement within `sigmas` combined standard errors.
    pub fn agrees(&self, sigmas: f64) -> bool {
        (self.mc_mean - self.dual_value).abs() <= sigmas * self.mc_se.hypot(self.dual_se)
    }
}

/// Path-level duality at `time`.
///
/// The continuous side is always Monte Carlo. On a two-vertex kernel the dual
/// side is exact (sector uniformization); otherwise it is Monte Carlo too, on
/// an independent stream.
pub fn verify_path_duality(
    params: &ModelParams,
    kernel: &ExchangeKernel,
    xi: &OccupationVector,
    x: &WealthVector,
    time: f64,
    replicas: usize,
    rng: &RngStream,
) -> Result<PathDualityReport> {
    let n = kernel.num_vertices();
    if xi.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if xi.len() != n { xi.len() } else { x.len() },
        });
    }
    let forward_rng = rng.substream(0);
    let continuous = replicate(replicas, &forward_rng, 1, |stream| {
        let end = simulate_graph(params, kernel, x, time, stream).expect("validated");
        vec![eval_duality_raw(params, xi.counts(), end.values())]
    })?[0];

    if n == 2 {
        let total = xi.total();
        let weight = kernel.weight(0, 1);
        let pt = transient_matrix(params, total, weight * time)?;
        let start = xi.counts()[0] as usize;
        let exact: f64 = (0..=total)
            .map(|k| pt[(start, k as usize)] * duality_two_site(params, k, total - k, x[0], x[1]))
            .sum();
        return Ok(PathDualityReport {
            mc_mean: continuous.mean,
            mc_se: continuous.std_error,
            dual_value: exact,
            dual_se: 0.0,
            dual_exact: true,
        });
    }

    let backward_rng = rng.substream(1);
    let dual = replicate(replicas, &backward_rng, 1, |stream| {
        let end = simulate_dual(params, kernel, xi, time, stream).expect("validated");
        vec![eval_duality_raw(params, end.counts(), x.values())]
    })?[0];
    Ok(PathDualityReport {
        mc_mean: continuous.mean,
        mc_se: continuous.std_error,
        dual_value: dual.mean,
        dual_se: dual.std_error,
        dual_exact: false,
    })
}

/// Both sides of `Ê_(n,m) D(k,l; N_t, M_t) = Ê_(k,l) D(K_t, L_t; n, m)`.
pub fn self_duality_sides(params: &ModelParams, left: (u64, u64), right: (u64, u64), time: f64) -> Result<(f64, f64)> {
    let (k, l) = left;
    let (n, m) = right;
    let pr = transient_matrix(params, n + m, time)?;
    let pl = transient_matrix(params, k + l, time)?;
    Ok(self_duality_sides_with(params, left, right, &pl, &pr))
}

fn self_duality_sides_with(
    params: &ModelParams,
    (k, l): (u64, u64),
    (n, m): (u64, u64),
    left_transient: &nalgebra::DMatrix<f64>,
    right_transient: &nalgebra::DMatrix<f64>,
) -> (f64, f64) {
    let right_total = n + m;
    let left_total = k + l;
    let lhs: f64 = (0..=right_total)
        .map(|a| right_transient[(n as usize, a as usize)] * self_duality_two_site(params, k, l, a, right_total - a))
        .sum();
    let rhs: f64 = (0..=left_total)
        .map(|b| left_transient[(k as usize, b as usize)] * self_duality_two_site(params, b, left_total - b, n, m))
        .sum();
    (lhs, rhs)
}

/// Largest self-duality residual over every state pair of the sectors
/// `left_total` (first argument of `D`) and `right_total` (second argument).
pub fn verify_self_duality(params: &ModelParams, left_total: u64, right_total: u64, time: f64) -> Result<f64> {
    let pl = transient_matrix(params, left_total, time)?;
    let pr = transient_matrix(params, right_total, time)?;
    let mut worst: f64 = 0.0;
    for k in 0..=left_total {
        for n in 0..=right_total {
            let (lhs, rhs) = self_duality_sides_with(params, (k, left_total - k), (n, right_total - n), &pl, &pr);
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Relative gap between `sum_{k+l=N} D(k,l;x,y) ν_N(k,l)` and
/// `(x+y)^N / (N! Z_N)`.
pub fn sum_identity_check(params: &ModelParams, total: u64, x: f64, y: f64) -> Result<f64> {
    let (lhs, rhs) = sum_identity_sides(params, total, x, y)?;
    let scale = rhs.abs();
    Ok(if scale > 0.0 { (lhs - rhs).abs() / scale } else { (lhs - rhs).abs() })
}

/// The two sides of the sum identity, direct sum first.
pub fn sum_identity_sides(params: &ModelParams, total: u64, x: f64, y: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0) || !(y >= 0.0) {
        return domain(format!("wealth must be nonnegative, got ({x}, {y})"));
    }
    let canon = canonical_measure(params, total);
    let lhs = canon
        .distribution
        .expect(|k, l| duality_two_site(params, k, l, x, y));
    let rhs = if total == 0 {
        1.0 / canon.partition
    } else if x + y == 0.0 {
        0.0
    } else {
        let w = x + y;
        product_or_log(total, |j| w / (j + 1.0), || total as f64 * w.ln() - ln_factorial(total)) / canon.partition
    };
    Ok((lhs, rhs))
}

/// One-step moment gaps between the rescaled dual update and the continuous
/// update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingGaps {
    pub scale: u64,
    pub samples: usize,
    pub mean_gap: f64,
    pub second_moment_gap: f64,
    pub variance_gap: f64,
}

const SCALING_CHUNKS: u64 = 64;

/// Compares `(n_K - X_1 + X_2)/K` with `x(1-U) + yV`, for `n_K = ⌊Kx⌋`,
/// `m_K = ⌊Ky⌋`.
///
/// The two updates share their Beta draws: `X_1 ~ Binomial(n_K, U)` and
/// `X_2 ~ Binomial(m_K, V)`, which is the compound Beta-binomial sampler. The
/// common draws cancel most of the Monte Carlo noise in the gaps.
pub fn scaling_limit_check(params: &ModelParams, x: f64, y: f64, scale: u64, samples: usize, rng: &RngStream) -> Result<ScalingGaps> {
    if scale < 100 {
        return domain(format!("scaling limit needs K >= 100, got {scale}"));
    }
    if !(x >= 0.0) || !(y >= 0.0) {
        return domain(format!("wealth must be nonnegative, got ({x}, {y})"));
    }
    if samples < 2 {
        return domain(format!("need at least 2 samples, got {samples}"));
    }
    let kf = scale as f64;
    let nk = (kf * x).floor() as u64;
    let mk = (kf * y).floor() as u64;
    let sampler = BetaSampler::new(params);
    let per_chunk = samples.div_ceil(SCALING_CHUNKS as usize);

    let sums = (0..SCALING_CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut stream = rng.substream(c);
            let count = per_chunk.min(samples.saturating_sub(c as usize * per_chunk));
            let mut acc = [0.0f64; 4];
            for _ in 0..count {
                let u = sampler.sample(&mut stream);
                let v = sampler.sample(&mut stream);
                let out1 = binomial(nk, u, &mut stream);
                let out2 = binomial(mk, v, &mut stream);
                let dual = (nk - out1 + out2) as f64 / kf;
                let cont = x * (1.0 - u) + y * v;
                acc[0] += dual;
                acc[1] += dual * dual;
                acc[2] += cont;
                acc[3] += cont * cont;
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold([0.0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);

    let n = samples as f64;
    let (d1, d2, c1, c2) = (sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n);
    Ok(ScalingGaps {
        scale,
        samples,
        mean_gap: (d1 - c1).abs(),
        second_moment_gap: (d2 - c2).abs(),
        variance_gap: ((d2 - d1 * d1) - (c2 - c1 * c1)).abs(),
    })
}

/// Exact one-step variance of the rescaled dual update minus that of the
/// continuous update, from the Beta-binomial and Beta variances.
pub fn scaling_variance_gap_exact(params: &ModelParams, x: f64, y: f64, scale: u64) -> f64 {
    let kf = scale as f64;
    let nk = (kf * x).floor() as u64;
    let mk = (kf * y).floor() as u64;
    let bb_var = |n: u64| {
        let row = beta_binomial_row(params, n);
        let mean: f64 = row.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        row.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum::<f64>()
    };
    let (s, t) = (params.s(), params.t());
    let beta_var = s * t / ((s + t).powi(2) * (s + t + 1.0));
    let dual = (bb_var(nk) + bb_var(mk)) / (kf * kf);
    let cont = (x * x + y * y) * beta_var;
    (dual - cont).abs()
}

/// Monte Carlo estimate of `∫ D(xi, x) dν_θ(x)` by i.i.d. Gamma(s+t, θ) draws.
pub fn gamma_transform_mc(params: &ModelParams, theta: f64, xi: &OccupationVector, replicas: usize, rng: &RngStream) -> Result<Estimate> {
    let dist = rand_distr::Gamma::new(params.shape(), theta)
        .map_err(|_| Error::Domain(format!("theta must be positive, got {theta}")))?;
    let est = replicate(replicas, rng, 1, |stream| {
        use rand_distr::Distribution;
        let x: Vec<f64> = (0..xi.len()).map(|_| dist.sample(stream)).collect();
        vec![eval_duality_raw(params, xi.counts(), &x)]
    })?;
    Ok(est[0])
}
