//! The continuous Immediate Exchange Model on a finite graph.
//!
//! At rate `p(i, j)` the pair `{i, j}` exchanges: with independent
//! `U, V ~ Beta(s, t)`, agent `i` hands the fraction `U` of its wealth to `j`
//! and `j` hands the fraction `V` of its wealth to `i`.

mod kernel;
mod quadrature;

pub use kernel::{Edge, ExchangeKernel};
pub use quadrature::{apply_generator_quadrature, BetaQuadrature};

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::markov::uniformize;
use crate::specialfn::{BetaSampler, ModelParams, RngStream};
use crate::stats::{replicate, Estimate};

/// Nonnegative wealth per vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthVector(Vec<f64>);

impl WealthVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return domain(format!("wealth must be finite and nonnegative, got {bad}"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for WealthVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// State of a continuous trajectory at `time`, with the number of exchanges so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousTrajectorySample {
    pub time: f64,
    pub state: WealthVector,
    pub jump_count: u64,
}

/// Drives the edge clocks of `kernel` up to `horizon`, calling `on_event` with
/// the firing edge. Returns the number of events.
///
/// One exponential with the total rate decides the next event time; the edge
/// is then picked with probability proportional to its rate.
pub(crate) fn run_edge_clocks(
    kernel: &ExchangeKernel,
    horizon: f64,
    rng: &mut RngStream,
    mut on_event: impl FnMut(&Edge, &mut RngStream),
) -> u64 {
    let total = kernel.total_rate();
    if total == 0.0 || horizon <= 0.0 {
        return 0;
    }
    let edges = kernel.edges();
    let picker = if edges.len() > 1 {
        Some(WeightedIndex::new(edges.iter().map(|e| e.weight)).expect("positive edge rates"))
    } else {
        None
    };
    let mut clock = 0.0;
    let mut jumps = 0;
    loop {
        clock += rng.exponential(total);
        if clock > horizon {
            return jumps;
        }
        let edge = match &picker {
            Some(p) => &edges[p.sample(rng)],
            None => &edges[0],
        };
        on_event(edge, rng);
        jumps += 1;
    }
}

#[inline]
fn exchange(sampler: &BetaSampler, x: f64, y: f64, rng: &mut RngStream) -> (f64, f64) {
    let u = sampler.sample(rng);
    let v = sampler.sample(rng);
    let total = x + y;
    let first = (x * (1.0 - u) + y * v).min(total);
    (first, total - first)
}

/// One exchange between two agents. The second coordinate is computed as
/// `(x + y) - first`, so the pair total is kept.
pub fn two_agent_step(params: &ModelParams, x: f64, y: f64, rng: &mut RngStream) -> Result<(f64, f64)> {
    if !(x >= 0.0) || !(y >= 0.0) {
        return domain(format!("wealth must be nonnegative, got ({x}, {y})"));
    }
    Ok(exchange(&BetaSampler::new(params), x, y, rng))
}

fn check_dims(kernel: &ExchangeKernel, len: usize) -> Result<()> {
    if kernel.num_vertices() != len {
        return Err(Error::DimensionMismatch {
            expected: kernel.num_vertices(),
            got: len,
        });
    }
    Ok(())
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return domain(format!("horizon must be finite and nonnegative, got {horizon}"));
    }
    Ok(())
}

/// Gillespie run of the graph process, reporting the jump count as well.
pub fn simulate_graph_sample(
    params: &ModelParams,
    kernel: &ExchangeKernel,
    init: &WealthVector,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ContinuousTrajectorySample> {
    check_dims(kernel, init.len())?;
    check_horizon(horizon)?;
    let sampler = BetaSampler::new(params);
    let mut state = init.values().to_vec();
    let jump_count = run_edge_clocks(kernel, horizon, rng, |e, rng| {
        let (a, b) = exchange(&sampler, state[e.i], state[e.j], rng);
        state[e.i] = a;
        state[e.j] = b;
    });
    Ok(ContinuousTrajectorySample {
        time: horizon,
        state: WealthVector(state),
        jump_count,
    })
}

/// State of the graph process at `horizon`, started from `init`.
pub fn simulate_graph(
    params: &ModelParams,
    kernel: &ExchangeKernel,
    init: &WealthVector,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<WealthVector> {
    simulate_graph_sample(params, kernel, init, horizon, rng).map(|s| s.state)
}

/// Monte Carlo mean and standard error of `observable` at `horizon`.
pub fn empirical_moment<F>(
    params: &ModelParams,
    kernel: &ExchangeKernel,
    init: &WealthVector,
    horizon: f64,
    observable: F,
    replicas: usize,
    rng: &RngStream,
) -> Result<Estimate>
where
    F: Fn(&WealthVector) -> f64 + Sync,
{
    empirical_moments(params, kernel, init, horizon, 1, |w| vec![observable(w)], replicas, rng)
        .map(|mut v| v.remove(0))
}

/// Like [`empirical_moment`] for several observables on the same replicas.
#[allow(clippy::too_many_arguments)]
pub fn empirical_moments<F>(
    params: &ModelParams,
    kernel: &ExchangeKernel,
    init: &WealthVector,
    horizon: f64,
    observables: usize,
    observable: F,
    replicas: usize,
    rng: &RngStream,
) -> Result<Vec<Estimate>>
where
    F: Fn(&WealthVector) -> Vec<f64> + Sync,
{
    check_dims(kernel, init.len())?;
    check_horizon(horizon)?;
    replicate(replicas, rng, observables, |stream| {
        let end = simulate_graph(params, kernel, init, horizon, stream).expect("inputs validated");
        observable(&end)
    })
}

/// The walk generator `Q(i, j) = p(i, j)`, `Q(i, i) = -sum_j p(i, j)`.
pub fn walk_generator(kernel: &ExchangeKernel) -> DMatrix<f64> {
    let n = kernel.num_vertices();
    let mut q = DMatrix::zeros(n, n);
    for e in kernel.edges() {
        q[(e.i, e.j)] += e.weight;
        q[(e.j, e.i)] += e.weight;
        q[(e.i, e.i)] -= e.weight;
        q[(e.j, e.j)] -= e.weight;
    }
    q
}

/// `p_t = exp(t Q)` for the continuous-time walk with jump rates `p(i, j)`,
/// computed by uniformization.
pub fn random_walk_transition(kernel: &ExchangeKernel, t: f64) -> Result<DMatrix<f64>> {
    check_horizon(t)?;
    let n = kernel.num_vertices();
    let q = walk_generator(kernel);
    let rate = (0..n).map(|i| -q[(i, i)]).fold(0.0, f64::max);
    if rate == 0.0 || t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let stochastic = DMatrix::identity(n, n) + &q / rate;
    Ok(uniformize(&DMatrix::identity(n, n), &stochastic, rate * t))
}

/// Transition law of a single dual particle after time `t`.
///
/// When edge `{i, j}` fires, a lone particle at `i` leaves with probability
/// `s / (s + t)`, so it walks with rates `p(i, j) s / (s + t)`. Row `i` applied
/// to the initial wealth gives the expected wealth of vertex `i` at time `t`.
pub fn single_particle_transition(params: &ModelParams, kernel: &ExchangeKernel, t: f64) -> Result<DMatrix<f64>> {
    random_walk_transition(kernel, t * params.s() / params.shape())
}

/// `E_x[x_i(t)] = sum_j p_t(i, j) x_j(0)` for every vertex.
pub fn expected_wealth(params: &ModelParams, kernel: &ExchangeKernel, init: &WealthVector, t: f64) -> Result<Vec<f64>> {
    check_dims(kernel, init.len())?;
    let pt = single_particle_transition(params, kernel, t)?;
    Ok((0..init.len())
        .map(|i| (0..init.len()).map(|j| pt[(i, j)] * init[j]).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_wealth_is_fixed() {
        let mut rng = RngStream::new(3, 0);
        let p = ModelParams::new(0.4, 2.0).unwrap();
        assert_eq!(two_agent_step(&p, 0.0, 0.0, &mut rng).unwrap(), (0.0, 0.0));
        assert!(two_agent_step(&p, -1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn step_conserves_pair_total() {
        let mut rng = RngStream::new(3, 1);
        let p = ModelParams::new(0.4, 2.0).unwrap();
        for _ in 0..1000 {
            let (a, b) = two_agent_step(&p, 1.3, 0.2, &mut rng).unwrap();
            assert!(a >= 0.0 && b >= 0.0);
            assert!((a + b - 1.5).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn zero_horizon_returns_init() {
        let mut rng = RngStream::new(5, 0);
        let k = ExchangeKernel::cycle(4).unwrap();
        let init = WealthVector::new(vec![1.0, 2.0, 0.0, 4.5]).unwrap();
        let out = simulate_graph_sample(&ModelParams::uniform(), &k, &init, 0.0, &mut rng).unwrap();
        assert_eq!(out.state, init);
        assert_eq!(out.jump_count, 0);
    }

    #[test]
    fn dimension_and_horizon_errors() {
        let mut rng = RngStream::new(5, 0);
        let k = ExchangeKernel::cycle(4).unwrap();
        let init = WealthVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            simulate_graph(&ModelParams::uniform(), &k, &init, 1.0, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
        let init = WealthVector::new(vec![1.0; 4]).unwrap();
        assert!(simulate_graph(&ModelParams::uniform(), &k, &init, -1.0, &mut rng).is_err());
        assert!(WealthVector::new(vec![1.0, -0.5]).is_err());
        assert!(WealthVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn total_wealth_observable_has_no_spread() {
        let k = ExchangeKernel::path(5).unwrap();
        let init = WealthVector::new(vec![1.0, 0.0, 2.0, 0.5, 0.25]).unwrap();
        let est = empirical_moment(&ModelParams::uniform(), &k, &init, 3.0, |w| w.total(), 50, &RngStream::new(1, 1)).unwrap();
        assert!((est.mean - 3.75).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
        assert!(empirical_moment(&ModelParams::uniform(), &k, &init, 3.0, |w| w.total(), 1, &RngStream::new(1, 1)).is_err());
    }

    #[test]
    fn walk_transition_two_state_closed_form() {
        let k = ExchangeKernel::two();
        for t in [0.0, 0.3, 1.0, 4.0] {
            let pt = random_walk_transition(&k, t).unwrap();
            assert_relative_eq!(pt[(0, 0)], (1.0 + (-2.0 * t).exp()) / 2.0, max_relative = 1e-13);
            assert_relative_eq!(pt[(0, 1)], (1.0 - (-2.0 * t).exp()) / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn walk_transition_rows_are_stochastic() {
        let k = ExchangeKernel::complete(5).unwrap();
        let pt = random_walk_transition(&k, 2.5).unwrap();
        for i in 0..5 {
            let row: f64 = pt.row(i).iter().sum();
            assert!((row - 1.0).abs() < 1e-12);
        }
        assert_eq!(random_walk_transition(&k, 0.0).unwrap(), DMatrix::identity(5, 5));
    }
}
