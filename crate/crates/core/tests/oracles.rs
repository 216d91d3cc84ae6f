//! Library results against independently computed references.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use iem_core::continuous::{
    random_walk_transition, simulate_graph_sample, walk_generator, BetaQuadrature, ExchangeKernel, WealthVector,
};
use iem_core::dual::{canonical_measure, sector_transition_matrix, simulate_dual, transient_distribution, transient_matrix, OccupationVector};
use iem_core::duality::{duality_monomial, eval_self_duality};
use iem_core::specialfn::{beta_binomial_pmf, sample_beta, sample_beta_binomial, sample_gamma, ModelParams, RngStream};
use iem_core::stats::replicate;

fn grid() -> Vec<ModelParams> {
    [(1.0, 1.0), (2.0, 3.0), (0.5, 0.5), (2.5, 0.7)]
        .iter()
        .map(|&(s, t)| ModelParams::new(s, t).unwrap())
        .collect()
}

/// `exp(t (P - I))` for `P` reversible w.r.t. `pi`, via the symmetric matrix
/// `D^{1/2} P D^{-1/2}`.
fn reversible_exp(p: &DMatrix<f64>, pi: &[f64], time: f64) -> DMatrix<f64> {
    let n = p.nrows();
    let sq = DVector::from_iterator(n, pi.iter().map(|v| v.sqrt()));
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = sq[i] * p[(i, j)] / sq[j];
        }
    }
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let lam = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (time * (l - 1.0)).exp()));
    let e = &eig.eigenvectors * lam * eig.eigenvectors.transpose();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = e[(i, j)] * sq[j] / sq[i];
        }
    }
    out
}

#[test]
fn transient_matrix_matches_spectral_form() {
    for p in grid() {
        for total in [1u64, 3, 6, 10] {
            let pm = sector_transition_matrix(&p, total);
            let pi = canonical_measure(&p, total).distribution.probs;
            for time in [0.3, 1.7, 6.0] {
                let want = reversible_exp(pm.matrix(), &pi, time);
                let got = transient_matrix(&p, total, time).unwrap();
                assert!((got - want).amax() <= 1e-11, "N={total} t={time}");
            }
        }
    }
}

#[test]
fn walk_transition_matches_spectral_form() {
    for kernel in [
        ExchangeKernel::path(5).unwrap(),
        ExchangeKernel::cycle(6).unwrap(),
        ExchangeKernel::complete(4).unwrap(),
        ExchangeKernel::new(3, &[(0, 1, 0.2), (1, 2, 0.7)]).unwrap(),
    ] {
        let q = walk_generator(&kernel);
        let eig = SymmetricEigen::new(q);
        for time in [0.5, 2.0, 9.0] {
            let lam = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (time * l).exp()));
            let want = &eig.eigenvectors * lam * eig.eigenvectors.transpose();
            let got = random_walk_transition(&kernel, time).unwrap();
            assert!((got - want).amax() <= 1e-12);
        }
    }
}

#[test]
fn dual_transform_of_gamma_law_is_harmonic() {
    // θ^{k+l} is constant on a sector, so the sector law must keep total mass one.
    let theta: f64 = 0.45;
    for p in grid() {
        for total in [2u64, 5, 9] {
            for start in [0, total / 2, total] {
                for time in [0.0, 0.4, 3.0] {
                    let d = transient_distribution(&p, total, start, time).unwrap();
                    let v = d.expect(|k, l| theta.powi((k + l) as i32));
                    assert_relative_eq!(v, theta.powi(total as i32), max_relative = 1e-12);
                }
            }
        }
    }
}

#[test]
fn discrete_polynomials_approach_continuous_ones() {
    let p = ModelParams::new(2.0, 3.0).unwrap();
    for &x in &[0.37, 1.0, 2.6] {
        for k in 1..=6u64 {
            let kf = k as f64;
            let gap_at = |scale: f64| {
                let n = (scale * x).floor() as u64;
                let discrete = eval_self_duality(&p, k, n) / scale.powi(k as i32);
                let continuous = duality_monomial(&p, k, x);
                (discrete - continuous).abs() / continuous
            };
            let bound = |scale: f64| kf * (kf + 1.0) / (scale * x);
            assert!(gap_at(1e4) <= bound(1e4), "k={k}, x={x}");
            assert!(gap_at(1e2) <= bound(1e2), "k={k}, x={x}");
        }
    }
}

#[test]
fn simulated_dual_matches_uniformized_law() {
    let p = ModelParams::new(2.0, 3.0).unwrap();
    let kernel = ExchangeKernel::two();
    let start = OccupationVector::new(vec![3, 1]);
    let time = 0.9;
    let law = transient_distribution(&p, 4, 3, time).unwrap();
    let est = replicate(100_000, &RngStream::new(17, 0), 5, |rng| {
        let end = simulate_dual(&p, &kernel, &start, time, rng).unwrap();
        (0..5).map(|k| f64::from(end.counts()[0] == k)).collect()
    })
    .unwrap();
    for (k, e) in est.iter().enumerate() {
        assert!(e.agrees_with(law.probs[k], 4.0), "bin {k}: {} vs {}", e.mean, law.probs[k]);
    }
}

#[test]
fn beta_sampler_moments_for_small_shapes() {
    for (s, t) in [(0.3, 0.4), (0.5, 2.5), (4.0, 1.5)] {
        let p = ModelParams::new(s, t).unwrap();
        let est = replicate(100_000, &RngStream::new(3, 1), 2, |rng| {
            let u = sample_beta(&p, rng);
            assert!((0.0..=1.0).contains(&u));
            vec![u, u * u]
        })
        .unwrap();
        let mean = s / (s + t);
        let second = mean * (s + 1.0) / (s + t + 1.0);
        assert!(est[0].agrees_with(mean, 4.0));
        assert!(est[1].agrees_with(second, 4.0));
    }
}

#[test]
fn uniform_beta_passes_ks() {
    let mut rng = RngStream::new(5, 0);
    let p = ModelParams::uniform();
    let n = 20_000;
    let mut draws: Vec<f64> = (0..n).map(|_| sample_beta(&p, &mut rng)).collect();
    draws.sort_by(f64::total_cmp);
    let d = draws
        .iter()
        .enumerate()
        .map(|(i, u)| ((i + 1) as f64 / n as f64 - u).max(u - i as f64 / n as f64))
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample Kolmogorov statistic.
    assert!(d <= 1.63 / (n as f64).sqrt(), "D = {d}");
}

#[test]
fn beta_binomial_sampler_bins() {
    let p = ModelParams::new(0.7, 1.9).unwrap();
    let n = 6u64;
    let est = replicate(100_000, &RngStream::new(8, 2), 7, |rng| {
        let k = sample_beta_binomial(&p, n, rng);
        (0..=n).map(|j| f64::from(k == j)).collect()
    })
    .unwrap();
    for (k, e) in est.iter().enumerate() {
        assert!(e.agrees_with(beta_binomial_pmf(&p, n, k as u64).unwrap(), 4.0));
    }
}

#[test]
fn gamma_sampler_mean_and_variance() {
    let (shape, scale) = (0.6, 0.7);
    let est = replicate(100_000, &RngStream::new(9, 3), 2, |rng| {
        let g = sample_gamma(shape, scale, rng).unwrap();
        vec![g, g * g]
    })
    .unwrap();
    assert!(est[0].agrees_with(shape * scale, 4.0));
    assert!(est[1].agrees_with(shape * (shape + 1.0) * scale * scale, 4.0));
}

#[test]
fn jump_count_is_poisson() {
    let p = ModelParams::uniform();
    let kernel = ExchangeKernel::cycle(5).unwrap();
    let init = WealthVector::new(vec![1.0; 5]).unwrap();
    let horizon = 3.0;
    let lambda = kernel.total_rate() * horizon;
    let est = replicate(20_000, &RngStream::new(11, 4), 2, |rng| {
        let c = simulate_graph_sample(&p, &kernel, &init, horizon, rng).unwrap().jump_count as f64;
        vec![c, (c - lambda).powi(2)]
    })
    .unwrap();
    assert!(est[0].agrees_with(lambda, 4.0));
    assert!(est[1].agrees_with(lambda, 4.0));
}

#[test]
fn quadrature_matches_simulated_beta_expectation() {
    let p = ModelParams::new(0.5, 2.5).unwrap();
    let q = BetaQuadrature::new(&p, 12);
    let f = |u: f64| (3.0 * u).cos() + u.powi(5);
    let want = q.expect(f);
    let mut rng = RngStream::new(13, 0);
    let n = 200_000;
    let samples: Vec<f64> = (0..n).map(|_| f(sample_beta(&p, &mut rng))).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - want).abs() <= 4.0 * (var / n as f64).sqrt());
}

#[test]
fn rng_stream_is_a_working_rng() {
    let mut a = RngStream::new(1, 2);
    let x: u64 = a.random();
    let mut b = RngStream::new(1, 2);
    assert_eq!(x, b.random::<u64>());
    assert_ne!(RngStream::new(1, 3).random::<u64>(), x);
}
