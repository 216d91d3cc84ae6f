//! Uniformization for finite continuous-time chains.

use nalgebra::DMatrix;

use crate::specialfn::ln_factorial;

/// Poisson tail left out of every uniformization sum.
pub const POISSON_TAIL: f64 = 1e-14;

/// Poisson(`lambda`) probabilities for `j = 0..=J`, where `J` is the first index
/// past the mean whose geometric tail bound drops below `tail`.
pub fn poisson_weights(lambda: f64, tail: f64) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let ln_lambda = lambda.ln();
    let mut weights = Vec::new();
    let mut j = 0usize;
    loop {
        let w = (-lambda + j as f64 * ln_lambda - ln_factorial(j as u64)).exp();
        weights.push(w);
        let ratio = lambda / (j as f64 + 1.0);
        if ratio < 1.0 && w * ratio / (1.0 - ratio) <= tail {
            break;
        }
        j += 1;
    }
    weights
}

/// `start * exp(lambda (P - I))` for a row-stochastic `P`, via
/// `sum_j Poisson(lambda; j) start P^j`.
pub fn uniformize(start: &DMatrix<f64>, stochastic: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let weights = poisson_weights(lambda, POISSON_TAIL);
    let mut term = start.clone();
    let mut acc = start * weights[0];
    for &w in &weights[1..] {
        term = &term * stochastic;
        acc += &term * w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_weights_cover_the_mass() {
        for lambda in [0.0, 0.3, 1.0, 12.5, 200.0, 900.0] {
            let w = poisson_weights(lambda, POISSON_TAIL);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "lambda={lambda} total={total}");
            if lambda > 0.0 {
                assert!(w.len() as f64 > lambda);
            }
        }
    }

    #[test]
    fn uniformize_two_state() {
        // P = [[0,1],[1,0]]: generator P - I has exp(t(P-I))[0][0] = (1 + e^{-2t})/2
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let t: f64 = 0.7;
        let out = uniformize(&DMatrix::identity(2, 2), &p, t);
        assert!((out[(0, 0)] - (1.0 + (-2.0 * t).exp()) / 2.0).abs() < 1e-14);
        assert!((out[(0, 1)] + out[(0, 0)] - 1.0).abs() < 1e-14);
    }
}
