//! Gauss-Jacobi rules for the Beta(s, t) probability measure on `[0, 1]`.
//!
//! Nodes and weights come from the Golub-Welsch eigenproblem of the Jacobi
//! matrix with `alpha = t - 1`, `beta = s - 1` on `[-1, 1]`, mapped through
//! `u = (1 + x) / 2`. A rule with `q` nodes integrates polynomials of degree
//! `2q - 1` exactly against the Beta density.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::specialfn::ModelParams;

/// Nodes in `[0, 1]` and probability weights for `Beta(s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl BetaQuadrature {
    pub fn new(params: &ModelParams, num_nodes: usize) -> Self {
        assert!(num_nodes > 0, "quadrature needs at least one node");
        let alpha = params.t() - 1.0;
        let beta = params.s() - 1.0;
        let ab = alpha + beta;

        let mut jacobi = DMatrix::<f64>::zeros(num_nodes, num_nodes);
        for k in 0..num_nodes {
            let kf = k as f64;
            let diag = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            jacobi[(k, k)] = diag;
            if k + 1 < num_nodes {
                let j = kf + 1.0;
                let b2 = if k == 0 {
                    4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
                } else {
                    4.0 * j * (j + alpha) * (j + beta) * (j + ab)
                        / ((2.0 * j + ab).powi(2) * (2.0 * j + ab + 1.0) * (2.0 * j + ab - 1.0))
                };
                let b = b2.sqrt();
                jacobi[(k, k + 1)] = b;
                jacobi[(k + 1, k)] = b;
            }
        }

        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..num_nodes)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                ((1.0 + eig.eigenvalues[i]) / 2.0, v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Smallest rule that is exact for polynomials of the given degree.
    pub fn exact_for_degree(params: &ModelParams, degree: usize) -> Self {
        Self::new(params, degree.div_ceil(2) + 1)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(U)]` for `U ~ Beta(s, t)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

/// `(L_{s,t} f)(x, y)` for a bivariate polynomial `f` of total degree `degree`.
///
/// Computes `E[f(x(1-U) + yV, y(1-V) + xU)] - f(x, y)` with independent
/// `U, V ~ Beta(s, t)` by a tensor Gauss-Jacobi rule; exact up to roundoff.
pub fn apply_generator_quadrature(
    params: &ModelParams,
    degree: usize,
    f: impl Fn(f64, f64) -> f64,
    x: f64,
    y: f64,
) -> f64 {
    let rule = BetaQuadrature::exact_for_degree(params, degree);
    let mut acc = 0.0;
    for (&u, &wu) in rule.nodes().iter().zip(rule.weights()) {
        for (&v, &wv) in rule.nodes().iter().zip(rule.weights()) {
            acc += wu * wv * f(x * (1.0 - u) + y * v, y * (1.0 - v) + x * u);
        }
    }
    acc - f(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::ln_gamma;
    use approx::assert_relative_eq;

    fn beta_moment(p: &ModelParams, j: i32) -> f64 {
        // E[U^j] = B(s + j, t) / B(s, t)
        let (s, t) = (p.s(), p.t());
        (ln_gamma(s + j as f64) + ln_gamma(s + t) - ln_gamma(s) - ln_gamma(s + t + j as f64)).exp()
    }

    #[test]
    fn single_node_is_the_mean() {
        let p = ModelParams::new(2.0, 3.0).unwrap();
        let rule = BetaQuadrature::new(&p, 1);
        assert_relative_eq!(rule.nodes()[0], 0.4, max_relative = 1e-15);
        assert_eq!(rule.weights()[0], 1.0);
    }

    #[test]
    fn integrates_monomials_exactly() {
        for (s, t) in [(1.0, 1.0), (2.0, 3.0), (0.5, 0.5), (2.5, 0.7), (0.3, 4.0)] {
            let p = ModelParams::new(s, t).unwrap();
            for q in 1..8usize {
                let rule = BetaQuadrature::new(&p, q);
                for j in 0..(2 * q) as i32 {
                    let got = rule.expect(|u| u.powi(j));
                    assert_relative_eq!(got, beta_moment(&p, j), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn constants_and_total_wealth_are_harmonic() {
        let p = ModelParams::new(2.5, 0.7).unwrap();
        assert!(apply_generator_quadrature(&p, 0, |_, _| 1.0, 0.3, 1.7).abs() < 1e-15);
        assert!(apply_generator_quadrature(&p, 1, |a, b| a + b, 0.3, 1.7).abs() < 1e-15);
    }

    #[test]
    fn linear_observable_matches_mean_transfer() {
        // E[x(1-U) + yV] - x = (y - x) s/(s+t)
        let p = ModelParams::new(2.0, 3.0).unwrap();
        let got = apply_generator_quadrature(&p, 1, |a, _| a, 1.0, 2.0);
        assert_relative_eq!(got, 0.4, max_relative = 1e-14);
    }
}
