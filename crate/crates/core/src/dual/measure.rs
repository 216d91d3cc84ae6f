use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::specialfn::{ln_factorial, ln_gamma, product_or_log, ModelParams};

/// Tail mass left beyond the adaptive truncation.
pub const GAMMA_TAIL: f64 = 1e-12;

/// Discrete Gamma law on `N` with shape `s + t` and parameter `theta in (0, 1)`:
/// `theta^n Γ(s+t+n) / (Z n! Γ(s+t))`, `Z = (1 - theta)^{-(s+t)}`.
///
/// `truncation` is the largest occupancy kept when the measure is summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGammaMeasure {
    params: ModelParams,
    theta: f64,
    truncation: u64,
}

impl DiscreteGammaMeasure {
    /// Truncation chosen so the neglected tail is at most [`GAMMA_TAIL`].
    pub fn new(params: ModelParams, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        let mut m = Self {
            params,
            theta,
            truncation: 0,
        };
        m.truncation = m.truncation_for_tail(GAMMA_TAIL);
        Ok(m)
    }

    pub fn with_truncation(params: ModelParams, theta: f64, truncation: u64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self {
            params,
            theta,
            truncation,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    pub fn ln_pmf(&self, n: u64) -> f64 {
        let a = self.params.shape();
        let nf = n as f64;
        nf * self.theta.ln() + ln_gamma(a + nf) - ln_gamma(a) - ln_factorial(n) + a * (1.0 - self.theta).ln()
    }

    pub fn pmf(&self, n: u64) -> f64 {
        let a = self.params.shape();
        let head = (a * (1.0 - self.theta).ln()).exp();
        let v = head * product_or_log(n, |j| self.theta * (a + j) / (j + 1.0), || f64::NAN);
        if v.is_normal() {
            v
        } else {
            self.ln_pmf(n).exp()
        }
    }

    /// `pmf(0..=truncation)`.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..=self.truncation).map(|n| self.pmf(n)).collect()
    }

    /// Rigorous upper bound on `sum_{j > n} pmf(j)`, or infinity while the pmf
    /// is still increasing.
    pub fn tail_bound(&self, n: u64) -> f64 {
        let a = self.params.shape();
        let ratio = self.theta * (a + n as f64) / (n as f64 + 1.0);
        let r = ratio.max(self.theta);
        if r >= 1.0 {
            return f64::INFINITY;
        }
        self.pmf(n) * r / (1.0 - r)
    }

    fn truncation_for_tail(&self, tail: f64) -> u64 {
        let mut n = 0;
        while self.tail_bound(n) > tail {
            n += 1;
        }
        n
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return domain(format!("theta must lie in (0, 1), got {theta}"));
    }
    Ok(())
}

/// Probability of occupancy `n` under `measure`.
pub fn discrete_gamma_pmf(measure: &DiscreteGammaMeasure, n: u64) -> f64 {
    measure.pmf(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_at_zero() {
        let p = ModelParams::new(2.0, 3.0).unwrap();
        let m = DiscreteGammaMeasure::new(p, 0.35).unwrap();
        assert_relative_eq!(m.pmf(0), 0.65f64.powf(5.0), max_relative = 1e-14);
    }

    #[test]
    fn uniform_case_closed_form() {
        let theta: f64 = 0.3;
        let m = DiscreteGammaMeasure::new(ModelParams::uniform(), theta).unwrap();
        for n in 0..40u64 {
            let want = (n as f64 + 1.0) * theta.powi(n as i32) * (1.0 - theta).powi(2);
            assert_relative_eq!(m.pmf(n), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn mass_and_mean_by_summation() {
        for (s, t, theta) in [(1.0, 1.0, 0.5), (0.3, 0.4, 0.9), (2.5, 0.7, 0.1), (2.0, 3.0, 0.7)] {
            let p = ModelParams::new(s, t).unwrap();
            let m = DiscreteGammaMeasure::new(p, theta).unwrap();
            let probs = m.probabilities();
            let mass: f64 = probs.iter().sum();
            assert!((mass - 1.0).abs() <= 1e-12, "mass {mass}");
            let mean: f64 = probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            assert_relative_eq!(mean, (s + t) * theta / (1.0 - theta), max_relative = 1e-9);
        }
    }

    #[test]
    fn theta_out_of_range() {
        assert!(DiscreteGammaMeasure::new(ModelParams::uniform(), 0.0).is_err());
        assert!(DiscreteGammaMeasure::new(ModelParams::uniform(), 1.0).is_err());
    }
}
