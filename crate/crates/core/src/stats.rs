//! Replica-parallel Monte Carlo estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::specialfn::RngStream;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
}

impl Estimate {
    /// Whether `target` lies within `sigmas` standard errors of the mean.
    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.std_error
    }

    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }

    /// Agreement between two independent estimates within `sigmas` combined errors.
    pub fn agrees_with_estimate(&self, other: &Estimate, sigmas: f64) -> bool {
        let se = self.std_error.hypot(other.std_error);
        (self.mean - other.mean).abs() <= sigmas * se
    }
}

/// Runs `replicas` independent replicas, replica `r` on `rng.substream(r)`, and
/// estimates the mean of each observable returned by `replica`.
///
/// The result depends only on `rng`'s identity, not on thread scheduling.
pub fn replicate<F>(replicas: usize, rng: &RngStream, observables: usize, replica: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut RngStream) -> Vec<f64> + Sync,
{
    if replicas < 2 {
        return domain(format!("need at least 2 replicas, got {replicas}"));
    }
    let samples: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng.substream(r);
            let obs = replica(&mut stream);
            debug_assert_eq!(obs.len(), observables);
            obs
        })
        .collect();
    Ok(summarize(&samples, observables))
}

pub(crate) fn summarize(samples: &[Vec<f64>], observables: usize) -> Vec<Estimate> {
    let n = samples.len() as f64;
    (0..observables)
        .map(|o| {
            let mean = samples.iter().map(|s| s[o]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[o] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Estimate {
                mean,
                std_error: (var / n).sqrt(),
                replicas: samples.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_observable_has_zero_error() {
        let est = replicate(10, &RngStream::new(1, 2), 1, |_| vec![3.5]).unwrap();
        assert_eq!(est[0].mean, 3.5);
        assert_eq!(est[0].std_error, 0.0);
        assert!(est[0].agrees_with(3.5, 3.0));
    }

    #[test]
    fn too_few_replicas() {
        assert!(replicate(1, &RngStream::new(1, 2), 1, |_| vec![0.0]).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || replicate(200, &RngStream::new(9, 1), 1, |r| vec![r.open_unit()]).unwrap();
        assert_eq!(run(), run());
    }
}
