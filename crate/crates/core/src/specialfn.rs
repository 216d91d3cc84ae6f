//! Special functions, probability mass functions and seeded samplers.
//!
//! Every ratio of Gamma functions in the crate goes through [`log_gamma`] and is
//! exponentiated at the end, so factorial-like quantities stay finite well past
//! `170!`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Shape parameters `(s, t)` of the Beta law of the exchanged fractions.
///
/// `s = t = 1` is the original uniform-fraction model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    s: f64,
    t: f64,
}

impl ModelParams {
    pub fn new(s: f64, t: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) || !(t > 0.0 && t.is_finite()) {
            return domain(format!("Beta shapes must be positive, got s={s}, t={t}"));
        }
        Ok(Self { s, t })
    }

    /// The uniform-fraction model, `s = t = 1`.
    pub fn uniform() -> Self {
        Self { s: 1.0, t: 1.0 }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `s + t`, the Gamma shape of the invariant product measures.
    pub fn shape(&self) -> f64 {
        self.s + self.t
    }

    /// The pair with `s` and `t` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            s: self.t,
            t: self.s,
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::uniform()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto ChaCha's 64-bit stream
/// counter, so distinct ids never overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream for replica `index`; depends only on `(seed, stream_id, index)`.
    pub fn substream(&self, index: u64) -> RngStream {
        let child_seed = splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(1)));
        RngStream::new(child_seed, index)
    }

    /// Uniform draw on `(0, 1]`, safe to pass to `ln`.
    pub fn open_unit(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Exponential waiting time with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.open_unit().ln() / rate
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `ln Γ(x)` without argument checks.
#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Natural log of the Gamma function.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma requires x > 0, got {x}"));
    }
    Ok(ln_gamma(x))
}

/// `ln B(s, t)`.
pub fn log_beta(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) || !(t > 0.0) {
        return domain(format!("log_beta requires positive arguments, got ({s}, {t})"));
    }
    Ok(ln_gamma(s) + ln_gamma(t) - ln_gamma(s + t))
}

#[inline]
pub(crate) fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

#[inline]
fn ln_beta_binomial(params: &ModelParams, n: u64, k: u64) -> f64 {
    let (s, t) = (params.s, params.t);
    let (nf, kf) = (n as f64, k as f64);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k) + ln_gamma(kf + s)
        + ln_gamma(nf - kf + t)
        - ln_gamma(nf + s + t)
        - (ln_gamma(s) + ln_gamma(t) - ln_gamma(s + t))
}

/// Beta-binomial probability `P(X = k)` for `X ~ BetaBin(n, s, t)`.
///
/// This is the redistribution weight `w_{s,t}(n, k)`: the chance that `k` of
/// `n` units leave a site in one exchange.
pub fn beta_binomial_pmf(params: &ModelParams, n: u64, k: u64) -> Result<f64> {
    if k > n {
        return domain(format!("beta_binomial_pmf requires k <= n, got k={k}, n={n}"));
    }
    Ok(beta_binomial_unchecked(params, n, k))
}

/// `prod_{j < k} factor(j)`, or `exp(ln_value())` when the product leaves the
/// normal range.
#[inline]
pub(crate) fn product_or_log(k: u64, factor: impl Fn(f64) -> f64, ln_value: impl FnOnce() -> f64) -> f64 {
    let mut acc = 1.0f64;
    for j in 0..k {
        acc *= factor(j as f64);
    }
    if acc.is_normal() {
        acc
    } else {
        ln_value().exp()
    }
}

#[inline]
pub(crate) fn beta_binomial_unchecked(params: &ModelParams, n: u64, k: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (s, t) = (params.s, params.t);
    let (nf, kf) = (n as f64, k as f64);
    // C(n,k) (s)_k (t)_{n-k} / (s+t)_n, split so each factor stays near 1.
    let head = product_or_log(k, |j| (s + j) * (nf - j) / ((j + 1.0) * (s + t + j)), || f64::NAN);
    let tail = product_or_log(n - k, |j| (t + j) / (s + t + kf + j), || f64::NAN);
    let v = head * tail;
    if v.is_normal() {
        v
    } else {
        ln_beta_binomial(params, n, k).exp()
    }
}

/// The whole pmf of `BetaBin(n, s, t)` on `0..=n`.
pub fn beta_binomial_row(params: &ModelParams, n: u64) -> Vec<f64> {
    (0..=n).map(|k| beta_binomial_unchecked(params, n, k)).collect()
}

/// `Γ(a+k) / (Γ(a) k!)` for `a = s + t`.
pub(crate) fn site_weight(params: &ModelParams, k: u64) -> f64 {
    let a = params.shape();
    product_or_log(k, |j| (a + j) / (j + 1.0), || {
        ln_gamma(a + k as f64) - ln_gamma(a) - ln_factorial(k)
    })
}

/// A real number stored as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    /// -1, 0 or +1.
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ONE: SignedLog = SignedLog {
        sign: 1.0,
        ln_abs: 0.0,
    };
    pub const ZERO: SignedLog = SignedLog {
        sign: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: x.signum(),
                ln_abs: x.abs().ln(),
            }
        }
    }

    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }
}

impl std::ops::Mul for SignedLog {
    type Output = SignedLog;

    fn mul(self, other: SignedLog) -> SignedLog {
        if self.sign == 0.0 || other.sign == 0.0 {
            return SignedLog::ZERO;
        }
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs + other.ln_abs,
        }
    }
}

impl std::ops::Div for SignedLog {
    type Output = SignedLog;

    fn div(self, other: SignedLog) -> SignedLog {
        SignedLog {
            sign: self.sign * other.sign,
            ln_abs: self.ln_abs - other.ln_abs,
        }
    }
}

/// Rising factorial `(a)_k = a (a+1) ... (a+k-1)` in sign/log form.
pub fn pochhammer(a: f64, k: u64) -> SignedLog {
    let mut acc = SignedLog::ONE;
    for i in 0..k {
        acc = acc * SignedLog::from_f64(a + i as f64);
        if acc.sign == 0.0 {
            break;
        }
    }
    acc
}

/// Terminating Gauss hypergeometric series `2F1(-n, b; c; z)`.
///
/// Summed term by term over its `n + 1` terms. Fails if `(c)_k` vanishes for some
/// `k <= n`.
pub fn hyp2f1_terminating(n: u64, b: f64, c: f64, z: f64) -> Result<f64> {
    let nf = n as f64;
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 0..=n {
        let kf = k as f64;
        sum += term;
        if k < n {
            if c + kf == 0.0 {
                return domain(format!("2F1 lower parameter c={c} hits a pole at term {} (n={n})", k + 1));
            }
            term *= (-nf + kf) * (b + kf) * z / ((c + kf) * (kf + 1.0));
        }
    }
    Ok(sum)
}

/// Sampler for the exchange fraction `Beta(s, t)`.
#[derive(Debug, Clone, Copy)]
pub struct BetaSampler {
    dist: Beta<f64>,
}

impl BetaSampler {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            dist: Beta::new(params.s, params.t).expect("validated Beta shapes"),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }

    /// Compound draw: `p ~ Beta(s, t)`, then `Binomial(n, p)`.
    pub fn sample_beta_binomial<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        if n == 0 {
            return 0;
        }
        let p = self.sample(rng);
        binomial(n, p, rng)
    }
}

#[inline]
pub(crate) fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p.clamp(0.0, 1.0))
        .expect("probability clamped to [0, 1]")
        .sample(rng)
}

pub fn sample_beta(params: &ModelParams, rng: &mut RngStream) -> f64 {
    BetaSampler::new(params).sample(rng)
}

pub fn sample_beta_binomial(params: &ModelParams, n: u64, rng: &mut RngStream) -> u64 {
    BetaSampler::new(params).sample_beta_binomial(n, rng)
}

/// Draw from `Gamma(shape, scale)` with density `x^{shape-1} e^{-x/scale} / (Γ(shape) scale^shape)`.
pub fn sample_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    match Gamma::new(shape, scale) {
        Ok(dist) => Ok(dist.sample(rng)),
        Err(_) => domain(format!(
            "Gamma requires positive shape and scale, got ({shape}, {scale})"
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_gamma_small_integers() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(log_gamma(5.0).unwrap(), 24f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn log_gamma_reference_values() {
        // Reference values from mpmath.loggamma at 30 digits.
        let cases = [
            (1e-3, 6.907_178_885_383_854),
            (0.5, 0.572_364_942_924_700_1),
            (3.7, 1.428_072_326_665_387_9),
            (10.25, 13.368_023_671_476_046),
            (123.456, 469.605_547_129_929_47),
            (1e6, 12_815_504.569_147_61),
        ];
        for (x, want) in cases {
            assert_relative_eq!(log_gamma(x).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-2.5).is_err());
        assert!(log_beta(1.0, 0.0).is_err());
    }

    #[test]
    fn log_beta_examples() {
        assert!(log_beta(1.0, 1.0).unwrap().abs() < 1e-15);
        assert_relative_eq!(log_beta(2.0, 2.0).unwrap(), (1.0f64 / 6.0).ln(), max_relative = 1e-14);
        assert_relative_eq!(
            log_beta(0.5, 0.5).unwrap(),
            std::f64::consts::PI.ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn beta_binomial_examples() {
        let uniform = ModelParams::uniform();
        assert_relative_eq!(beta_binomial_pmf(&uniform, 4, 2).unwrap(), 0.2, max_relative = 1e-14);
        let p = ModelParams::new(2.3, 0.4).unwrap();
        assert_eq!(beta_binomial_pmf(&p, 0, 0).unwrap(), 1.0);
        assert_relative_eq!(
            beta_binomial_pmf(&p, 1, 1).unwrap(),
            2.3 / 2.7,
            max_relative = 1e-14
        );
        assert!(beta_binomial_pmf(&p, 3, 4).is_err());
    }

    #[test]
    fn pochhammer_negative_argument_alternates() {
        // (-3)_k = 1, -3, 6, -6, 0
        let want = [1.0, -3.0, 6.0, -6.0, 0.0];
        for (k, w) in want.iter().enumerate() {
            assert_relative_eq!(pochhammer(-3.0, k as u64).value(), *w, max_relative = 1e-14);
        }
    }

    #[test]
    fn hyp2f1_examples() {
        assert_eq!(hyp2f1_terminating(0, 3.3, -0.7, 5.0).unwrap(), 1.0);

        // 2F1(-2, 1; -3; 1) = 1 + (-2)(1)/(-3) + (-2)(-1)(1)(2)/((-3)(-2) 2!) = 1 + 2/3 + 1/3
        assert_relative_eq!(hyp2f1_terminating(2, 1.0, -3.0, 1.0).unwrap(), 2.0, max_relative = 1e-14);

        let (n, s, t) = (3u64, 2.0, 1.5);
        let gauss = (ln_gamma(t) + ln_gamma(n as f64 + s + t) - ln_gamma(s + t) - ln_gamma(n as f64 + t)).exp();
        let got = hyp2f1_terminating(n, s, 1.0 - n as f64 - t, 1.0).unwrap();
        assert_relative_eq!(got, gauss, max_relative = 1e-13);
    }

    #[test]
    fn hyp2f1_pole_is_an_error() {
        // c = -1 gives (c)_2 = 0 within the first 3 terms.
        assert!(hyp2f1_terminating(3, 1.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn streams_replay_and_differ() {
        let draw = |seed, id| {
            let mut r = RngStream::new(seed, id);
            (0..8).map(|_| r.next_u64()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7, 3), draw(7, 3));
        assert_ne!(draw(7, 3), draw(7, 4));
        assert_ne!(draw(7, 3), draw(8, 3));

        let base = RngStream::new(11, 0);
        let mut a = base.substream(5);
        let mut b = base.substream(5);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn beta_binomial_zero_trials() {
        let mut rng = RngStream::new(1, 0);
        let p = ModelParams::new(0.3, 0.2).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_beta_binomial(&p, 0, &mut rng), 0);
        }
    }

    #[test]
    fn gamma_sampler_rejects_bad_shape() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut rng).is_err());
    }
}
