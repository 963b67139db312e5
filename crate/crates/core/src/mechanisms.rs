//! Randomizers, debiasing, shuffle amplification and the finite-sample
//! correction terms.
//!
//! Logarithms are natural throughout.

use rand::Rng;

use crate::error::{Error, Result};

/// Smallest privacy budget accepted. Below it the label channel is uniform
/// noise to machine precision and the correction terms blow up.
pub const MIN_EPSILON: f64 = 1e-6;

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < MIN_EPSILON {
        Err(Error::param(format!(
            "epsilon = {epsilon} must be at least {MIN_EPSILON}"
        )))
    } else {
        Ok(())
    }
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k >= 2 {
        Ok(())
    } else {
        Err(Error::param(format!("k = {k} must be at least 2")))
    }
}

pub(crate) fn check_delta_fail(delta_fail: f64) -> Result<()> {
    if delta_fail > 0.0 && delta_fail < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "failure probability delta = {delta_fail} must lie in (0, 1)"
        )))
    }
}

/// Privacy budget, failure probability of the bounds and class count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta_fail: f64,
    pub k: usize,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta_fail: f64, k: usize) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_delta_fail(delta_fail)?;
        check_k(k)?;
        Ok(Self {
            epsilon,
            delta_fail,
            k,
        })
    }

    pub fn channel(&self) -> NoiseChannel {
        NoiseChannel::from_epsilon(self.epsilon, self.k).expect("validated on construction")
    }
}

/// k-RR written as a uniform-noise channel: with probability `beta` the label
/// is replaced by a uniform draw over all `k` classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    beta: f64,
    k: usize,
}

impl NoiseChannel {
    pub fn from_epsilon(epsilon: f64, k: usize) -> Result<Self> {
        Ok(Self {
            beta: krr_flip_prob(epsilon, k)?,
            k,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `P(reported = to | true = from)`.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        let uniform = self.beta / self.k as f64;
        if from == to {
            1.0 - self.beta + uniform
        } else {
            uniform
        }
    }
}

/// `beta = k / (k - 1 + e^eps)`.
pub fn krr_flip_prob(epsilon: f64, k: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_k(k)?;
    Ok(k as f64 / (k as f64 - 1.0 + epsilon.exp()))
}

/// k-ary randomized response: keeps `y` with probability
/// `e^eps / (k - 1 + e^eps)`, otherwise reports one of the other `k - 1`
/// labels uniformly.
pub fn krr<R: Rng + ?Sized>(y: usize, epsilon: f64, k: usize, rng: &mut R) -> Result<usize> {
    check_epsilon(epsilon)?;
    check_k(k)?;
    if y >= k {
        return Err(Error::InvalidClass { label: y, k });
    }
    Ok(krr_unchecked(y, keep_probability(epsilon, k), k, rng))
}

pub(crate) fn keep_probability(epsilon: f64, k: usize) -> f64 {
    // e^eps / (k - 1 + e^eps), rearranged so it stays finite for huge eps.
    1.0 / (1.0 + (k as f64 - 1.0) * (-epsilon).exp())
}

pub(crate) fn krr_unchecked<R: Rng + ?Sized>(y: usize, keep: f64, k: usize, rng: &mut R) -> usize {
    if rng.random::<f64>() < keep {
        y
    } else {
        let other = rng.random_range(0..k - 1);
        if other >= y {
            other + 1
        } else {
            other
        }
    }
}

/// Warner's binary randomized response: keeps `b` with probability
/// `e^eps / (1 + e^eps)`.
pub fn rr_bit<R: Rng + ?Sized>(b: bool, epsilon: f64, rng: &mut R) -> Result<bool> {
    check_epsilon(epsilon)?;
    Ok(rr_bit_unchecked(b, epsilon, rng))
}

pub(crate) fn rr_bit_unchecked<R: Rng + ?Sized>(b: bool, epsilon: f64, rng: &mut R) -> bool {
    let keep = 1.0 / (1.0 + (-epsilon).exp());
    if rng.random::<f64>() < keep {
        b
    } else {
        !b
    }
}

/// `(e^eps + 1) / (e^eps - 1)`.
pub fn debias_factor(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(1.0 / (epsilon / 2.0).tanh())
}

/// Unbiased estimate of the true fraction of ones from the mean of
/// randomized-response bits. Not clamped to `[0, 1]`.
pub fn debias_mean(noisy_mean: f64, epsilon: f64) -> Result<f64> {
    let c = debias_factor(epsilon)?;
    Ok(c * noisy_mean - 1.0 / epsilon.exp_m1())
}

/// Coverage correction for label perturbation,
/// `sqrt(ln(4 / delta) / (2 n h^2))` with `h = (1 - beta) / (1 + beta)`.
pub fn delta_l(n: usize, epsilon: f64, k: usize, delta_fail: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("delta_l needs n >= 1"));
    }
    check_delta_fail(delta_fail)?;
    let beta = krr_flip_prob(epsilon, k)?;
    let h = (1.0 - beta) / (1.0 + beta);
    Ok(((4.0 / delta_fail).ln() / (2.0 * n as f64 * h * h)).sqrt())
}

/// Coverage correction for score perturbation over `rounds` disjoint
/// cohorts: a Hoeffding bound per round on the debiased mean of `n / T`
/// bits, union-bounded over the rounds,
/// `c * sqrt(T ln(2T / delta) / (2 n))` with `c = debias_factor(eps)`.
pub fn delta_s(n: usize, epsilon: f64, delta_fail: f64, rounds: usize) -> Result<f64> {
    if rounds == 0 {
        return Err(Error::param("delta_s needs at least one round"));
    }
    if n < rounds {
        return Err(Error::InsufficientUsers { n, rounds });
    }
    check_delta_fail(delta_fail)?;
    let c = debias_factor(epsilon)?;
    let t = rounds as f64;
    Ok(c * (t * (2.0 * t / delta_fail).ln() / (2.0 * n as f64)).sqrt())
}

/// Privacy loss after shuffling the reports of `n` users, `eps / sqrt(n)`.
pub fn eps_effective(epsilon: f64, n: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if n == 0 {
        return Err(Error::param("eps_effective needs n >= 1"));
    }
    Ok(epsilon / (n as f64).sqrt())
}

/// Number of bisection rounds needed to shrink `[0, 1]` below `tau`,
/// `ceil(log2(1 / tau))`.
pub fn rounds_for_tau(tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param(format!("tau = {tau} must lie in (0, 1)")));
    }
    Ok((1.0 / tau).log2().ceil().max(1.0) as usize)
}
