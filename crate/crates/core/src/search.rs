//! The margin bisection shared by both private calibration pipelines.
//!
//! Each round probes the midpoint of `[s_low, s_high]`, gets an estimate `Z`
//! of the clean-score CDF there, and moves the upper bound down when
//! `Z > target + delta / 2`, the lower bound up when `Z < target - delta / 2`,
//! and stops otherwise. The last midpoint is the threshold.

use serde::Serialize;

use crate::error::{Error, Result};

/// Calibration level: `1 - alpha`, or `1 - alpha + delta` for the starred
/// variants that aim for at least `1 - alpha` coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Target {
    #[default]
    Plain,
    Shifted,
}

impl Target {
    pub fn level(self, alpha: f64, delta: f64) -> f64 {
        match self {
            Target::Plain => 1.0 - alpha,
            Target::Shifted => 1.0 - alpha + delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Estimate above the band, upper bound moved to the midpoint.
    Lower,
    /// Estimate below the band, lower bound moved to the midpoint.
    Raise,
    /// Estimate inside the band.
    InBand,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Lower => "lower",
            Branch::Raise => "raise",
            Branch::InBand => "in-band",
        }
    }
}

/// One bisection step as seen by the aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTrace {
    /// 1-based.
    pub round: usize,
    pub midpoint: f64,
    /// Records (label pipeline) or users (score pipeline) behind the estimate.
    pub cohort_size: usize,
    /// Mean of the randomized bits before debiasing; score pipeline only.
    pub noisy_mean: Option<f64>,
    pub z: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub q_hat: f64,
    /// Zero only when the search was skipped because of saturation.
    pub rounds_used: usize,
    /// `Z` at the returned midpoint; NaN when saturated.
    pub achieved_z: f64,
    pub delta_applied: f64,
    /// The target level reached 1 and `q_hat = 1` was returned unsearched.
    pub saturated: bool,
    pub target_level: f64,
    /// The last estimate fell inside the `delta / 2` band. False means the
    /// round budget ran out first.
    pub in_band: bool,
    pub trace: Vec<RoundTrace>,
}

impl CalibrationResult {
    fn saturated(target_level: f64, delta: f64) -> Self {
        Self {
            q_hat: 1.0,
            rounds_used: 0,
            achieved_z: f64::NAN,
            delta_applied: delta,
            saturated: true,
            target_level,
            in_band: false,
            trace: Vec::new(),
        }
    }
}

pub(crate) struct Probe {
    pub z: f64,
    pub cohort_size: usize,
    pub noisy_mean: Option<f64>,
}

pub(crate) struct Bisection {
    pub target_level: f64,
    pub delta: f64,
    pub max_rounds: usize,
    pub tau: f64,
    /// Keep bisecting on the sign of `Z - target` after an in-band estimate.
    pub exhaustive: bool,
}

impl Bisection {
    pub fn run<F>(&self, mut probe: F) -> Result<CalibrationResult>
    where
        F: FnMut(usize, f64) -> Result<Probe>,
    {
        if self.max_rounds == 0 {
            return Err(Error::param("bisection needs at least one round"));
        }
        if self.target_level >= 1.0 {
            return Ok(CalibrationResult::saturated(self.target_level, self.delta));
        }

        let half_band = self.delta / 2.0;
        let (mut low, mut high) = (0.0f64, 1.0f64);
        let mut trace = Vec::with_capacity(self.max_rounds);
        let mut last = None;

        for round in 1..=self.max_rounds {
            let q = 0.5 * (low + high);
            let Probe {
                z,
                cohort_size,
                noisy_mean,
            } = probe(round, q)?;
            let branch = if z > self.target_level + half_band {
                Branch::Lower
            } else if z < self.target_level - half_band {
                Branch::Raise
            } else {
                Branch::InBand
            };
            trace.push(RoundTrace {
                round,
                midpoint: q,
                cohort_size,
                noisy_mean,
                z,
                branch,
            });
            last = Some((q, z, branch));

            match branch {
                Branch::Lower => high = q,
                Branch::Raise => low = q,
                Branch::InBand if !self.exhaustive => break,
                Branch::InBand if z >= self.target_level => high = q,
                Branch::InBand => low = q,
            }
            if high - low < self.tau {
                break;
            }
        }

        let (q_hat, achieved_z, branch) = last.expect("at least one round ran");
        Ok(CalibrationResult {
            q_hat,
            rounds_used: trace.len(),
            achieved_z,
            delta_applied: self.delta,
            saturated: false,
            target_level: self.target_level,
            in_band: branch == Branch::InBand,
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(target: f64, delta: f64, rounds: usize, exhaustive: bool, cdf: fn(f64) -> f64) -> CalibrationResult {
        Bisection {
            target_level: target,
            delta,
            max_rounds: rounds,
            tau: 0.5f64.powi(rounds as i32),
            exhaustive,
        }
        .run(|_, q| {
            Ok(Probe {
                z: cdf(q),
                cohort_size: 1,
                noisy_mean: None,
            })
        })
        .unwrap()
    }

    #[test]
    fn finds_quantile_of_uniform() {
        let res = bisect(0.9, 1e-9, 20, false, |q| q);
        assert!((res.q_hat - 0.9).abs() < 1e-5);
        assert_eq!(res.rounds_used, 20);
        assert!(!res.in_band);
    }

    #[test]
    fn breaks_inside_band() {
        let res = bisect(0.5, 0.1, 14, false, |q| q);
        assert_eq!(res.rounds_used, 1);
        assert_eq!(res.q_hat, 0.5);
        assert!(res.in_band);
        let full = bisect(0.5, 0.1, 14, true, |q| q);
        assert_eq!(full.rounds_used, 14);
    }

    #[test]
    fn interval_halves_each_round() {
        let res = bisect(0.3, 1e-9, 14, false, |q| q * q);
        let (mut low, mut high) = (0.0, 1.0);
        for (j, step) in res.trace.iter().enumerate() {
            assert_eq!(step.midpoint, 0.5 * (low + high));
            match step.branch {
                Branch::Lower => high = step.midpoint,
                Branch::Raise => low = step.midpoint,
                Branch::InBand => unreachable!(),
            }
            assert!(low < high);
            assert_eq!(high - low, 0.5f64.powi(j as i32 + 1));
        }
    }

    #[test]
    fn saturates_at_full_coverage() {
        let res = bisect(1.0, 0.05, 14, false, |q| q);
        assert!(res.saturated);
        assert_eq!(res.q_hat, 1.0);
        assert!(res.trace.is_empty());
    }

    #[test]
    fn target_levels() {
        assert_eq!(Target::Plain.level(0.1, 0.02), 0.9);
        assert!((Target::Shifted.level(0.1, 0.02) - 0.92).abs() < 1e-15);
    }
}
