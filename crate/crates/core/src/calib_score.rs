//! Score-perturbation calibration (LDP-CP-S).
//!
//! Users keep their labels and score locally. The aggregator bisects for the
//! quantile: in round `j` it sends the midpoint `q` to a fresh cohort, each
//! user answers `1(score < q)` through binary randomized response, and the
//! debiased cohort mean estimates the score CDF at `q`. Cohorts are disjoint,
//! so every user is contacted at most once.
//!
//! The aggregator only ever talks to a [`Population`], which answers threshold
//! queries with privatized bits; [`LocalPopulation`] is the user side.

use std::ops::Range;

use rand::Rng;

use crate::conformal::{check_alpha, score, LabeledExample, ScoreKind};
use crate::error::{Error, Result};
use crate::mechanisms::{check_epsilon, debias_mean, rr_bit_unchecked};
use crate::search::{Bisection, CalibrationResult, Probe, Target};

/// Split of `n` users into `rounds` disjoint consecutive blocks of
/// `floor(n / rounds)` users. The remainder is never contacted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserCohortPlan {
    rounds: usize,
    cohort_size: usize,
    n: usize,
}

impl UserCohortPlan {
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Users per round, `n'`.
    pub fn cohort_size(&self) -> usize {
        self.cohort_size
    }

    /// Users of round `round` (1-based).
    pub fn cohort(&self, round: usize) -> Range<usize> {
        assert!(round >= 1 && round <= self.rounds, "round {round} out of range");
        let start = (round - 1) * self.cohort_size;
        start..start + self.cohort_size
    }

    pub fn cohorts(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (1..=self.rounds).map(|j| self.cohort(j))
    }

    /// Users left over by the floor division.
    pub fn unassigned(&self) -> Range<usize> {
        self.rounds * self.cohort_size..self.n
    }
}

pub fn plan_cohorts(n: usize, rounds: usize) -> Result<UserCohortPlan> {
    if rounds == 0 {
        return Err(Error::param("need at least one round"));
    }
    if n < rounds {
        return Err(Error::InsufficientUsers { n, rounds });
    }
    Ok(UserCohortPlan {
        rounds,
        cohort_size: n / rounds,
        n,
    })
}

/// User side of one round: score the own example, compare strictly against
/// the broadcast threshold and randomize the bit.
pub fn user_response<R: Rng + ?Sized>(
    example: &LabeledExample,
    q: f64,
    epsilon: f64,
    kind: ScoreKind,
    rng: &mut R,
) -> Result<bool> {
    check_epsilon(epsilon)?;
    let u = if kind.is_randomized() {
        rng.random::<f64>()
    } else {
        0.0
    };
    let s = score(&example.probs, example.label, kind, u)?;
    Ok(rr_bit_unchecked(s < q, epsilon, rng))
}

/// The users as the aggregator sees them: indexed parties that answer a
/// threshold query with one randomized bit.
pub trait Population {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Asks user `index` whether their score is below `threshold`.
    fn query(&mut self, index: usize, threshold: f64) -> Result<bool>;
}

/// Users holding their own examples and answering through [`user_response`].
pub struct LocalPopulation<'a, R> {
    users: &'a [LabeledExample],
    epsilon: f64,
    kind: ScoreKind,
    rng: R,
}

impl<'a, R: Rng> LocalPopulation<'a, R> {
    pub fn new(users: &'a [LabeledExample], epsilon: f64, kind: ScoreKind, rng: R) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            users,
            epsilon,
            kind,
            rng,
        })
    }
}

impl<R: Rng> Population for LocalPopulation<'_, R> {
    fn len(&self) -> usize {
        self.users.len()
    }

    fn query(&mut self, index: usize, threshold: f64) -> Result<bool> {
        user_response(&self.users[index], threshold, self.epsilon, self.kind, &mut self.rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreCalibration {
    pub epsilon: f64,
    pub alpha: f64,
    /// Band width `delta`; pass [`crate::mechanisms::delta_s`] for the
    /// guaranteed correction.
    pub delta: f64,
    pub rounds: usize,
    pub kind: ScoreKind,
    pub target: Target,
    pub exhaustive: bool,
}

/// Aggregator side, seeing only the privatized bits.
pub fn aggregate<P: Population + ?Sized>(
    population: &mut P,
    settings: &ScoreCalibration,
) -> Result<CalibrationResult> {
    check_alpha(settings.alpha)?;
    check_epsilon(settings.epsilon)?;
    if !(settings.delta > 0.0 && settings.delta < 1.0) {
        return Err(Error::param(format!(
            "delta = {} must lie in (0, 1)",
            settings.delta
        )));
    }
    let plan = plan_cohorts(population.len(), settings.rounds)?;
    let search = Bisection {
        target_level: settings.target.level(settings.alpha, settings.delta),
        delta: settings.delta,
        max_rounds: plan.rounds(),
        tau: 0.5f64.powi(plan.rounds().min(1074) as i32),
        exhaustive: settings.exhaustive,
    };
    search.run(|round, q| {
        let cohort = plan.cohort(round);
        let size = cohort.len();
        let mut ones = 0usize;
        for user in cohort {
            if population.query(user, q)? {
                ones += 1;
            }
        }
        let noisy_mean = ones as f64 / size as f64;
        Ok(Probe {
            z: debias_mean(noisy_mean, settings.epsilon)?,
            cohort_size: size,
            noisy_mean: Some(noisy_mean),
        })
    })
}

/// Runs both sides of the protocol on `calib`; `rng` drives the users'
/// randomized responses and rand-APS uniforms.
pub fn calibrate_s<R: Rng>(
    calib: &[LabeledExample],
    settings: &ScoreCalibration,
    rng: R,
) -> Result<CalibrationResult> {
    let mut users = LocalPopulation::new(calib, settings.epsilon, settings.kind, rng)?;
    aggregate(&mut users, settings)
}
