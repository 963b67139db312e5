//! Conformity scores, prediction sets and the non-private split conformal
//! quantile.
//!
//! All three score kinds are functions of the classifier posterior only, so a
//! [`ProbVector`] stands in for the input `x` everywhere in this crate. Scores
//! lie in `[0, 1]`; lower means the label agrees better with the model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A classifier posterior over `k >= 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates that `probs` is a distribution: finite, nonnegative entries
    /// summing to one within `1e-9`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbVector(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Like [`ProbVector::new`], but rescales vectors whose sum is off by at
    /// most `tolerance`. Vectors already within `1e-9` are kept bit-for-bit.
    pub fn normalized(mut probs: Vec<f64>, tolerance: f64) -> Result<Self> {
        Self::check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        let gap = (sum - 1.0).abs();
        if gap > tolerance {
            return Err(Error::InvalidProbVector(format!(
                "entries sum to {sum}, which is not within {tolerance} of 1"
            )));
        }
        if gap > SUM_TOLERANCE {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self(probs))
    }

    fn check_entries(probs: &[f64]) -> Result<()> {
        if probs.len() < 2 {
            return Err(Error::InvalidProbVector(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidProbVector(format!(
                "entry {p} is not a finite nonnegative number"
            )));
        }
        Ok(())
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                if p > best.1 {
                    (i, p)
                } else {
                    best
                }
            })
            .0
    }

    fn check_class(&self, y: usize) -> Result<()> {
        if y < self.k() {
            Ok(())
        } else {
            Err(Error::InvalidClass {
                label: y,
                k: self.k(),
            })
        }
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A calibration or test record: the model posterior and a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub probs: ProbVector,
    pub label: usize,
}

impl LabeledExample {
    pub fn new(probs: ProbVector, label: usize) -> Result<Self> {
        probs.check_class(label)?;
        Ok(Self { probs, label })
    }

    pub fn k(&self) -> usize {
        self.probs.k()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScoreKind {
    /// `1 - p_y`.
    #[serde(rename = "hps")]
    Hps,
    /// Total mass of the classes at least as likely as `y`.
    #[serde(rename = "aps")]
    Aps,
    /// Mass of the strictly more likely classes plus `u * p_y`, `u ~ U[0, 1]`.
    #[serde(rename = "raps")]
    RandAps,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Hps, ScoreKind::Aps, ScoreKind::RandAps];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Hps => "hps",
            ScoreKind::Aps => "aps",
            ScoreKind::RandAps => "raps",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, ScoreKind::RandAps)
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hps" => Ok(ScoreKind::Hps),
            "aps" => Ok(ScoreKind::Aps),
            "raps" | "rand-aps" | "rand_aps" => Ok(ScoreKind::RandAps),
            other => Err(Error::param(format!(
                "unknown score kind {other:?} (expected hps, aps or raps)"
            ))),
        }
    }
}

pub fn score_hps(p: &ProbVector, y: usize) -> Result<f64> {
    p.check_class(y)?;
    Ok((1.0 - p.0[y]).clamp(0.0, 1.0))
}

/// APS score. Classes tied with `y` are part of the sum.
pub fn score_aps(p: &ProbVector, y: usize) -> Result<f64> {
    p.check_class(y)?;
    let own = p.0[y];
    let mass: f64 = p.0.iter().filter(|&&pj| pj >= own).sum();
    Ok(mass.clamp(0.0, 1.0))
}

/// Randomized APS score. `u = 1` gives the APS score on tie-free vectors and
/// `u = 0` drops the own-class mass.
pub fn score_rand_aps(p: &ProbVector, y: usize, u: f64) -> Result<f64> {
    p.check_class(y)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::param(format!("u = {u} must lie in [0, 1]")));
    }
    let own = p.0[y];
    let above: f64 = p.0.iter().filter(|&&pj| pj > own).sum();
    Ok((above + u * own).clamp(0.0, 1.0))
}

/// Score of class `y` under `kind`; `u` is only read for [`ScoreKind::RandAps`].
pub fn score(p: &ProbVector, y: usize, kind: ScoreKind, u: f64) -> Result<f64> {
    match kind {
        ScoreKind::Hps => score_hps(p, y),
        ScoreKind::Aps => score_aps(p, y),
        ScoreKind::RandAps => score_rand_aps(p, y, u),
    }
}

/// Scores of every class at once in `O(k log k)`.
///
/// `draws` supplies one uniform per class for rand-APS and is ignored
/// otherwise.
pub fn all_scores(p: &ProbVector, kind: ScoreKind, draws: &[f64]) -> Vec<f64> {
    let probs = p.as_slice();
    match kind {
        ScoreKind::Hps => probs.iter().map(|&pi| (1.0 - pi).clamp(0.0, 1.0)).collect(),
        ScoreKind::Aps | ScoreKind::RandAps => {
            let k = probs.len();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
            // For every class, mass strictly above it and mass at-or-above it.
            let mut above = vec![0.0; k];
            let mut at_or_above = vec![0.0; k];
            let mut cum = 0.0;
            let mut start = 0;
            while start < k {
                let level = probs[order[start]];
                let mut end = start;
                let mut tied = 0.0;
                while end < k && probs[order[end]] == level {
                    tied += probs[order[end]];
                    end += 1;
                }
                for &i in &order[start..end] {
                    above[i] = cum;
                    at_or_above[i] = cum + tied;
                }
                cum += tied;
                start = end;
            }
            if kind == ScoreKind::Aps {
                at_or_above.into_iter().map(|s| s.clamp(0.0, 1.0)).collect()
            } else {
                debug_assert_eq!(draws.len(), k);
                (0..k)
                    .map(|i| (above[i] + draws[i] * probs[i]).clamp(0.0, 1.0))
                    .collect()
            }
        }
    }
}

/// Fresh `U[0, 1]` draws, one per class, or none for deterministic scores.
pub fn draw_uniforms<R: Rng + ?Sized>(kind: ScoreKind, k: usize, rng: &mut R) -> Vec<f64> {
    if kind.is_randomized() {
        (0..k).map(|_| rng.random::<f64>()).collect()
    } else {
        Vec::new()
    }
}

/// Sorted class indices whose score is at most the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, class: usize) -> bool {
        self.members.binary_search(&class).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `C_q(x) = { y : S(x, y) <= q }` with one fresh uniform per class for
/// rand-APS.
pub fn prediction_set<R: Rng + ?Sized>(
    p: &ProbVector,
    q: f64,
    kind: ScoreKind,
    rng: &mut R,
) -> PredictionSet {
    let draws = draw_uniforms(kind, p.k(), rng);
    prediction_set_with_draws(p, q, kind, &draws)
}

/// [`prediction_set`] with caller-supplied rand-APS uniforms, so the same
/// draws can be reused across thresholds.
pub fn prediction_set_with_draws(
    p: &ProbVector,
    q: f64,
    kind: ScoreKind,
    draws: &[f64],
) -> PredictionSet {
    let members = all_scores(p, kind, draws)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s <= q)
        .map(|(i, _)| i)
        .collect();
    PredictionSet { members }
}

/// Threshold chosen by split conformal calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpQuantile {
    pub q: f64,
    /// `ceil((n + 1)(1 - alpha)) > n`: no order statistic is large enough and
    /// the maximal score 1.0 is returned.
    pub saturated: bool,
}

/// 1-based rank of the conformal order statistic, `ceil((n + 1)(1 - alpha))`.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    // The epsilon guards against (n + 1)(1 - alpha) landing a hair above an
    // integer through rounding, e.g. 10 * 0.9.
    ((n as f64 + 1.0) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize
}

/// The conformal quantile of precomputed scores. Sorts `scores` in place.
pub fn conformal_quantile(scores: &mut [f64], alpha: f64) -> Result<CpQuantile> {
    check_alpha(alpha)?;
    if scores.is_empty() {
        return Err(Error::EmptyInput("calibration set"));
    }
    let rank = conformal_rank(scores.len(), alpha);
    if rank > scores.len() {
        return Ok(CpQuantile {
            q: 1.0,
            saturated: true,
        });
    }
    let (_, kth, _) = scores.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(CpQuantile {
        q: *kth,
        saturated: false,
    })
}

/// Non-private split conformal calibration on clean labels.
///
/// `rng` only supplies the rand-APS uniforms.
pub fn non_private_cp<R: Rng + ?Sized>(
    calib: &[LabeledExample],
    alpha: f64,
    kind: ScoreKind,
    rng: &mut R,
) -> Result<CpQuantile> {
    let mut scores = calib
        .iter()
        .map(|ex| {
            let u = if kind.is_randomized() {
                rng.random::<f64>()
            } else {
                0.0
            };
            score(&ex.probs, ex.label, kind, u)
        })
        .collect::<Result<Vec<_>>>()?;
    conformal_quantile(&mut scores, alpha)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}
