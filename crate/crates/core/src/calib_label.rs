//! Label-perturbation calibration (LDP-CP-L).
//!
//! Users send their posterior together with a k-RR perturbed label. Under the
//! uniform-noise channel the noisy-label score CDF mixes the clean one with
//! the CDF of a uniformly random label's score,
//!
//! ```text
//! F_noisy(q) = (1 - beta) F_clean(q) + beta F_rand(q),
//! ```
//!
//! so the aggregator estimates `F_clean` by inverting the mixture and bisects
//! for the level-`1 - alpha` threshold.

use rand::Rng;

use crate::conformal::{all_scores, draw_uniforms, check_alpha, LabeledExample, ProbVector, ScoreKind};
use crate::error::{Error, Result};
use crate::mechanisms::{self, delta_l, krr_flip_prob, rounds_for_tau};
use crate::search::{Bisection, CalibrationResult, Probe, Target};

/// What the aggregator receives from one user.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyRecord {
    pub probs: ProbVector,
    pub reported_label: usize,
}

/// The privatized calibration set. Holds no true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCalibrationSet {
    records: Vec<NoisyRecord>,
    epsilon: f64,
    beta: f64,
    k: usize,
}

impl NoisyCalibrationSet {
    /// Wraps reports that were already randomized with k-RR at `epsilon`.
    pub fn from_reports(records: Vec<NoisyRecord>, epsilon: f64, k: usize) -> Result<Self> {
        let beta = krr_flip_prob(epsilon, k)?;
        for r in &records {
            if r.probs.k() != k {
                return Err(Error::InvalidProbVector(format!(
                    "record has {} classes, expected {k}",
                    r.probs.k()
                )));
            }
            if r.reported_label >= k {
                return Err(Error::InvalidClass {
                    label: r.reported_label,
                    k,
                });
            }
        }
        Ok(Self {
            records,
            epsilon,
            beta,
            k,
        })
    }

    pub fn records(&self) -> &[NoisyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// User side: every label goes through k-RR independently; posteriors are
/// passed on untouched.
pub fn perturb_labels<R: Rng + ?Sized>(
    calib: &[LabeledExample],
    epsilon: f64,
    k: usize,
    rng: &mut R,
) -> Result<NoisyCalibrationSet> {
    let beta = krr_flip_prob(epsilon, k)?;
    let keep = mechanisms::keep_probability(epsilon, k);
    let records = calib
        .iter()
        .map(|ex| {
            if ex.k() != k {
                return Err(Error::InvalidProbVector(format!(
                    "record has {} classes, expected {k}",
                    ex.k()
                )));
            }
            if ex.label >= k {
                return Err(Error::InvalidClass { label: ex.label, k });
            }
            Ok(NoisyRecord {
                probs: ex.probs.clone(),
                reported_label: mechanisms::krr_unchecked(ex.label, keep, k, rng),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoisyCalibrationSet {
        records,
        epsilon,
        beta,
        k,
    })
}

/// Empirical CDFs of the noisy-label scores and of a uniformly random label's
/// score, precomputed once per search.
///
/// Rand-APS uniforms are drawn once per record and class here, so every probe
/// of one search sees the same scores and both CDFs stay monotone in `q`.
#[derive(Debug, Clone)]
pub struct NoisyScores {
    noisy: Vec<f64>,
    pooled: Vec<f64>,
    beta: f64,
}

impl NoisyScores {
    pub fn new<R: Rng + ?Sized>(
        set: &NoisyCalibrationSet,
        kind: ScoreKind,
        rng: &mut R,
    ) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyInput("noisy calibration set"));
        }
        let mut noisy = Vec::with_capacity(set.len());
        let mut pooled = Vec::with_capacity(set.len() * set.k());
        for r in &set.records {
            let draws = draw_uniforms(kind, set.k(), rng);
            let scores = all_scores(&r.probs, kind, &draws);
            noisy.push(scores[r.reported_label]);
            pooled.extend_from_slice(&scores);
        }
        noisy.sort_unstable_by(f64::total_cmp);
        pooled.sort_unstable_by(f64::total_cmp);
        Ok(Self {
            noisy,
            pooled,
            beta: set.beta(),
        })
    }

    /// Fraction of noisy-label scores at most `q`.
    pub fn f_hat_n(&self, q: f64) -> f64 {
        self.noisy.partition_point(|&s| s <= q) as f64 / self.noisy.len() as f64
    }

    /// Mean normalized prediction-set size `|C_q(x)| / k`.
    pub fn f_hat_r(&self, q: f64) -> f64 {
        self.pooled.partition_point(|&s| s <= q) as f64 / self.pooled.len() as f64
    }

    /// Channel-corrected estimate of the clean-label CDF at `q`.
    pub fn f_hat_c(&self, q: f64) -> f64 {
        (self.f_hat_n(q) - self.beta * self.f_hat_r(q)) / (1.0 - self.beta)
    }

    pub fn len(&self) -> usize {
        self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy.is_empty()
    }
}

/// Inverts the noise mixture: `(F_noisy - beta F_rand) / (1 - beta)`.
/// The result is not clamped to `[0, 1]`.
pub fn f_hat_c(fn_val: f64, fr_val: f64, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::param(format!("beta = {beta} must lie in [0, 1)")));
    }
    Ok((fn_val - beta * fr_val) / (1.0 - beta))
}

/// Aggregator-side search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelCalibration {
    pub alpha: f64,
    pub delta_fail: f64,
    pub tau: f64,
    pub kind: ScoreKind,
    pub target: Target,
    pub exhaustive: bool,
}

impl Default for LabelCalibration {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            delta_fail: 0.1,
            tau: 2f64.powi(-14),
            kind: ScoreKind::Aps,
            target: Target::Plain,
            exhaustive: false,
        }
    }
}

/// Aggregator side: bisection on `[0, 1]` with the channel-corrected CDF,
/// stopping inside the `delta_L / 2` band around the target, once the
/// interval is narrower than `tau`, or after `ceil(log2(1 / tau))` rounds.
///
/// `rng` only supplies rand-APS uniforms.
pub fn calibrate_l<R: Rng + ?Sized>(
    noisy: &NoisyCalibrationSet,
    settings: &LabelCalibration,
    rng: &mut R,
) -> Result<CalibrationResult> {
    check_alpha(settings.alpha)?;
    let rounds = rounds_for_tau(settings.tau)?;
    if noisy.is_empty() {
        return Err(Error::EmptyInput("noisy calibration set"));
    }
    let delta = delta_l(noisy.len(), noisy.epsilon(), noisy.k(), settings.delta_fail)?;
    let target_level = settings.target.level(settings.alpha, delta);
    let search = Bisection {
        target_level,
        delta,
        max_rounds: rounds,
        tau: settings.tau,
        exhaustive: settings.exhaustive,
    };
    if target_level >= 1.0 {
        return search.run(|_, _| unreachable!("saturated searches never probe"));
    }

    let scores = NoisyScores::new(noisy, settings.kind, rng)?;
    search.run(|_, q| {
        Ok(Probe {
            z: scores.f_hat_c(q),
            cohort_size: scores.len(),
            noisy_mean: None,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{conformal_quantile, score};
    use crate::simulate::{gen_synthetic, SyntheticConfig};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    fn reports(rows: &[(&[f64], usize)], epsilon: f64) -> NoisyCalibrationSet {
        let k = rows[0].0.len();
        let records = rows
            .iter()
            .map(|&(p, y)| NoisyRecord {
                probs: pv(p),
                reported_label: y,
            })
            .collect();
        NoisyCalibrationSet::from_reports(records, epsilon, k).unwrap()
    }

    fn synthetic(k: usize, n: usize, seed: u64) -> Vec<LabeledExample> {
        let cfg = SyntheticConfig {
            k,
            n_calib: n,
            n_test: 0,
            ..SyntheticConfig::default()
        };
        gen_synthetic(&cfg, seed).unwrap().0
    }

    #[test]
    fn perturb_noiseless_and_empty() {
        let data = synthetic(5, 500, 1);
        let noisy = perturb_labels(&data, 50.0, 5, &mut rng(2)).unwrap();
        for (ex, rec) in data.iter().zip(noisy.records()) {
            assert_eq!(ex.label, rec.reported_label);
            assert_eq!(ex.probs, rec.probs);
        }
        let empty = perturb_labels(&[], 1.0, 5, &mut rng(2)).unwrap();
        assert!(empty.is_empty());
        assert!(matches!(
            perturb_labels(&data, 1.0, 4, &mut rng(2)),
            Err(Error::InvalidProbVector(_))
        ));
    }

    #[test]
    fn perturb_rejects_bad_label() {
        let bad = LabeledExample {
            probs: pv(&[0.5, 0.5]),
            label: 3,
        };
        assert!(matches!(
            perturb_labels(&[bad], 1.0, 2, &mut rng(0)),
            Err(Error::InvalidClass { label: 3, k: 2 })
        ));
    }

    #[test]
    fn perturb_keep_rate_matches_channel() {
        let p = pv(&[0.125; 8]);
        let data: Vec<_> = (0..100_000)
            .map(|_| LabeledExample::new(p.clone(), 3).unwrap())
            .collect();
        let noisy = perturb_labels(&data, 4.0, 8, &mut rng(9)).unwrap();
        let kept = noisy.records().iter().filter(|r| r.reported_label == 3).count();
        // 1 - beta + beta / k at k = 8, eps = 4.
        assert_abs_diff_eq!(kept as f64 / 1e5, 0.886_360_223_541_884, epsilon = 0.005);
        assert_abs_diff_eq!(noisy.beta(), 0.129_874_030_237_846_83, epsilon = 1e-15);
    }

    #[test]
    fn empirical_cdf_examples() {
        // HPS noisy-label scores 0.2, 0.5, 0.9.
        let set = reports(
            &[(&[0.8, 0.2], 0), (&[0.5, 0.5], 1), (&[0.9, 0.1], 1)],
            50.0,
        );
        let s = NoisyScores::new(&set, ScoreKind::Hps, &mut rng(0)).unwrap();
        assert_abs_diff_eq!(s.f_hat_n(0.5), 2.0 / 3.0);
        assert_eq!(s.f_hat_n(1.0), 1.0);
        assert_eq!(s.f_hat_n(0.0), 0.0);
        assert_eq!(s.f_hat_r(1.0), 1.0);

        let single = reports(&[(&[0.5, 0.3, 0.2], 0)], 50.0);
        let s = NoisyScores::new(&single, ScoreKind::Hps, &mut rng(0)).unwrap();
        assert_abs_diff_eq!(s.f_hat_r(0.75), 2.0 / 3.0);
        assert_eq!(s.f_hat_r(0.4), 0.0);

        let empty = NoisyCalibrationSet::from_reports(Vec::new(), 1.0, 3).unwrap();
        assert!(matches!(
            NoisyScores::new(&empty, ScoreKind::Hps, &mut rng(0)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn mixture_inversion_examples() {
        assert_eq!(f_hat_c(0.7, 0.2, 0.0).unwrap(), 0.7);
        for beta in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(f_hat_c(0.37, 0.37, beta).unwrap(), 0.37, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            f_hat_c(0.9, 0.6, 0.129_874_030_237_846_83).unwrap(),
            0.944_777_664_873_057_7,
            epsilon = 1e-12
        );
        assert!(f_hat_c(0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn cdfs_are_monotone() {
        let data = synthetic(6, 2_000, 4);
        let noisy = perturb_labels(&data, 2.0, 6, &mut rng(5)).unwrap();
        for kind in ScoreKind::ALL {
            let s = NoisyScores::new(&noisy, kind, &mut rng(6)).unwrap();
            let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
            for w in grid.windows(2) {
                assert!(s.f_hat_n(w[0]) <= s.f_hat_n(w[1]));
                assert!(s.f_hat_r(w[0]) <= s.f_hat_r(w[1]));
            }
        }
    }

    #[test]
    fn mixture_identity_holds_at_scale() {
        let (k, eps) = (8, 2.0);
        let data = synthetic(k, 100_000, 21);
        let noisy = perturb_labels(&data, eps, k, &mut rng(22)).unwrap();
        let beta = noisy.beta();
        let s = NoisyScores::new(&noisy, ScoreKind::Hps, &mut rng(0)).unwrap();
        let mut clean: Vec<f64> = data
            .iter()
            .map(|ex| score(&ex.probs, ex.label, ScoreKind::Hps, 0.0).unwrap())
            .collect();
        clean.sort_unstable_by(f64::total_cmp);
        for i in 0..100 {
            let q = i as f64 / 99.0;
            let f_clean = clean.partition_point(|&x| x <= q) as f64 / clean.len() as f64;
            let mixed = (1.0 - beta) * f_clean + beta * s.f_hat_r(q);
            assert!((s.f_hat_n(q) - mixed).abs() < 0.01, "q = {q}");
        }
    }

    #[test]
    fn noiseless_search_matches_conformal_quantile() {
        let data = synthetic(8, 5_000, 31);
        let noisy = perturb_labels(&data, 50.0, 8, &mut rng(32)).unwrap();
        let settings = LabelCalibration {
            kind: ScoreKind::Hps,
            exhaustive: true,
            ..LabelCalibration::default()
        };
        let res = calibrate_l(&noisy, &settings, &mut rng(33)).unwrap();
        let mut scores: Vec<f64> = data
            .iter()
            .map(|ex| score(&ex.probs, ex.label, ScoreKind::Hps, 0.0).unwrap())
            .collect();
        let brute = conformal_quantile(&mut scores.clone(), 0.1).unwrap().q;
        scores.sort_unstable_by(f64::total_cmp);
        let max_gap = scores.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!((res.q_hat - brute).abs() <= max_gap.max(settings.tau));
    }

    #[test]
    fn round_budget_and_determinism() {
        let data = synthetic(8, 3_000, 41);
        let noisy = perturb_labels(&data, 4.0, 8, &mut rng(42)).unwrap();
        for kind in ScoreKind::ALL {
            for exhaustive in [false, true] {
                let settings = LabelCalibration {
                    kind,
                    exhaustive,
                    ..LabelCalibration::default()
                };
                let a = calibrate_l(&noisy, &settings, &mut rng(43)).unwrap();
                let b = calibrate_l(&noisy, &settings, &mut rng(43)).unwrap();
                assert!(a.rounds_used >= 1 && a.rounds_used <= 14);
                assert_eq!(a, b);
                assert!((0.0..=1.0).contains(&a.q_hat));
            }
        }
    }

    #[test]
    fn shifted_target_never_lowers_threshold() {
        for seed in 0..5 {
            let data = synthetic(8, 4_000, 50 + seed);
            let noisy = perturb_labels(&data, 4.0, 8, &mut rng(seed)).unwrap();
            let plain = LabelCalibration {
                exhaustive: true,
                ..LabelCalibration::default()
            };
            let starred = LabelCalibration {
                target: Target::Shifted,
                ..plain
            };
            let a = calibrate_l(&noisy, &plain, &mut rng(1)).unwrap();
            let b = calibrate_l(&noisy, &starred, &mut rng(1)).unwrap();
            assert!(b.q_hat >= a.q_hat);
            assert!(b.target_level > a.target_level);
        }
    }

    #[test]
    fn saturates_when_target_reaches_one() {
        // Tiny n gives a huge correction; the shifted target exceeds 1.
        let data = synthetic(8, 20, 3);
        let noisy = perturb_labels(&data, 1.0, 8, &mut rng(0)).unwrap();
        let settings = LabelCalibration {
            target: Target::Shifted,
            ..LabelCalibration::default()
        };
        let res = calibrate_l(&noisy, &settings, &mut rng(0)).unwrap();
        assert!(res.saturated);
        assert_eq!(res.q_hat, 1.0);
    }

    #[test]
    fn parameter_errors() {
        let data = synthetic(3, 50, 3);
        let noisy = perturb_labels(&data, 1.0, 3, &mut rng(0)).unwrap();
        let bad_alpha = LabelCalibration {
            alpha: 0.0,
            ..LabelCalibration::default()
        };
        assert!(calibrate_l(&noisy, &bad_alpha, &mut rng(0)).is_err());
        let bad_tau = LabelCalibration {
            tau: 1.5,
            ..LabelCalibration::default()
        };
        assert!(calibrate_l(&noisy, &bad_tau, &mut rng(0)).is_err());
        let empty = NoisyCalibrationSet::from_reports(Vec::new(), 1.0, 3).unwrap();
        assert!(matches!(
            calibrate_l(&empty, &LabelCalibration::default(), &mut rng(0)),
            Err(Error::EmptyInput(_))
        ));
    }
}
