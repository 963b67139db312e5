//! Synthetic classifiers and the seeded Monte Carlo harness.
//!
//! A synthetic record draws its label from the class prior and its posterior
//! from a Dirichlet distribution with parameter `1` on every class except the
//! label, which gets `1 + concentration`. The mean posterior mass on the
//! label is `(1 + c) / (k + c)`: uniform and label-independent as `c -> 0`,
//! one-hot as `c -> inf`. Calibration and test records are i.i.d. draws of the
//! same process, so they are exchangeable.
//!
//! Every seed owns a family of ChaCha streams keyed by purpose, so any single
//! method can be replayed in isolation and results do not depend on the order
//! in which seeds run.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::calib_label::{calibrate_l, perturb_labels, LabelCalibration};
use crate::calib_score::{calibrate_s, ScoreCalibration};
use crate::conformal::{
    all_scores, check_alpha, draw_uniforms, non_private_cp, LabeledExample, ProbVector, ScoreKind,
};
use crate::error::{Error, Result};
use crate::mechanisms::{check_delta_fail, check_epsilon, delta_l, delta_s, eps_effective, rounds_for_tau};
use crate::search::Target;

/// Concentration giving argmax accuracy of about 0.7 at `k = 8`.
pub const DEFAULT_CONCENTRATION: f64 = 2.8;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ClassPrior {
    #[default]
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub k: usize,
    pub n_calib: usize,
    pub n_test: usize,
    pub concentration: f64,
    pub prior: ClassPrior,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            k: 8,
            n_calib: 20_000,
            n_test: 20_000,
            concentration: DEFAULT_CONCENTRATION,
            prior: ClassPrior::Uniform,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::param(format!("k = {} must be at least 2", self.k)));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::param(format!(
                "concentration = {} must be positive and finite",
                self.concentration
            )));
        }
        if let ClassPrior::Explicit(w) = &self.prior {
            if w.len() != self.k {
                return Err(Error::param(format!(
                    "class prior has {} entries, expected k = {}",
                    w.len(),
                    self.k
                )));
            }
            ProbVector::new(w.clone())
                .map_err(|e| Error::param(format!("class prior: {e}")))?;
        }
        Ok(())
    }
}

/// Purposes of the per-seed random streams.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Data,
    LabelNoise,
    Calibrate(Method),
    Evaluate(Method),
}

impl Stream {
    pub fn id(self) -> u64 {
        match self {
            Stream::Data => 0,
            Stream::LabelNoise => 1,
            Stream::Calibrate(m) => 16 + m as u64,
            Stream::Evaluate(m) => 32 + m as u64,
        }
    }
}

/// The generator for one purpose of one seed.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Draws the calibration and test sets for `seed`.
pub fn gen_synthetic(
    config: &SyntheticConfig,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    config.validate()?;
    let mut rng = substream(seed, Stream::Data);
    let labels = match &config.prior {
        ClassPrior::Uniform => None,
        ClassPrior::Explicit(w) => Some(
            WeightedIndex::new(w).map_err(|e| Error::param(format!("class prior: {e}")))?,
        ),
    };
    let flat = Gamma::new(1.0, 1.0).expect("valid gamma");
    let peaked = Gamma::new(1.0 + config.concentration, 1.0)
        .map_err(|e| Error::param(format!("concentration: {e}")))?;

    let draw = |rng: &mut ChaCha8Rng| -> Result<LabeledExample> {
        let label = match &labels {
            None => rng.random_range(0..config.k),
            Some(w) => w.sample(rng),
        };
        let mut g: Vec<f64> = (0..config.k)
            .map(|j| if j == label { peaked.sample(rng) } else { flat.sample(rng) })
            .collect();
        let total: f64 = g.iter().sum();
        g.iter_mut().for_each(|x| *x /= total);
        LabeledExample::new(ProbVector::new(g)?, label)
    };
    let calib = (0..config.n_calib)
        .map(|_| draw(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    let test = (0..config.n_test)
        .map(|_| draw(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((calib, test))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub coverage: f64,
    pub mean_set_size: f64,
}

/// Empirical coverage and mean set size of threshold `q` on `test`, with
/// fresh rand-APS uniforms per record and class.
pub fn evaluate<R: Rng + ?Sized>(
    test: &[LabeledExample],
    q: f64,
    kind: ScoreKind,
    rng: &mut R,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test set"));
    }
    let mut covered = 0usize;
    let mut total_size = 0usize;
    for ex in test {
        let draws = draw_uniforms(kind, ex.k(), rng);
        let scores = all_scores(&ex.probs, kind, &draws);
        covered += usize::from(scores[ex.label] <= q);
        total_size += scores.iter().filter(|&&s| s <= q).count();
    }
    let n = test.len() as f64;
    Ok(Evaluation {
        coverage: covered as f64 / n,
        mean_set_size: total_size as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    NonPrivate,
    LdpCpL,
    LdpCpLStar,
    LdpCpS,
    LdpCpSStar,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::NonPrivate,
        Method::LdpCpL,
        Method::LdpCpLStar,
        Method::LdpCpS,
        Method::LdpCpSStar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NonPrivate => "NON_PRIVATE",
            Method::LdpCpL => "LDP_CP_L",
            Method::LdpCpLStar => "LDP_CP_L_STAR",
            Method::LdpCpS => "LDP_CP_S",
            Method::LdpCpSStar => "LDP_CP_S_STAR",
        }
    }

    /// Starred variants aim at `1 - alpha + delta`.
    pub fn target(self) -> Target {
        match self {
            Method::LdpCpLStar | Method::LdpCpSStar => Target::Shifted,
            _ => Target::Plain,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s
            .trim()
            .to_ascii_uppercase()
            .replace('-', "_")
            .replace('*', "_STAR");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::param(format!("unknown method {s:?}")))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// One `(seed, method, score)` outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub method: Method,
    pub score: ScoreKind,
    pub epsilon: f64,
    pub eps_eff: f64,
    pub alpha: f64,
    /// Correction term of the method; zero for the non-private baseline.
    pub delta_corr: f64,
    pub q_hat: f64,
    pub coverage: f64,
    pub mean_set_size: f64,
}

/// A row that failed, with enough context to report it.
#[derive(Debug)]
pub struct RowFailure {
    pub seed: u64,
    pub method: Method,
    pub score: ScoreKind,
    pub error: Error,
}

pub type RowOutcome = std::result::Result<ExperimentRecord, RowFailure>;

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub config: SyntheticConfig,
    pub methods: Vec<Method>,
    pub kinds: Vec<ScoreKind>,
    pub epsilon: f64,
    pub alpha: f64,
    pub delta_fail: f64,
    pub tau: f64,
}

impl Experiment {
    fn validate(&self) -> Result<()> {
        self.config.validate()?;
        check_epsilon(self.epsilon)?;
        check_alpha(self.alpha)?;
        check_delta_fail(self.delta_fail)?;
        rounds_for_tau(self.tau)?;
        if self.methods.is_empty() || self.kinds.is_empty() {
            return Err(Error::param("need at least one method and one score kind"));
        }
        Ok(())
    }
}

/// Runs seeds in parallel (with the `parallel` feature); rows come back ordered by seed, then score
/// kind, then method, whatever the schedule.
pub fn run_experiment_rows(exp: &Experiment, seeds: &[u64]) -> Result<Vec<RowOutcome>> {
    exp.validate()?;
    if seeds.is_empty() {
        return Err(Error::param("need at least one seed"));
    }
    #[cfg(feature = "parallel")]
    let per_seed: Vec<Vec<RowOutcome>> = seeds.par_iter().map(|&s| run_seed(exp, s)).collect();
    #[cfg(not(feature = "parallel"))]
    let per_seed: Vec<Vec<RowOutcome>> = seeds.iter().map(|&s| run_seed(exp, s)).collect();
    Ok(per_seed.into_iter().flatten().collect())
}

/// Like [`run_experiment_rows`], but fails on the first failed row.
pub fn run_experiment(exp: &Experiment, seeds: &[u64]) -> Result<Vec<ExperimentRecord>> {
    run_experiment_rows(exp, seeds)?
        .into_iter()
        .map(|row| {
            row.map_err(|f| Error::param(format!(
                "seed {} method {} score {}: {}",
                f.seed, f.method, f.score, f.error
            )))
        })
        .collect()
}

fn run_seed(exp: &Experiment, seed: u64) -> Vec<RowOutcome> {
    let fail_all = |error: &Error| -> Vec<RowOutcome> {
        exp.kinds
            .iter()
            .flat_map(|&score| {
                exp.methods.iter().map(move |&method| {
                    Err(RowFailure {
                        seed,
                        method,
                        score,
                        error: Error::param(error.to_string()),
                    })
                })
            })
            .collect()
    };
    let (calib, test) = match gen_synthetic(&exp.config, seed) {
        Ok(d) => d,
        Err(e) => return fail_all(&e),
    };
    let needs_labels = exp
        .methods
        .iter()
        .any(|m| matches!(m, Method::LdpCpL | Method::LdpCpLStar));
    let noisy = if needs_labels {
        match perturb_labels(&calib, exp.epsilon, exp.config.k, &mut substream(seed, Stream::LabelNoise)) {
            Ok(n) => Some(n),
            Err(e) => return fail_all(&e),
        }
    } else {
        None
    };

    let mut rows = Vec::with_capacity(exp.kinds.len() * exp.methods.len());
    for &kind in &exp.kinds {
        for &method in &exp.methods {
            let row = run_method(exp, seed, method, kind, &calib, &test, noisy.as_ref())
                .map_err(|error| RowFailure {
                    seed,
                    method,
                    score: kind,
                    error,
                });
            rows.push(row);
        }
    }
    rows
}

fn run_method(
    exp: &Experiment,
    seed: u64,
    method: Method,
    kind: ScoreKind,
    calib: &[LabeledExample],
    test: &[LabeledExample],
    noisy: Option<&crate::calib_label::NoisyCalibrationSet>,
) -> Result<ExperimentRecord> {
    let mut rng = substream(seed, Stream::Calibrate(method));
    let (q_hat, delta_corr) = match method {
        Method::NonPrivate => (non_private_cp(calib, exp.alpha, kind, &mut rng)?.q, 0.0),
        Method::LdpCpL | Method::LdpCpLStar => {
            let noisy = noisy.expect("labels perturbed for label methods");
            let settings = LabelCalibration {
                alpha: exp.alpha,
                delta_fail: exp.delta_fail,
                tau: exp.tau,
                kind,
                target: method.target(),
                exhaustive: false,
            };
            let res = calibrate_l(noisy, &settings, &mut rng)?;
            (res.q_hat, res.delta_applied)
        }
        Method::LdpCpS | Method::LdpCpSStar => {
            let rounds = rounds_for_tau(exp.tau)?;
            let settings = ScoreCalibration {
                epsilon: exp.epsilon,
                alpha: exp.alpha,
                delta: delta_s(calib.len(), exp.epsilon, exp.delta_fail, rounds)?,
                rounds,
                kind,
                target: method.target(),
                exhaustive: false,
            };
            let res = calibrate_s(calib, &settings, rng)?;
            (res.q_hat, res.delta_applied)
        }
    };
    let eval = evaluate(test, q_hat, kind, &mut substream(seed, Stream::Evaluate(method)))?;
    Ok(ExperimentRecord {
        seed,
        method,
        score: kind,
        epsilon: exp.epsilon,
        eps_eff: eps_effective(exp.epsilon, calib.len().max(1))?,
        alpha: exp.alpha,
        delta_corr,
        q_hat,
        coverage: eval.coverage,
        mean_set_size: eval.mean_set_size,
    })
}

/// Across-seed statistics of one `(method, score)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: Method,
    pub score: ScoreKind,
    pub seeds: usize,
    pub mean_coverage: f64,
    pub sd_coverage: f64,
    pub mean_set_size: f64,
    pub sd_set_size: f64,
    pub mean_delta: f64,
    /// Seeds whose coverage reached `1 - alpha - delta_corr`.
    pub above_floor: usize,
    /// Seeds whose coverage reached `1 - alpha`.
    pub above_target: usize,
}

impl Summary {
    /// Standard error of the mean coverage.
    pub fn coverage_se(&self) -> f64 {
        self.sd_coverage / (self.seeds as f64).sqrt()
    }

    pub fn size_se(&self) -> f64 {
        self.sd_set_size / (self.seeds as f64).sqrt()
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Groups records by `(method, score)` in order of first appearance.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<Summary> {
    let mut keys: Vec<(Method, ScoreKind)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.score)) {
            keys.push((r.method, r.score));
        }
    }
    keys.into_iter()
        .map(|(method, score)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.method == method && r.score == score)
                .collect();
            let cov: Vec<f64> = group.iter().map(|r| r.coverage).collect();
            let size: Vec<f64> = group.iter().map(|r| r.mean_set_size).collect();
            let (mean_coverage, sd_coverage) = mean_sd(&cov);
            let (mean_set_size, sd_set_size) = mean_sd(&size);
            Summary {
                method,
                score,
                seeds: group.len(),
                mean_coverage,
                sd_coverage,
                mean_set_size,
                sd_set_size,
                mean_delta: group.iter().map(|r| r.delta_corr).sum::<f64>() / group.len() as f64,
                above_floor: group
                    .iter()
                    .filter(|r| r.coverage >= 1.0 - r.alpha - r.delta_corr)
                    .count(),
                above_target: group.iter().filter(|r| r.coverage >= 1.0 - r.alpha).count(),
            }
        })
        .collect()
}

/// One cell of the correction-term sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub eps_eff: f64,
    pub delta_l: f64,
    pub delta_s: f64,
}

/// Evaluates both correction terms over the `n x k x eps` grid, iterating
/// `n` outermost. With `shuffle` the `eps_eff` column is `eps / sqrt(n)`,
/// otherwise it repeats `eps`.
pub fn tradeoff_table(
    n_grid: &[usize],
    k_grid: &[usize],
    eps_grid: &[f64],
    delta_fail: f64,
    rounds: usize,
    shuffle: bool,
) -> Result<Vec<TradeoffRow>> {
    if n_grid.is_empty() || k_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::param("tradeoff grids must be nonempty"));
    }
    let mut rows = Vec::with_capacity(n_grid.len() * k_grid.len() * eps_grid.len());
    for &n in n_grid {
        for &k in k_grid {
            for &epsilon in eps_grid {
                rows.push(TradeoffRow {
                    n,
                    k,
                    epsilon,
                    eps_eff: if shuffle {
                        eps_effective(epsilon, n)?
                    } else {
                        epsilon
                    },
                    delta_l: delta_l(n, epsilon, k, delta_fail)?,
                    delta_s: delta_s(n, epsilon, delta_fail, rounds)?,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_experiment(methods: Vec<Method>) -> Experiment {
        Experiment {
            config: SyntheticConfig {
                n_calib: 3_000,
                n_test: 2_000,
                ..SyntheticConfig::default()
            },
            methods,
            kinds: vec![ScoreKind::Hps],
            epsilon: 4.0,
            alpha: 0.1,
            delta_fail: 0.1,
            tau: 2f64.powi(-14),
        }
    }

    #[test]
    fn sharp_classifier_is_one_hot() {
        let cfg = SyntheticConfig {
            n_calib: 1_000,
            n_test: 0,
            concentration: 1e6,
            ..SyntheticConfig::default()
        };
        let (calib, test) = gen_synthetic(&cfg, 1).unwrap();
        assert!(test.is_empty());
        for ex in &calib {
            assert_eq!(ex.probs.argmax(), ex.label);
            assert!(ex.probs.as_slice()[ex.label] > 0.99);
        }
    }

    #[test]
    fn flat_classifier_is_uninformative() {
        let cfg = SyntheticConfig {
            n_calib: 10_000,
            n_test: 0,
            concentration: 1e-9,
            ..SyntheticConfig::default()
        };
        let (calib, _) = gen_synthetic(&cfg, 2).unwrap();
        let hits = calib.iter().filter(|ex| ex.probs.argmax() == ex.label).count();
        assert_abs_diff_eq!(hits as f64 / 1e4, 1.0 / 8.0, epsilon = 0.03);
    }

    #[test]
    fn default_classifier_accuracy() {
        let (calib, _) = gen_synthetic(&SyntheticConfig::default(), 3).unwrap();
        let hits = calib.iter().filter(|ex| ex.probs.argmax() == ex.label).count();
        assert_abs_diff_eq!(hits as f64 / calib.len() as f64, 0.7, epsilon = 0.02);
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = SyntheticConfig {
            n_calib: 200,
            n_test: 100,
            ..SyntheticConfig::default()
        };
        assert_eq!(gen_synthetic(&cfg, 9).unwrap(), gen_synthetic(&cfg, 9).unwrap());
        assert_ne!(gen_synthetic(&cfg, 9).unwrap().0, gen_synthetic(&cfg, 10).unwrap().0);
    }

    #[test]
    fn explicit_prior_is_followed() {
        let cfg = SyntheticConfig {
            k: 3,
            n_calib: 20_000,
            n_test: 0,
            prior: ClassPrior::Explicit(vec![0.7, 0.2, 0.1]),
            ..SyntheticConfig::default()
        };
        let (calib, _) = gen_synthetic(&cfg, 4).unwrap();
        let zeros = calib.iter().filter(|ex| ex.label == 0).count();
        assert_abs_diff_eq!(zeros as f64 / 2e4, 0.7, epsilon = 0.015);
        let bad = SyntheticConfig {
            prior: ClassPrior::Explicit(vec![0.5, 0.6]),
            ..cfg
        };
        assert!(gen_synthetic(&bad, 0).is_err());
    }

    #[test]
    fn evaluate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, test) = gen_synthetic(
            &SyntheticConfig {
                n_calib: 0,
                n_test: 500,
                ..SyntheticConfig::default()
            },
            5,
        )
        .unwrap();
        let full = evaluate(&test, 1.0, ScoreKind::Hps, &mut rng).unwrap();
        assert_eq!(full.coverage, 1.0);
        assert_eq!(full.mean_set_size, 8.0);
        let none = evaluate(&test, 0.0, ScoreKind::Hps, &mut rng).unwrap();
        assert_eq!(none.coverage, 0.0);

        let pair = vec![
            LabeledExample::new(ProbVector::new(vec![0.7, 0.3]).unwrap(), 0).unwrap(),
            LabeledExample::new(ProbVector::new(vec![0.8, 0.2]).unwrap(), 1).unwrap(),
        ];
        let half = evaluate(&pair, 0.5, ScoreKind::Hps, &mut rng).unwrap();
        assert_eq!(half.coverage, 0.5);
        assert_eq!(half.mean_set_size, 1.0);
        assert!(matches!(
            evaluate(&[], 0.5, ScoreKind::Hps, &mut rng),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn experiments_are_reproducible_and_ordered() {
        let exp = small_experiment(Method::ALL.to_vec());
        let seeds = [5, 1, 3];
        let a = run_experiment(&exp, &seeds).unwrap();
        let b = run_experiment(&exp, &seeds).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        for (i, r) in a.iter().enumerate() {
            assert_eq!(r.seed, seeds[i / 5]);
            assert_eq!(r.method, Method::ALL[i % 5]);
            assert!((0.0..=1.0).contains(&r.coverage));
            assert!((0.0..=8.0).contains(&r.mean_set_size));
            assert_eq!(r.delta_corr == 0.0, r.method == Method::NonPrivate);
        }
        // A single method replays identically on its own.
        let alone = run_experiment(&small_experiment(vec![Method::LdpCpS]), &[1]).unwrap();
        assert_eq!(alone[0], a[5 + 3]);
    }

    #[test]
    fn noiseless_methods_agree() {
        let exp = Experiment {
            epsilon: 50.0,
            ..small_experiment(vec![Method::NonPrivate, Method::LdpCpL, Method::LdpCpS])
        };
        let exp = Experiment {
            config: SyntheticConfig {
                n_calib: 20_000,
                n_test: 10_000,
                ..exp.config.clone()
            },
            ..exp
        };
        for seed in 0..3 {
            let rows = run_experiment(&exp, &[seed]).unwrap();
            // The label search stops inside a delta_L / 2 band of about 0.005
            // and the score search inside delta_S / 2 of about 0.025.
            assert!((rows[0].coverage - rows[1].coverage).abs() < 0.01);
            assert!((rows[0].coverage - rows[2].coverage).abs() < 0.03);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("ldp-cp-l*".parse::<Method>().unwrap(), Method::LdpCpLStar);
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn tradeoff_examples() {
        let ns = [10_000, 30_000, 100_000, 300_000, 1_000_000];
        let rows = tradeoff_table(&ns, &[8, 1000], &[2.0, 4.0], 0.1, 14, false).unwrap();
        assert_eq!(rows.len(), 20);
        for k in [8, 1000] {
            for eps in [2.0, 4.0] {
                let line: Vec<_> = rows.iter().filter(|r| r.k == k && r.epsilon == eps).collect();
                for w in line.windows(2) {
                    assert!(w[1].delta_l < w[0].delta_l);
                    assert!(w[1].delta_s < w[0].delta_s);
                }
                assert!(line.iter().all(|r| r.eps_eff == eps));
            }
        }
        for r in rows.iter().filter(|r| r.k == 1000 && r.epsilon == 4.0) {
            assert!(r.delta_s < r.delta_l);
        }
        let cell = tradeoff_table(&[10_000], &[8], &[4.0], 0.1, 14, true).unwrap()[0];
        assert_abs_diff_eq!(cell.delta_l, 0.0176, epsilon = 5e-5);
        assert_abs_diff_eq!(cell.delta_s, 0.0651, epsilon = 5e-5);
        assert_abs_diff_eq!(cell.eps_eff, 0.04, epsilon = 1e-15);
        assert!(cell.delta_l < cell.delta_s);
        assert!(tradeoff_table(&[10], &[8], &[], 0.1, 14, false).is_err());
        assert!(tradeoff_table(&[10], &[8], &[1.0], 0.1, 14, false).is_err());
    }
}
