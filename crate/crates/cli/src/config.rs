//! Flag parsing and the optional TOML config file. Flags win over file
//! values, which win over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ldpcp::mechanisms::rounds_for_tau;
use ldpcp::simulate::{Method, SyntheticConfig, DEFAULT_CONCENTRATION};
use ldpcp::ScoreKind;
use serde::Deserialize;

pub const CONFIG_ENV: &str = "LDPCP_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "ldpcp", version, about = "Locally private conformal prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Calibrate from k-RR perturbed labels.
    CalibrateL,
    /// Calibrate from one randomized threshold answer per user.
    CalibrateS,
    /// Non-private split conformal baseline.
    Cp,
    /// Monte Carlo coverage experiment over seeds, written as CSV.
    Simulate,
    /// Correction terms over an n x k x epsilon grid, written as CSV.
    Tradeoff,
}

#[derive(Debug, Default, clap::Args)]
pub struct Opts {
    /// TOML file with defaults for any of these options.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Local privacy budget per user [default: 4].
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Miscoverage level [default: 0.1].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Failure probability of the finite-sample bounds [default: 0.1].
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Bisection resolution [default: 2^-14].
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Bisection rounds of the score pipeline [default: 14].
    #[arg(long, global = true, value_name = "T")]
    pub rounds: Option<usize>,
    /// hps, aps or raps; simulate accepts a comma list [default: aps].
    #[arg(long, global = true, value_delimiter = ',')]
    pub score: Option<Vec<ScoreKind>>,
    /// Synthetic classes [default: 8].
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Synthetic calibration records [default: 20000].
    #[arg(long, global = true)]
    pub n_calib: Option<usize>,
    /// Synthetic test records [default: 20000].
    #[arg(long, global = true)]
    pub n_test: Option<usize>,
    /// Dirichlet concentration on the true class of the synthetic classifier [default: 2.8].
    #[arg(long, global = true)]
    pub concentration: Option<f64>,
    /// Single seed [default: 0].
    #[arg(long, global = true, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// A count `N` (seeds 0..N) or an explicit comma list.
    #[arg(long, global = true)]
    pub seeds: Option<String>,
    /// Dataset CSV used instead of synthetic data.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Report epsilon_eff = epsilon / sqrt(n) in the tradeoff grid.
    #[arg(long, global = true)]
    pub shuffle: bool,
    /// One line per bisection round on stderr.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Treat saturation (q = 1) as an error.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Bisect down to tau instead of stopping inside the band.
    #[arg(long, global = true)]
    pub exhaustive: bool,
    /// Aim at 1 - alpha + delta in calibrate-l / calibrate-s.
    #[arg(long, global = true)]
    pub star: bool,
    /// Comma list for simulate [default: all five].
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Tradeoff user counts [default: 1000,10000,100000,1000000].
    #[arg(long, global = true, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Tradeoff class counts [default: 8,100,1000].
    #[arg(long, global = true, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Tradeoff budgets [default: --epsilon].
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    epsilon: Option<f64>,
    alpha: Option<f64>,
    delta: Option<f64>,
    tau: Option<f64>,
    rounds: Option<usize>,
    score: Option<Vec<String>>,
    k: Option<usize>,
    n_calib: Option<usize>,
    n_test: Option<usize>,
    concentration: Option<f64>,
    seed: Option<u64>,
    seeds: Option<SeedSpec>,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    shuffle: Option<bool>,
    trace: Option<bool>,
    strict: Option<bool>,
    exhaustive: Option<bool>,
    star: Option<bool>,
    methods: Option<Vec<String>>,
    n_grid: Option<Vec<usize>>,
    k_grid: Option<Vec<usize>>,
    eps_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub epsilon: f64,
    pub alpha: f64,
    pub delta: f64,
    pub tau: f64,
    pub rounds: usize,
    pub kinds: Vec<ScoreKind>,
    pub synthetic: SyntheticConfig,
    pub seeds: Vec<u64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub shuffle: bool,
    pub trace: bool,
    pub strict: bool,
    pub exhaustive: bool,
    pub star: bool,
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn kind(&self) -> Result<ScoreKind> {
        match self.kinds.as_slice() {
            [kind] => Ok(*kind),
            _ => bail!("this subcommand takes exactly one --score"),
        }
    }
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if spec.contains(',') {
        spec.split(',')
            .map(|s| s.trim().parse().with_context(|| format!("bad seed {s:?}")))
            .collect()
    } else {
        let n: u64 = spec.parse().with_context(|| format!("bad seed count {spec:?}"))?;
        Ok((0..n).collect())
    }
}

fn parse_all<T: std::str::FromStr>(items: Vec<String>, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    items
        .iter()
        .map(|s| s.parse::<T>().map_err(|e| anyhow::anyhow!("{what} {s:?}: {e}")))
        .collect()
}

pub fn resolve(opts: Opts) -> Result<RunConfig> {
    let file = match &opts.config {
        Some(path) => read_file(path)?,
        None => FileConfig::default(),
    };

    let synthetic_given = opts.k.is_some()
        || opts.n_calib.is_some()
        || opts.n_test.is_some()
        || opts.concentration.is_some()
        || file.k.is_some()
        || file.n_calib.is_some()
        || file.n_test.is_some()
        || file.concentration.is_some();
    let input = opts.input.or(file.input);
    if input.is_some() && synthetic_given {
        bail!("--input cannot be combined with synthetic data options (k, n-calib, n-test, concentration)");
    }

    let tau_given = opts.tau.or(file.tau);
    let rounds_given = opts.rounds.or(file.rounds);
    let (tau, rounds) = match (tau_given, rounds_given) {
        (Some(tau), Some(rounds)) => (tau, rounds),
        (Some(tau), None) => (tau, rounds_for_tau(tau)?),
        (None, Some(rounds)) => (0.5f64.powi(rounds.min(1074) as i32), rounds),
        (None, None) => (2f64.powi(-14), 14),
    };

    let kinds = match (opts.score, file.score) {
        (Some(k), _) => k,
        (None, Some(k)) => parse_all(k, "score")?,
        (None, None) => vec![ScoreKind::Aps],
    };
    let methods = match (opts.methods, file.methods) {
        (Some(m), _) => m,
        (None, Some(m)) => parse_all(m, "method")?,
        (None, None) => Method::ALL.to_vec(),
    };
    let seeds = match (opts.seed, opts.seeds, file.seed, file.seeds) {
        (Some(s), ..) => vec![s],
        (None, Some(spec), ..) => parse_seeds(&spec)?,
        (None, None, Some(s), _) => vec![s],
        (None, None, None, Some(SeedSpec::Count(n))) => (0..n).collect(),
        (None, None, None, Some(SeedSpec::List(l))) => l,
        (None, None, None, None) => vec![0],
    };
    if seeds.is_empty() {
        bail!("need at least one seed");
    }

    let defaults = SyntheticConfig::default();
    let epsilon = opts.epsilon.or(file.epsilon).unwrap_or(4.0);
    Ok(RunConfig {
        epsilon,
        alpha: opts.alpha.or(file.alpha).unwrap_or(0.1),
        delta: opts.delta.or(file.delta).unwrap_or(0.1),
        tau,
        rounds,
        kinds,
        synthetic: SyntheticConfig {
            k: opts.k.or(file.k).unwrap_or(defaults.k),
            n_calib: opts.n_calib.or(file.n_calib).unwrap_or(defaults.n_calib),
            n_test: opts.n_test.or(file.n_test).unwrap_or(defaults.n_test),
            concentration: opts
                .concentration
                .or(file.concentration)
                .unwrap_or(DEFAULT_CONCENTRATION),
            prior: defaults.prior,
        },
        seeds,
        input,
        output: opts.output.or(file.output),
        shuffle: opts.shuffle || file.shuffle.unwrap_or(false),
        trace: opts.trace || file.trace.unwrap_or(false),
        strict: opts.strict || file.strict.unwrap_or(false),
        exhaustive: opts.exhaustive || file.exhaustive.unwrap_or(false),
        star: opts.star || file.star.unwrap_or(false),
        methods,
        n_grid: opts
            .n_grid
            .or(file.n_grid)
            .unwrap_or_else(|| vec![1_000, 10_000, 100_000, 1_000_000]),
        k_grid: opts.k_grid.or(file.k_grid).unwrap_or_else(|| vec![8, 100, 1000]),
        eps_grid: opts.eps_grid.or(file.eps_grid).unwrap_or_else(|| vec![epsilon]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ldpcp").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epsilon = 2.0\nalpha = 0.05\nseeds = 3\nscore = [\"hps\"]\n").unwrap();
        let cli = parse(&["cp", "--config", path.to_str().unwrap(), "--epsilon", "1"]);
        let cfg = resolve(cli.opts).unwrap();
        assert_eq!(cfg.epsilon, 1.0);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.kinds, vec![ScoreKind::Hps]);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "epsilom = 2.0\n").unwrap();
        let cli = parse(&["cp", "--config", path.to_str().unwrap()]);
        assert!(resolve(cli.opts).is_err());
    }

    #[test]
    fn seeds_and_rounds() {
        assert_eq!(parse_seeds("4").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("7, 9,11").unwrap(), vec![7, 9, 11]);
        assert!(parse_seeds("x").is_err());

        let cfg = resolve(parse(&["simulate", "--rounds", "10"]).opts).unwrap();
        assert_eq!(cfg.tau, 2f64.powi(-10));
        let cfg = resolve(parse(&["simulate"]).opts).unwrap();
        assert_eq!((cfg.tau, cfg.rounds), (2f64.powi(-14), 14));
    }

    #[test]
    fn input_excludes_synthetic_options() {
        let cli = parse(&["cp", "--input", "x.csv", "--k", "5"]);
        assert!(resolve(cli.opts).is_err());
    }
}
