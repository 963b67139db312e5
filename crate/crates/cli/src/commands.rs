use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{bail, Context, Result};
use ldpcp::dataset::read_dataset_file;
use ldpcp::mechanisms::{delta_s, eps_effective, rounds_for_tau};
use ldpcp::simulate::{
    evaluate, gen_synthetic, run_experiment_rows, substream, summarize, tradeoff_table,
    Evaluation, Experiment, Method, Stream,
};
use ldpcp::{
    calibrate_l, calibrate_s, non_private_cp, perturb_labels, plan_cohorts, CalibrationResult,
    LabelCalibration, LabeledExample, ScoreCalibration, ScoreKind,
};
use serde::Serialize;

use crate::config::{Command, RunConfig};

pub const SIMULATE_COLUMNS: [&str; 10] = [
    "seed",
    "method",
    "score",
    "epsilon",
    "eps_eff",
    "alpha",
    "delta_corr",
    "q_hat",
    "coverage",
    "mean_set_size",
];

pub fn run(command: Command, cfg: &RunConfig) -> Result<()> {
    match command {
        Command::CalibrateL => calibrate_label(cfg),
        Command::CalibrateS => calibrate_score(cfg),
        Command::Cp => conformal(cfg),
        Command::Simulate => simulate(cfg),
        Command::Tradeoff => tradeoff(cfg),
    }
}

fn output(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

struct Data {
    calib: Vec<LabeledExample>,
    test: Option<Vec<LabeledExample>>,
}

fn load(cfg: &RunConfig) -> Result<Data> {
    if let Some(path) = &cfg.input {
        let calib = read_dataset_file(path)?;
        if calib.is_empty() {
            bail!("{} holds no records", path.display());
        }
        return Ok(Data { calib, test: None });
    }
    let (calib, test) = gen_synthetic(&cfg.synthetic, cfg.seed())?;
    if calib.is_empty() {
        bail!("n-calib must be positive");
    }
    Ok(Data {
        calib,
        test: (!test.is_empty()).then_some(test),
    })
}

#[derive(Debug, Serialize)]
struct Report {
    method: Method,
    score: ScoreKind,
    seed: u64,
    n: usize,
    k: usize,
    epsilon: f64,
    eps_eff: f64,
    alpha: f64,
    delta_fail: f64,
    delta: f64,
    target_level: f64,
    q_hat: f64,
    rounds_used: usize,
    saturated: bool,
    in_band: bool,
    achieved_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cohort_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unused_users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_set_size: Option<f64>,
}

impl Report {
    fn new(cfg: &RunConfig, method: Method, kind: ScoreKind, data: &Data, res: &CalibrationResult) -> Result<Self> {
        let n = data.calib.len();
        Ok(Self {
            method,
            score: kind,
            seed: cfg.seed(),
            n,
            k: data.calib[0].k(),
            epsilon: cfg.epsilon,
            eps_eff: eps_effective(cfg.epsilon, n)?,
            alpha: cfg.alpha,
            delta_fail: cfg.delta,
            delta: res.delta_applied,
            target_level: res.target_level,
            q_hat: res.q_hat,
            rounds_used: res.rounds_used,
            saturated: res.saturated,
            in_band: res.in_band,
            achieved_z: (!res.achieved_z.is_nan()).then_some(res.achieved_z),
            cohort_size: None,
            unused_users: None,
            coverage: None,
            mean_set_size: None,
        })
    }

    fn with_evaluation(mut self, eval: Option<Evaluation>) -> Self {
        if let Some(eval) = eval {
            self.coverage = Some(eval.coverage);
            self.mean_set_size = Some(eval.mean_set_size);
        }
        self
    }
}

fn test_evaluation(cfg: &RunConfig, data: &Data, q: f64, kind: ScoreKind, method: Method) -> Result<Option<Evaluation>> {
    data.test
        .as_ref()
        .map(|test| evaluate(test, q, kind, &mut substream(cfg.seed(), Stream::Evaluate(method))))
        .transpose()
        .map_err(Into::into)
}

fn emit_trace(res: &CalibrationResult) {
    let mut err = io::stderr().lock();
    for r in &res.trace {
        let noisy = r.noisy_mean.map_or_else(|| "-".to_string(), |m| m.to_string());
        let _ = writeln!(
            err,
            "round={} midpoint={} cohort={} noisy_mean={} z={} branch={}",
            r.round,
            r.midpoint,
            r.cohort_size,
            noisy,
            r.z,
            r.branch.as_str()
        );
    }
}

fn finish<T: Serialize>(cfg: &RunConfig, report: &T, saturated: bool) -> Result<()> {
    let mut out = output(cfg)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    out.flush()?;
    if saturated && cfg.strict {
        bail!("calibration saturated at q = 1 (the prediction sets are trivial)");
    }
    Ok(())
}

fn calibrate_label(cfg: &RunConfig) -> Result<()> {
    let kind = cfg.kind()?;
    let data = load(cfg)?;
    let method = if cfg.star { Method::LdpCpLStar } else { Method::LdpCpL };
    let k = data.calib[0].k();
    let noisy = perturb_labels(&data.calib, cfg.epsilon, k, &mut substream(cfg.seed(), Stream::LabelNoise))?;
    let settings = LabelCalibration {
        alpha: cfg.alpha,
        delta_fail: cfg.delta,
        tau: cfg.tau,
        kind,
        target: method.target(),
        exhaustive: cfg.exhaustive,
    };
    let res = calibrate_l(&noisy, &settings, &mut substream(cfg.seed(), Stream::Calibrate(method)))?;
    if cfg.trace {
        emit_trace(&res);
    }
    let eval = test_evaluation(cfg, &data, res.q_hat, kind, method)?;
    let report = Report::new(cfg, method, kind, &data, &res)?.with_evaluation(eval);
    finish(cfg, &report, res.saturated)
}

fn calibrate_score(cfg: &RunConfig) -> Result<()> {
    let kind = cfg.kind()?;
    let data = load(cfg)?;
    let method = if cfg.star { Method::LdpCpSStar } else { Method::LdpCpS };
    let n = data.calib.len();
    let plan = plan_cohorts(n, cfg.rounds)?;
    let settings = ScoreCalibration {
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        delta: delta_s(n, cfg.epsilon, cfg.delta, cfg.rounds)?,
        rounds: cfg.rounds,
        kind,
        target: method.target(),
        exhaustive: cfg.exhaustive,
    };
    let res = calibrate_s(&data.calib, &settings, substream(cfg.seed(), Stream::Calibrate(method)))?;
    if cfg.trace {
        emit_trace(&res);
    }
    let eval = test_evaluation(cfg, &data, res.q_hat, kind, method)?;
    let mut report = Report::new(cfg, method, kind, &data, &res)?.with_evaluation(eval);
    report.cohort_size = Some(plan.cohort_size());
    report.unused_users = Some(plan.unassigned().len());
    finish(cfg, &report, res.saturated)
}

#[derive(Debug, Serialize)]
struct CpReport {
    method: Method,
    score: ScoreKind,
    seed: u64,
    n: usize,
    alpha: f64,
    q_hat: f64,
    saturated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_set_size: Option<f64>,
}

fn conformal(cfg: &RunConfig) -> Result<()> {
    let kind = cfg.kind()?;
    let data = load(cfg)?;
    let method = Method::NonPrivate;
    let cp = non_private_cp(&data.calib, cfg.alpha, kind, &mut substream(cfg.seed(), Stream::Calibrate(method)))?;
    let eval = test_evaluation(cfg, &data, cp.q, kind, method)?;
    let report = CpReport {
        method,
        score: kind,
        seed: cfg.seed(),
        n: data.calib.len(),
        alpha: cfg.alpha,
        q_hat: cp.q,
        saturated: cp.saturated,
        coverage: eval.map(|e| e.coverage),
        mean_set_size: eval.map(|e| e.mean_set_size),
    };
    finish(cfg, &report, cp.saturated)
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    if cfg.input.is_some() {
        bail!("simulate draws synthetic data; --input is not supported");
    }
    if rounds_for_tau(cfg.tau)? != cfg.rounds {
        bail!(
            "--rounds {} disagrees with --tau {} (which gives {} rounds)",
            cfg.rounds,
            cfg.tau,
            rounds_for_tau(cfg.tau)?
        );
    }
    let exp = Experiment {
        config: cfg.synthetic.clone(),
        methods: cfg.methods.clone(),
        kinds: cfg.kinds.clone(),
        epsilon: cfg.epsilon,
        alpha: cfg.alpha,
        delta_fail: cfg.delta,
        tau: cfg.tau,
    };
    let rows = run_experiment_rows(&exp, &cfg.seeds)?;
    let failures = rows.iter().filter(|r| r.is_err()).count();

    let mut csv = csv::Writer::from_writer(output(cfg)?);
    let mut header = SIMULATE_COLUMNS.to_vec();
    if failures > 0 {
        header.push("error");
    }
    csv.write_record(&header)?;
    for row in &rows {
        let fields: Vec<String> = match row {
            Ok(r) => {
                let mut f = vec![
                    r.seed.to_string(),
                    r.method.to_string(),
                    r.score.to_string(),
                    r.epsilon.to_string(),
                    r.eps_eff.to_string(),
                    r.alpha.to_string(),
                    r.delta_corr.to_string(),
                    r.q_hat.to_string(),
                    r.coverage.to_string(),
                    r.mean_set_size.to_string(),
                ];
                if failures > 0 {
                    f.push(String::new());
                }
                f
            }
            Err(e) => {
                let mut f = vec![e.seed.to_string(), e.method.to_string(), e.score.to_string()];
                f.extend(std::iter::repeat_n(String::new(), SIMULATE_COLUMNS.len() - 3));
                f.push(e.error.to_string());
                f
            }
        };
        csv.write_record(&fields)?;
    }
    csv.flush()?;

    if failures > 0 {
        bail!("{failures} of {} rows failed", rows.len());
    }
    let records: Vec<_> = rows.into_iter().filter_map(Result::ok).collect();
    let mut err = io::stderr().lock();
    for s in summarize(&records) {
        writeln!(
            err,
            "{:<14} {:<4} coverage {:.4} +- {:.4}  size {:.3}  delta {:.4}  ({} seeds)",
            s.method.as_str(),
            s.score.as_str(),
            s.mean_coverage,
            s.coverage_se(),
            s.mean_set_size,
            s.mean_delta,
            s.seeds
        )?;
    }
    Ok(())
}

fn tradeoff(cfg: &RunConfig) -> Result<()> {
    let rows = tradeoff_table(&cfg.n_grid, &cfg.k_grid, &cfg.eps_grid, cfg.delta, cfg.rounds, cfg.shuffle)?;
    let mut csv = csv::Writer::from_writer(output(cfg)?);
    for row in rows {
        csv.serialize(row)?;
    }
    csv.flush()?;
    Ok(())
}
