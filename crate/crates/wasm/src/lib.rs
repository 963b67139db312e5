//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a flat `Float64Array`; the layouts are documented on
//! the native functions, which are what the tests exercise.

use ldpcp::mechanisms::{delta_l, delta_s, krr};
use ldpcp::simulate::{run_experiment, Experiment, Method, SyntheticConfig};
use ldpcp::{NoiseChannel, Result, ScoreKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Values per method in [`compare_methods`].
pub const COMPARE_STRIDE: usize = 4;

/// `points` log-spaced user counts from `n_min` to `n_max`, as
/// `[n, delta_l, delta_s]` triples.
pub fn tradeoff_curve(
    k: usize,
    epsilon: f64,
    delta_fail: f64,
    rounds: usize,
    n_min: usize,
    n_max: usize,
    points: usize,
) -> Result<Vec<f64>> {
    let (lo, hi) = ((n_min.max(1) as f64).ln(), (n_max.max(n_min).max(1) as f64).ln());
    let points = points.max(2);
    let mut out = Vec::with_capacity(3 * points);
    let mut last = 0;
    for i in 0..points {
        let n = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp().round() as usize;
        if n == last {
            continue;
        }
        last = n;
        out.extend([
            n as f64,
            delta_l(n, epsilon, k, delta_fail)?,
            delta_s(n, epsilon, delta_fail, rounds)?,
        ]);
    }
    Ok(out)
}

/// One synthetic seed through every method, as
/// `[q_hat, coverage, mean_set_size, delta]` per method in `Method::ALL` order.
#[allow(clippy::too_many_arguments)]
pub fn compare_methods(
    k: usize,
    n_calib: usize,
    n_test: usize,
    epsilon: f64,
    alpha: f64,
    delta_fail: f64,
    score: &str,
    seed: u64,
) -> Result<Vec<f64>> {
    let exp = Experiment {
        config: SyntheticConfig {
            k,
            n_calib,
            n_test,
            ..SyntheticConfig::default()
        },
        methods: Method::ALL.to_vec(),
        kinds: vec![score.parse::<ScoreKind>()?],
        epsilon,
        alpha,
        delta_fail,
        tau: 2f64.powi(-14),
    };
    Ok(run_experiment(&exp, &[seed])?
        .iter()
        .flat_map(|r| [r.q_hat, r.coverage, r.mean_set_size, r.delta_corr])
        .collect())
}

/// k-RR output distribution for input `label`: `k` analytic probabilities
/// followed by `k` empirical frequencies over `draws` reports.
pub fn krr_histogram(k: usize, epsilon: f64, label: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let channel = NoiseChannel::from_epsilon(epsilon, k)?;
    let mut out: Vec<f64> = (0..k).map(|j| channel.transition(label, j)).collect();
    let mut counts = vec![0usize; k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        counts[krr(label, epsilon, k, &mut rng)?] += 1;
    }
    out.extend(counts.iter().map(|&c| c as f64 / draws.max(1) as f64));
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = methodNames)]
pub fn method_names() -> Vec<String> {
    Method::ALL.iter().map(|m| m.as_str().to_string()).collect()
}

#[wasm_bindgen(js_name = tradeoffCurve)]
pub fn tradeoff_curve_js(
    k: usize,
    epsilon: f64,
    delta_fail: f64,
    rounds: usize,
    n_min: usize,
    n_max: usize,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(tradeoff_curve(k, epsilon, delta_fail, rounds, n_min, n_max, points))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = compareMethods)]
pub fn compare_methods_js(
    k: usize,
    n_calib: usize,
    n_test: usize,
    epsilon: f64,
    alpha: f64,
    delta_fail: f64,
    score: &str,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(compare_methods(k, n_calib, n_test, epsilon, alpha, delta_fail, score, seed))
}

#[wasm_bindgen(js_name = krrHistogram)]
pub fn krr_histogram_js(
    k: usize,
    epsilon: f64,
    label: usize,
    draws: usize,
    seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    js(krr_histogram(k, epsilon, label, draws, seed))
}
