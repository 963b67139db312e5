//! Locally differentially private conformal prediction.
//!
//! Two calibration pipelines are provided on top of standard split conformal
//! prediction for classifiers:
//!
//! * [`calib_label`]: users perturb their labels with k-ary randomized
//!   response and the aggregator inverts the known noise channel while
//!   bisecting for the threshold.
//! * [`calib_score`]: users score locally and answer one threshold query each
//!   through binary randomized response; the aggregator bisects on the
//!   debiased answers.
//!
//! [`mechanisms`] holds the randomizers and the finite-sample correction
//! terms, and [`simulate`] the synthetic Monte Carlo harness used to check
//! the coverage guarantees empirically.

pub mod calib_label;
pub mod calib_score;
pub mod conformal;
pub mod dataset;
mod error;
pub mod mechanisms;
mod search;
pub mod simulate;

pub use calib_label::{calibrate_l, perturb_labels, LabelCalibration, NoisyCalibrationSet};
pub use calib_score::{calibrate_s, plan_cohorts, ScoreCalibration, UserCohortPlan};
pub use conformal::{
    non_private_cp, prediction_set, CpQuantile, LabeledExample, PredictionSet, ProbVector,
    ScoreKind,
};
pub use error::{Error, Result};
pub use mechanisms::{NoiseChannel, PrivacyParams};
pub use search::{Branch, CalibrationResult, RoundTrace, Target};
