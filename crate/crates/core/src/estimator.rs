//! Monte Carlo probability-of-failure estimates and repetition statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PofError, Result};
use crate::models::Classifier;
use crate::problems::{BoxDomain, Label, Problem};
use crate::rng::rng_from_seed;
use crate::stats::mean_var;

pub use crate::stats::{variance_test_one_sided, welch_t_test};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PofEstimate {
    /// Fraction of points labelled failure.
    pub value: f64,
    pub n_points: usize,
    /// Model evaluations spent by this estimate.
    pub n_model_evals: usize,
    pub seed: u64,
    pub method: String,
}

fn uniform_points(domain: &BoxDomain, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| domain.sample(&mut rng)).collect()
}

/// `N_F / N` over `n` uniform points classified by the model itself.
pub fn direct_mc_pof(problem: &Problem, n: usize, seed: u64) -> Result<PofEstimate> {
    if n == 0 {
        return Err(PofError::invalid("n must be at least 1"));
    }
    let points = uniform_points(&problem.domain, n, seed);
    let failures = points
        .par_iter()
        .map(|p| problem.classify(p).map(|l| (l == Label::Failure) as usize))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(PofEstimate { value: failures as f64 / n as f64, n_points: n, n_model_evals: n, seed, method: "direct".into() })
}

/// `N_F / N` over `n_pred` uniform points classified by a surrogate; costs no model evaluations.
pub fn surrogate_mc_pof(classifier: &Classifier, domain: &BoxDomain, n_pred: usize, seed: u64) -> Result<PofEstimate> {
    if n_pred == 0 {
        return Err(PofError::invalid("n_pred must be at least 1"));
    }
    let points = uniform_points(domain, n_pred, seed);
    let failures = points.par_iter().filter(|p| classifier.predict(p) == Label::Failure).count();
    Ok(PofEstimate {
        value: failures as f64 / n_pred as f64,
        n_points: n_pred,
        n_model_evals: 0,
        seed,
        method: classifier.method().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionStats {
    /// Estimates kept after optional trimming.
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub trimmed: bool,
}

/// Mean and sample sd, optionally after dropping the single largest and single smallest value.
pub fn repeat_stats(estimates: &[f64], trim: bool) -> Result<RepetitionStats> {
    if estimates.is_empty() {
        return Err(PofError::invalid("no estimates"));
    }
    let mut kept = estimates.to_vec();
    if trim {
        if kept.len() < 5 {
            return Err(PofError::invalid("trimming needs at least 5 estimates"));
        }
        let hi = (0..kept.len()).max_by(|&a, &b| kept[a].total_cmp(&kept[b])).unwrap();
        kept.remove(hi);
        let lo = (0..kept.len()).min_by(|&a, &b| kept[a].total_cmp(&kept[b])).unwrap();
        kept.remove(lo);
    }
    let (mean, var) = mean_var(&kept);
    Ok(RepetitionStats { estimates: kept, mean, sd: var.sqrt(), trimmed: trim })
}

/// Fraction of test points where `predict` agrees with the true label.
pub fn accuracy(predict: impl Fn(&[f64]) -> Label + Sync, points: &[Vec<f64>], truth: &[Label]) -> f64 {
    crate::models::accuracy_on(points, truth, predict)
}
