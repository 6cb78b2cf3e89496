//! Nearest-neighbour baselines: majority vote and local linear SVMs.

use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{PofError, Result};
use crate::linalg::dist2;
use crate::problems::Label;
use crate::sampling::TrainingSet;
use crate::svm::train_linear_svm;

/// Indices of the `k` nearest points, ties to the lower index.
fn nearest_k(points: &[Vec<f64>], x: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (dist2(p, x), i)).collect();
    let k = k.clamp(1, order.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
    }
    order.truncate(k);
    order.sort_by(cmp);
    order.into_iter().map(|(_, i)| i).collect()
}

fn majority(labels: impl Iterator<Item = Label>) -> Label {
    Label::from_score(labels.map(Label::sign).sum())
}

/// Stored training data for the lazy neighbour methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborModel {
    pub method: Method,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub k: usize,
    pub beta: f64,
}

impl NeighborModel {
    pub fn new(method: Method, ts: &TrainingSet, k: usize, beta: f64) -> Result<Self> {
        if !matches!(method, Method::Knn | Method::SvmKnn) {
            return Err(PofError::invalid(format!("{method} is not a neighbour method")));
        }
        if ts.is_empty() || k == 0 {
            return Err(PofError::invalid("neighbour models need data and k >= 1"));
        }
        Ok(Self {
            method,
            points: ts.samples.iter().map(|s| s.x.clone()).collect(),
            labels: ts.labels(),
            k: k.min(ts.len()),
            beta,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let idx = nearest_k(&self.points, x, self.k);
        let vote = majority(idx.iter().map(|&i| self.labels[i]));
        if self.method == Method::Knn {
            return vote;
        }
        let labels: Vec<Label> = idx.iter().map(|&i| self.labels[i]).collect();
        if labels.iter().all(|l| *l == labels[0]) {
            return labels[0];
        }
        let points: Vec<&[f64]> = idx.iter().map(|&i| self.points[i].as_slice()).collect();
        match train_linear_svm(&points, &labels, self.beta) {
            Ok(model) => model.decision(x),
            Err(_) => vote,
        }
    }
}

/// Majority label of the `k` nearest training points; ties go to failure.
pub fn knn_predict(ts: &TrainingSet, x: &[f64], k: usize) -> Label {
    let pts: Vec<Vec<f64>> = ts.samples.iter().map(|s| s.x.clone()).collect();
    majority(nearest_k(&pts, x, k).into_iter().map(|i| ts.label(i)))
}

/// Linear SVM on the `k` nearest training points, evaluated at `x`; a pure
/// neighbourhood returns its label without training.
pub fn svm_knn_predict(ts: &TrainingSet, x: &[f64], k: usize, beta: f64) -> Result<Label> {
    Ok(NeighborModel::new(Method::SvmKnn, ts, k, beta)?.predict(x))
}
