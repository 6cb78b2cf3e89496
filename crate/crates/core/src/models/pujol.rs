//! Pujol's method: each GES pair casts a signed vote from the side of its
//! perpendicular bisector, weighted by ridge-fitted coefficients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{PofError, Result};
use crate::gabriel::{gabriel_edited_set, GabrielEditedSet};
use crate::linalg::{dot, sub};
use crate::problems::Label;
use crate::sampling::TrainingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PujolModel {
    pub method: Method,
    /// GES pairs as `(failure endpoint, success endpoint)`.
    pub pairs: Vec<(usize, usize)>,
    pub cbps: Vec<Vec<f64>>,
    /// `x_+ − x_−` for each pair.
    pub directions: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub lambda: f64,
}

impl PujolModel {
    /// `σ_ij(x)`: +1 on the failure side of the pair's bisector, ties included.
    pub fn sigma(&self, p: usize, x: &[f64]) -> f64 {
        Label::from_score(dot(&sub(x, &self.cbps[p]), &self.directions[p])).sign()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        (0..self.omega.len()).map(|p| self.sigma(p, x) * self.omega[p]).sum()
    }
}

/// Ridge fit `(ΣᵀΣ + λ²I) ω = Σᵀy + λ² ω*` with `ω* = 1/P`.
pub fn train_pujol_with_ges(ts: &TrainingSet, ges: &GabrielEditedSet, lambda: f64) -> Result<PujolModel> {
    if ges.is_empty() {
        return Err(PofError::invalid("empty Gabriel edited set"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PofError::invalid("lambda must be nonnegative"));
    }
    let pairs = ges.oriented(ts);
    let directions: Vec<Vec<f64>> = pairs.iter().map(|&(a, b)| sub(ts.point(a), ts.point(b))).collect();
    let mut model = PujolModel {
        method: Method::Pujol,
        pairs,
        cbps: ges.cbps.clone(),
        directions,
        omega: Vec::new(),
        lambda,
    };
    let (n, p) = (ts.len(), ges.len());
    let sigma = DMatrix::from_fn(n, p, |l, q| model.sigma(q, ts.point(l)));
    let y = DVector::from_iterator(n, ts.samples.iter().map(|s| s.label.sign()));
    let prior = 1.0 / p as f64;
    let l2 = lambda * lambda;
    let mut normal = sigma.transpose() * &sigma;
    for d in 0..p {
        normal[(d, d)] += l2;
    }
    let rhs = sigma.transpose() * y + DVector::from_element(p, l2 * prior);
    let chol = normal.cholesky().ok_or_else(|| {
        PofError::numerical("Pujol normal equations are singular; use lambda > 0")
    })?;
    let omega = chol.solve(&rhs);
    if !omega.iter().all(|v| v.is_finite()) {
        return Err(PofError::numerical("Pujol weights are not finite; use lambda > 0"));
    }
    model.omega = omega.iter().copied().collect();
    Ok(model)
}

pub fn train_pujol(ts: &TrainingSet, lambda: f64) -> Result<PujolModel> {
    train_pujol_with_ges(ts, &gabriel_edited_set(ts)?, lambda)
}

/// Sign of `Σ σ_ij(x) ω_ij`, zero counted as failure.
pub fn predict_pujol(model: &PujolModel, x: &[f64]) -> Label {
    Label::from_score(model.score(x))
}
