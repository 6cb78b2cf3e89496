//! Classifiers built on the GES and cluster-wise linear SVMs, plus the
//! neighbour baselines and cross-validation.

mod cv;
mod ensemble;
mod neighbors;
mod pujol;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, stratified_folds, CvResult, HyperGrid};
pub use ensemble::{
    fit_cluster_models, train_ppsvmg, train_ppsvmg_with_ges, train_psvm_magkmeans, train_psvmg, train_psvmg_with_ges,
    Ensemble, EnsembleEntry,
};
pub use neighbors::{knn_predict, svm_knn_predict, NeighborModel};
pub use pujol::{predict_pujol, train_pujol, train_pujol_with_ges, PujolModel};

use crate::error::{PofError, Result};
use crate::gabriel::{gabriel_edited_set, GabrielEditedSet};
use crate::problems::{Label, Problem};
use crate::sampling::TrainingSet;

/// Classification methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Psvmg,
    Ppsvmg,
    PsvmMagkmeans,
    Pujol,
    SvmKnn,
    Knn,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Psvmg, Method::Ppsvmg, Method::PsvmMagkmeans, Method::Pujol, Method::SvmKnn, Method::Knn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Psvmg => "psvmg",
            Method::Ppsvmg => "ppsvmg",
            Method::PsvmMagkmeans => "psvm-magkmeans",
            Method::Pujol => "pujol",
            Method::SvmKnn => "svm-knn",
            Method::Knn => "knn",
        }
    }

    /// Whether training starts from the Gabriel edited set.
    pub fn uses_ges(self) -> bool {
        matches!(self, Method::Psvmg | Method::Ppsvmg | Method::Pujol)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = PofError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| PofError::Unknown { kind: "method", name: s.to_string() })
    }
}

/// Hyperparameters of every method; each method reads only its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Soft-margin box constraint.
    pub beta: f64,
    /// Gradient penalty weight (PPSVMG).
    pub kappa: f64,
    /// Nearest CBPs per cluster (PPSVMG).
    #[serde(rename = "K")]
    pub big_k: usize,
    /// Similarity merge threshold (PPSVMG).
    pub s: f64,
    /// Centroids consulted at prediction time.
    #[serde(rename = "M")]
    pub m: usize,
    /// Cluster count (PSVMG, PSVM-MagKmeans).
    pub k_clusters: usize,
    /// Ridge parameter (Pujol).
    pub lambda: f64,
    /// Neighbourhood size (KNN, SVM-KNN).
    pub knn_k: usize,
    /// Class-balance weight (MagKmeans).
    pub gamma: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { beta: 1.0, kappa: 1.0, big_k: 5, s: 0.7, m: 3, k_clusters: 8, lambda: 1.0, knn_k: 5, gamma: 0.5 }
    }
}

/// A trained classifier of any method.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Ensemble(Ensemble),
    Pujol(PujolModel),
    Neighbors(NeighborModel),
}

impl Classifier {
    pub fn method(&self) -> Method {
        match self {
            Classifier::Ensemble(e) => e.method,
            Classifier::Pujol(_) => Method::Pujol,
            Classifier::Neighbors(n) => n.method,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            Classifier::Ensemble(e) => e.predict(x),
            Classifier::Pujol(p) => predict_pujol(p, x),
            Classifier::Neighbors(n) => n.predict(x),
        }
    }

    /// Clone with a different prediction-neighbour count; a no-op for non-ensembles.
    pub fn with_m(&self, m: usize) -> Classifier {
        match self {
            Classifier::Ensemble(e) => Classifier::Ensemble(e.with_m(m)),
            other => other.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(match self {
            Classifier::Ensemble(e) => serde_json::to_string_pretty(e)?,
            Classifier::Pujol(p) => serde_json::to_string_pretty(p)?,
            Classifier::Neighbors(n) => serde_json::to_string_pretty(n)?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let method: Method = value
            .get("method")
            .and_then(|m| m.as_str())
            .ok_or_else(|| PofError::InconsistentData("model JSON lacks a `method` field".into()))?
            .parse()?;
        Ok(match method {
            Method::Psvmg | Method::Ppsvmg | Method::PsvmMagkmeans => {
                let e: Ensemble = serde_json::from_value(value)?;
                e.validate()?;
                Classifier::Ensemble(e)
            }
            Method::Pujol => Classifier::Pujol(serde_json::from_value(value)?),
            Method::SvmKnn | Method::Knn => Classifier::Neighbors(serde_json::from_value(value)?),
        })
    }
}

/// Train `method` on `ts`, reusing a precomputed GES when one is supplied.
pub fn train_with_ges(
    method: Method,
    ts: &TrainingSet,
    ges: Option<&GabrielEditedSet>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<Classifier> {
    ts.require_both_labels()?;
    let owned;
    let ges = if method.uses_ges() {
        match ges {
            Some(g) => Some(g),
            None => {
                owned = gabriel_edited_set(ts)?;
                Some(&owned)
            }
        }
    } else {
        None
    };
    Ok(match method {
        Method::Psvmg => Classifier::Ensemble(train_psvmg_with_ges(ts, ges.unwrap(), hp.k_clusters, hp.beta, hp.m, seed)?),
        Method::Ppsvmg => {
            Classifier::Ensemble(train_ppsvmg_with_ges(ts, ges.unwrap(), hp.big_k, hp.s, hp.beta, hp.kappa, hp.m)?)
        }
        Method::PsvmMagkmeans => {
            Classifier::Ensemble(train_psvm_magkmeans(ts, hp.k_clusters, hp.gamma, hp.beta, hp.m, seed)?)
        }
        Method::Pujol => Classifier::Pujol(train_pujol_with_ges(ts, ges.unwrap(), hp.lambda)?),
        Method::SvmKnn => Classifier::Neighbors(NeighborModel::new(Method::SvmKnn, ts, hp.knn_k, hp.beta)?),
        Method::Knn => Classifier::Neighbors(NeighborModel::new(Method::Knn, ts, hp.knn_k, hp.beta)?),
    })
}

pub fn train(method: Method, ts: &TrainingSet, hp: &Hyperparams, seed: u64) -> Result<Classifier> {
    train_with_ges(method, ts, None, hp, seed)
}

/// Fraction of `points` where `predict` matches `truth`.
pub fn accuracy_on(points: &[Vec<f64>], truth: &[Label], predict: impl Fn(&[f64]) -> Label + Sync) -> f64 {
    use rayon::prelude::*;
    if points.is_empty() {
        return 0.0;
    }
    let hits = points.par_iter().zip(truth).filter(|(p, t)| predict(p) == **t).count();
    hits as f64 / points.len() as f64
}

/// Uniform test points with their true labels.
pub fn labelled_test_set(problem: &Problem, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    use rayon::prelude::*;
    let mut rng = crate::rng::rng_from_seed(seed);
    let points: Vec<Vec<f64>> = (0..n).map(|_| problem.domain.sample(&mut rng)).collect();
    let labels = points.par_iter().map(|p| problem.classify(p)).collect::<Result<Vec<_>>>()?;
    Ok((points, labels))
}
