//! Stratified k-fold grid search.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_with_ges, Classifier, Hyperparams, Method};
use crate::error::{PofError, Result};
use crate::gabriel::gabriel_edited_set;
use crate::problems::Label;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::TrainingSet;

/// Candidate values per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub beta: Vec<f64>,
    pub kappa: Vec<f64>,
    #[serde(rename = "K")]
    pub big_k: Vec<usize>,
    pub s: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    pub k_clusters: Vec<usize>,
    pub lambda: Vec<f64>,
    pub knn_k: Vec<usize>,
    pub gamma: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            beta: vec![0.1, 1.0, 10.0],
            kappa: vec![0.0, 1.0, 10.0],
            big_k: vec![3, 5, 7],
            s: vec![0.4, 0.7, 1.0],
            m: vec![1, 3, 5],
            k_clusters: vec![4, 8, 12],
            lambda: vec![0.1, 1.0, 10.0],
            knn_k: vec![3, 5, 9],
            gamma: vec![0.5],
        }
    }
}

impl HyperGrid {
    /// Single-point grid.
    pub fn fixed(hp: &Hyperparams) -> Self {
        Self {
            beta: vec![hp.beta],
            kappa: vec![hp.kappa],
            big_k: vec![hp.big_k],
            s: vec![hp.s],
            m: vec![hp.m],
            k_clusters: vec![hp.k_clusters],
            lambda: vec![hp.lambda],
            knn_k: vec![hp.knn_k],
            gamma: vec![hp.gamma],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            self.beta.is_empty(),
            self.kappa.is_empty(),
            self.big_k.is_empty(),
            self.s.is_empty(),
            self.m.is_empty(),
            self.k_clusters.is_empty(),
            self.lambda.is_empty(),
            self.knn_k.is_empty(),
            self.gamma.is_empty(),
        ];
        if empty.iter().any(|e| *e) {
            return Err(PofError::invalid("every hyperparameter axis needs at least one value"));
        }
        Ok(())
    }

    /// Grid points over the axes `method` uses; other axes take their first value.
    pub fn points(&self, method: Method) -> Vec<Hyperparams> {
        let base = Hyperparams {
            beta: self.beta[0],
            kappa: self.kappa[0],
            big_k: self.big_k[0],
            s: self.s[0],
            m: self.m[0],
            k_clusters: self.k_clusters[0],
            lambda: self.lambda[0],
            knn_k: self.knn_k[0],
            gamma: self.gamma[0],
        };
        let mut out = vec![base];
        let mut expand = |f: &dyn Fn(&mut Hyperparams, usize), n: usize| {
            out = out.iter().flat_map(|hp| (0..n).map(move |i| (hp, i))).map(|(hp, i)| {
                let mut h = *hp;
                f(&mut h, i);
                h
            }).collect();
        };
        match method {
            Method::Psvmg => {
                expand(&|h, i| h.k_clusters = self.k_clusters[i], self.k_clusters.len());
                expand(&|h, i| h.beta = self.beta[i], self.beta.len());
                expand(&|h, i| h.m = self.m[i], self.m.len());
            }
            Method::Ppsvmg => {
                expand(&|h, i| h.big_k = self.big_k[i], self.big_k.len());
                expand(&|h, i| h.kappa = self.kappa[i], self.kappa.len());
                expand(&|h, i| h.s = self.s[i], self.s.len());
                expand(&|h, i| h.beta = self.beta[i], self.beta.len());
                expand(&|h, i| h.m = self.m[i], self.m.len());
            }
            Method::PsvmMagkmeans => {
                expand(&|h, i| h.k_clusters = self.k_clusters[i], self.k_clusters.len());
                expand(&|h, i| h.gamma = self.gamma[i], self.gamma.len());
                expand(&|h, i| h.beta = self.beta[i], self.beta.len());
                expand(&|h, i| h.m = self.m[i], self.m.len());
            }
            Method::Pujol => expand(&|h, i| h.lambda = self.lambda[i], self.lambda.len()),
            Method::SvmKnn => {
                expand(&|h, i| h.knn_k = self.knn_k[i], self.knn_k.len());
                expand(&|h, i| h.beta = self.beta[i], self.beta.len());
            }
            Method::Knn => expand(&|h, i| h.knn_k = self.knn_k[i], self.knn_k.len()),
        }
        out
    }
}

/// Fold id per sample: each class is shuffled and dealt round-robin, so every
/// fold receives the same label ratio up to one sample.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0usize;
    for class in [Label::Failure, Label::Success] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best: Hyperparams,
    pub best_index: usize,
    pub grid: Vec<Hyperparams>,
    /// Mean validation accuracy per grid point.
    pub scores: Vec<f64>,
    /// Mean ensemble size per grid point (0 for non-ensembles).
    pub complexity: Vec<f64>,
    pub folds_used: usize,
}

/// Key identifying a trained model: every hyperparameter except `M`, which
/// only affects prediction.
fn train_key(hp: &Hyperparams) -> [u64; 8] {
    [
        hp.beta.to_bits(),
        hp.kappa.to_bits(),
        hp.big_k as u64,
        hp.s.to_bits(),
        hp.k_clusters as u64,
        hp.lambda.to_bits(),
        hp.knn_k as u64,
        hp.gamma.to_bits(),
    ]
}

/// Grid search by stratified `folds`-fold cross-validation. Folds whose
/// training part lacks a class (or yields no GES) are skipped; any other
/// training failure scores zero accuracy. Ties go to fewer clusters, then
/// smaller κ, then smaller β, then the earlier grid point.
pub fn cross_validate(ts: &TrainingSet, method: Method, grid: &HyperGrid, folds: usize, seed: u64) -> Result<CvResult> {
    grid.validate()?;
    if folds < 2 {
        return Err(PofError::invalid("cross-validation needs at least 2 folds"));
    }
    if ts.len() < folds {
        return Err(PofError::invalid(format!("{} samples cannot fill {folds} folds", ts.len())));
    }
    let points = grid.points(method);
    let assignment = stratified_folds(&ts.labels(), folds, derive_seed(seed, &[u64::MAX]));

    struct Fold {
        train: TrainingSet,
        ges: Option<crate::gabriel::GabrielEditedSet>,
        val: Vec<usize>,
    }
    let fold_data: Vec<Option<Fold>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..ts.len()).filter(|&i| assignment[i] != f).collect();
            let val: Vec<usize> = (0..ts.len()).filter(|&i| assignment[i] == f).collect();
            let train = ts.subset(&train_idx);
            if !train.has_both_labels() || val.is_empty() {
                return None;
            }
            let ges = if method.uses_ges() {
                match gabriel_edited_set(&train) {
                    Ok(g) if !g.is_empty() => Some(g),
                    _ => return None,
                }
            } else {
                None
            };
            Some(Fold { train, ges, val })
        })
        .collect();
    let used: Vec<usize> = (0..folds).filter(|&f| fold_data[f].is_some()).collect();
    if used.is_empty() {
        return Err(PofError::DegenerateLabels);
    }

    // one training per (model key, fold); M varies only at prediction
    let mut keys: BTreeMap<[u64; 8], usize> = BTreeMap::new();
    for (g, hp) in points.iter().enumerate() {
        keys.entry(train_key(hp)).or_insert(g);
    }
    let jobs: Vec<(usize, usize)> = keys.values().flat_map(|&g| used.iter().map(move |&f| (g, f))).collect();
    let trained: Vec<Option<Classifier>> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let fold = fold_data[f].as_ref().expect("used fold");
            let s = derive_seed(seed, &[g as u64, f as u64]);
            train_with_ges(method, &fold.train, fold.ges.as_ref(), &points[g], s).ok()
        })
        .collect();
    let lookup: BTreeMap<(usize, usize), &Option<Classifier>> = jobs.iter().copied().zip(&trained).collect();

    let evaluated: Vec<(f64, f64)> = points
        .par_iter()
        .map(|hp| {
            let g = keys[&train_key(hp)];
            let mut acc = 0.0;
            let mut size = 0.0;
            for &f in &used {
                let fold = fold_data[f].as_ref().expect("used fold");
                if let Some(model) = lookup[&(g, f)] {
                    let model = model.with_m(hp.m);
                    let hits = fold.val.iter().filter(|&&i| model.predict(ts.point(i)) == ts.label(i)).count();
                    acc += hits as f64 / fold.val.len() as f64;
                    if let Classifier::Ensemble(e) = &model {
                        size += e.entries.len() as f64;
                    }
                }
            }
            (acc / used.len() as f64, size / used.len() as f64)
        })
        .collect();
    let scores: Vec<f64> = evaluated.iter().map(|e| e.0).collect();
    let complexity: Vec<f64> = evaluated.iter().map(|e| e.1).collect();

    let best_index = (0..points.len())
        .min_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(complexity[a].total_cmp(&complexity[b]))
                .then(points[a].kappa.total_cmp(&points[b].kappa))
                .then(points[a].beta.total_cmp(&points[b].beta))
                .then(a.cmp(&b))
        })
        .expect("nonempty grid");
    Ok(CvResult { best: points[best_index], best_index, grid: points, scores, complexity, folds_used: used.len() })
}
