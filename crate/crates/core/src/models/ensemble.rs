//! Ensembles of cluster-wise linear SVMs with inverse-distance voting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, Method};
use crate::clustering::{cbp_knn_clusters, cluster_from_pairs, lloyd_kmeans, magkmeans, merge_similar, Cluster};
use crate::error::{PofError, Result};
use crate::gabriel::{gabriel_edited_set, GabrielEditedSet};
use crate::linalg::{dist2, mean_point};
use crate::problems::Label;
use crate::sampling::TrainingSet;
use crate::svm::{train_linear_svm, train_penalized_svm, LinearModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEntry {
    pub centroid: Vec<f64>,
    pub model: LinearModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub method: Method,
    pub hyperparams: Hyperparams,
    pub entries: Vec<EnsembleEntry>,
    #[serde(rename = "M")]
    pub m: usize,
    /// Training-set members behind each entry.
    #[serde(skip)]
    pub members: Vec<Vec<usize>>,
}

impl Ensemble {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(PofError::InconsistentData("ensemble has no entries".into()));
        }
        if self.m == 0 || self.m > self.entries.len() {
            return Err(PofError::InconsistentData(format!(
                "M = {} outside 1..={}",
                self.m,
                self.entries.len()
            )));
        }
        Ok(())
    }

    /// Same models with `M` clamped to the number of entries.
    pub fn with_m(&self, m: usize) -> Ensemble {
        let mut e = self.clone();
        e.m = m.clamp(1, e.entries.len());
        e.hyperparams.m = e.m;
        e
    }

    /// Inverse-distance weighted vote of the models at the `M` nearest centroids.
    pub fn predict(&self, x: &[f64]) -> Label {
        let mut order: Vec<(f64, usize)> =
            self.entries.iter().enumerate().map(|(i, e)| (dist2(&e.centroid, x), i)).collect();
        let m = self.m.clamp(1, order.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if m < order.len() {
            order.select_nth_unstable_by(m - 1, by_distance);
        }
        order.truncate(m);
        order.sort_by(by_distance);
        let (nearest_d2, nearest) = order[0];
        if nearest_d2.sqrt() < 1e-12 {
            return self.entries[nearest].model.decision(x);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &(d2, i) in &order {
            let w = 1.0 / d2.sqrt();
            num += w * self.entries[i].model.decision(x).sign();
            den += w;
        }
        Label::from_score(num / den)
    }
}

/// Train one SVM per cluster on its members, plain (`kappa = None`) or
/// penalised. Clusters whose SVM fails are dropped with a warning.
pub fn fit_cluster_models(
    ts: &TrainingSet,
    clusters: &[Cluster],
    beta: f64,
    kappa: Option<f64>,
) -> Result<(Vec<EnsembleEntry>, Vec<Vec<usize>>)> {
    let fitted: Vec<Option<(EnsembleEntry, Vec<usize>)>> = clusters
        .par_iter()
        .enumerate()
        .map(|(c, cluster)| {
            let points: Vec<&[f64]> = cluster.members.iter().map(|&i| ts.point(i)).collect();
            let labels: Vec<Label> = cluster.members.iter().map(|&i| ts.label(i)).collect();
            let result = match kappa {
                None => train_linear_svm(&points, &labels, beta),
                Some(kappa) => {
                    let grads: Vec<&[f64]> = cluster.members.iter().map(|&i| ts.samples[i].grad.as_slice()).collect();
                    train_penalized_svm(&points, &labels, &grads, beta, kappa)
                }
            };
            match result {
                Ok(model) => Some((EnsembleEntry { centroid: cluster.centroid.clone(), model }, cluster.members.clone())),
                Err(e) => {
                    log::warn!("cluster {c} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    let (entries, members): (Vec<_>, Vec<_>) = fitted.into_iter().flatten().unzip();
    if entries.is_empty() {
        return Err(PofError::numerical("every cluster model failed to train"));
    }
    Ok((entries, members))
}

fn assemble(method: Method, hp: Hyperparams, entries: Vec<EnsembleEntry>, members: Vec<Vec<usize>>) -> Ensemble {
    let m = hp.m.clamp(1, entries.len());
    if m != hp.m {
        log::debug!("M = {} clamped to {m}", hp.m);
    }
    Ensemble { method, hyperparams: Hyperparams { m, ..hp }, entries, m, members }
}

/// Lloyd k-means over the CBPs; one plain SVM per CBP cluster.
pub fn train_psvmg_with_ges(
    ts: &TrainingSet,
    ges: &GabrielEditedSet,
    k_clusters: usize,
    beta: f64,
    m: usize,
    seed: u64,
) -> Result<Ensemble> {
    if ges.is_empty() {
        return Err(PofError::invalid("empty Gabriel edited set"));
    }
    if k_clusters == 0 {
        return Err(PofError::invalid("k_clusters must be at least 1"));
    }
    let cbps: Vec<&[f64]> = ges.cbps.iter().map(Vec::as_slice).collect();
    let mut distinct = ges.cbps.clone();
    distinct.sort_by(|a, b| a.iter().zip(b).map(|(u, v)| u.total_cmp(v)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    let k = k_clusters.min(distinct.len());
    if k != k_clusters {
        log::debug!("k_clusters = {k_clusters} clamped to {k} distinct CBPs");
    }
    let km = lloyd_kmeans(&cbps, k, seed, 300)?;
    let clusters: Vec<Cluster> = (0..k)
        .filter_map(|c| {
            let ids: Vec<usize> = (0..ges.len()).filter(|&p| km.assignments[p] == c).collect();
            (!ids.is_empty()).then(|| cluster_from_pairs(ges, ids))
        })
        .collect();
    let (entries, members) = fit_cluster_models(ts, &clusters, beta, None)?;
    let hp = Hyperparams { k_clusters: k, beta, m, ..Hyperparams::default() };
    Ok(assemble(Method::Psvmg, hp, entries, members))
}

pub fn train_psvmg(ts: &TrainingSet, k_clusters: usize, beta: f64, m: usize, seed: u64) -> Result<Ensemble> {
    train_psvmg_with_ges(ts, &gabriel_edited_set(ts)?, k_clusters, beta, m, seed)
}

/// CBP-centred K-nearest clusters, similarity merging, one penalised SVM per survivor.
pub fn train_ppsvmg_with_ges(
    ts: &TrainingSet,
    ges: &GabrielEditedSet,
    big_k: usize,
    s: f64,
    beta: f64,
    kappa: f64,
    m: usize,
) -> Result<Ensemble> {
    let clusters = merge_similar(cbp_knn_clusters(ges, big_k)?, s)?;
    debug_assert!(clusters.iter().all(|c| c.has_both_labels(ts)));
    let (entries, members) = fit_cluster_models(ts, &clusters, beta, Some(kappa))?;
    let hp = Hyperparams { big_k: big_k.min(ges.len()), s, beta, kappa, m, ..Hyperparams::default() };
    Ok(assemble(Method::Ppsvmg, hp, entries, members))
}

pub fn train_ppsvmg(ts: &TrainingSet, big_k: usize, s: f64, beta: f64, kappa: f64, m: usize) -> Result<Ensemble> {
    train_ppsvmg_with_ges(ts, &gabriel_edited_set(ts)?, big_k, s, beta, kappa, m)
}

/// MagKmeans over the whole training set; one plain SVM per mixed cluster.
pub fn train_psvm_magkmeans(ts: &TrainingSet, k: usize, gamma: f64, beta: f64, m: usize, seed: u64) -> Result<Ensemble> {
    ts.require_both_labels()?;
    let points = ts.points();
    let mk = magkmeans(&points, &ts.labels(), k, gamma, seed, 100)?;
    let assign = mk.hard_assignments();
    let mut clusters = Vec::new();
    for c in 0..k {
        let members: Vec<usize> = (0..ts.len()).filter(|&i| assign[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let cluster = Cluster {
            centroid: mean_point(members.iter().map(|&i| ts.point(i))),
            members,
            cbps: Vec::new(),
        };
        if cluster.has_both_labels(ts) {
            clusters.push(cluster);
        } else {
            log::warn!("MagKmeans cluster {c} holds a single class; dropped");
        }
    }
    if clusters.is_empty() {
        return Err(PofError::numerical("no MagKmeans cluster contains both classes"));
    }
    let (entries, members) = fit_cluster_models(ts, &clusters, beta, None)?;
    let hp = Hyperparams { k_clusters: k, gamma, beta, m, ..Hyperparams::default() };
    Ok(assemble(Method::PsvmMagkmeans, hp, entries, members))
}
