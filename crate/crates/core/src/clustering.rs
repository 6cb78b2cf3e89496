//! Cluster decompositions: Lloyd k-means, CBP-centred nearest-neighbour
//! clusters with similarity merging, and the class-balanced MagKmeans.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use minilp::{ComparisonOp, OptimizationDirection};
use rand::seq::index;

use crate::error::{PofError, Result};
use crate::gabriel::GabrielEditedSet;
use crate::linalg::{dist2, mean_point};
use crate::problems::Label;
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::TrainingSet;

/// A set of training points with a representative centre.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Sorted, distinct indices into the training set.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
    /// Indices into the GES pairs that defined the cluster (empty for point clusters).
    pub cbps: Vec<usize>,
}

impl Cluster {
    pub fn has_both_labels(&self, ts: &TrainingSet) -> bool {
        let first = ts.label(self.members[0]);
        self.members.iter().any(|&i| ts.label(i) != first)
    }
}

/// Nearest centre, ties to the lowest index.
pub fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centre) in centroids.iter().enumerate() {
        let d = dist2(centre, x);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Representatives of the distinct points (first occurrence).
fn distinct(points: &[&[f64]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(points[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut reps: Vec<usize> = order
        .iter()
        .enumerate()
        .filter(|&(pos, &i)| pos == 0 || points[order[pos - 1]] != points[i])
        .map(|(_, &i)| i)
        .collect();
    reps.sort_unstable();
    reps
}

/// `k` distinct data points chosen without replacement.
fn seed_centroids(points: &[&[f64]], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let reps = distinct(points);
    if k == 0 || k > reps.len() {
        return Err(PofError::invalid(format!("k = {k} but only {} distinct points", reps.len())));
    }
    let mut rng = rng_from_seed(seed);
    Ok(index::sample(&mut rng, reps.len(), k).into_iter().map(|i| points[reps[i]].to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after every assignment step.
    pub inertia: Vec<f64>,
}

/// Lloyd iteration from `k` distinct random data points until assignments stabilise.
pub fn lloyd_kmeans(points: &[&[f64]], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    if max_iter == 0 {
        return Err(PofError::invalid("max_iter must be at least 1"));
    }
    let mut centroids = seed_centroids(points, k, seed)?;
    let mut assignments: Vec<usize> = Vec::new();
    let mut inertia = Vec::new();
    for _ in 0..max_iter {
        let next: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
        inertia.push(points.iter().zip(&next).map(|(p, &c)| dist2(p, &centroids[c])).sum());
        if next == assignments {
            break;
        }
        assignments = next;
        for (c, centre) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = points.iter().zip(&assignments).filter(|(_, &a)| a == c).map(|(p, _)| *p).collect();
            if !members.is_empty() {
                *centre = mean_point(members);
            }
        }
    }
    Ok(KMeans { assignments, centroids, inertia })
}

/// Union of pair endpoints, sorted and deduplicated.
fn endpoints(ges: &GabrielEditedSet, pair_ids: &[usize]) -> Vec<usize> {
    let mut m: Vec<usize> = pair_ids.iter().flat_map(|&p| [ges.pairs[p].0, ges.pairs[p].1]).collect();
    m.sort_unstable();
    m.dedup();
    m
}

/// Cluster built from a set of GES pairs, centred at the mean of their CBPs.
pub fn cluster_from_pairs(ges: &GabrielEditedSet, mut pair_ids: Vec<usize>) -> Cluster {
    pair_ids.sort_unstable();
    let centroid = mean_point(pair_ids.iter().map(|&p| ges.cbps[p].as_slice()));
    Cluster { members: endpoints(ges, &pair_ids), centroid, cbps: pair_ids }
}

/// One cluster per CBP: its `k` nearest CBPs (itself included, ties to the
/// lower index) and the endpoints of their pairs.
pub fn cbp_knn_clusters(ges: &GabrielEditedSet, k: usize) -> Result<Vec<Cluster>> {
    if ges.is_empty() {
        return Err(PofError::invalid("empty Gabriel edited set"));
    }
    if k == 0 {
        return Err(PofError::invalid("K must be at least 1"));
    }
    let m = ges.len();
    let k = if k > m {
        log::warn!("K = {k} exceeds the {m} CBPs; truncated");
        m
    } else {
        k
    };
    Ok((0..m)
        .map(|c| {
            let mut order: Vec<(f64, usize)> = (0..m).map(|o| (dist2(&ges.cbps[c], &ges.cbps[o]), o)).collect();
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cluster_from_pairs(ges, order[..k].iter().map(|&(_, o)| o).collect())
        })
        .collect())
}

/// `|C_i ∩ C_j| / min(|C_i|, |C_j|)` over sorted member lists.
pub fn similarity(a: &Cluster, b: &Cluster) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.members.len() && j < b.members.len() {
        match a.members[i].cmp(&b.members[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / a.members.len().min(b.members.len()) as f64
}

/// Walk clusters in order; each survivor deletes every later cluster with
/// similarity at least `s`. Similarities always refer to the input clusters.
pub fn merge_similar(clusters: Vec<Cluster>, s: f64) -> Result<Vec<Cluster>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(PofError::invalid("similarity threshold must lie in (0, 1]"));
    }
    let n = clusters.len();
    // only clusters sharing a member can reach a positive similarity
    let mut by_member: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, cluster) in clusters.iter().enumerate() {
        for &m in &cluster.members {
            by_member.entry(m).or_default().push(c);
        }
    }
    let mut alive = vec![true; n];
    for i in 0..n {
        if !alive[i] {
            continue;
        }
        let mut later: Vec<usize> =
            clusters[i].members.iter().flat_map(|m| by_member[m].iter().copied()).filter(|&j| j > i).collect();
        later.sort_unstable();
        later.dedup();
        for j in later {
            if alive[j] && similarity(&clusters[i], &clusters[j]) >= s {
                alive[j] = false;
            }
        }
    }
    Ok(clusters.into_iter().zip(alive).filter(|(_, a)| *a).map(|(c, _)| c).collect())
}

/// Cluster export: `cluster_id, member_index`.
pub fn write_clusters_csv<W: Write>(clusters: &[Cluster], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cluster_id", "member_index"])?;
    for (c, cluster) in clusters.iter().enumerate() {
        for m in &cluster.members {
            w.write_record([c.to_string(), m.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_clusters_csv(clusters: &[Cluster], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_clusters_csv(clusters, std::io::BufWriter::new(file))
}

/// Relaxed MagKmeans result.
#[derive(Debug, Clone, PartialEq)]
pub struct MagKmeans {
    /// Membership matrix, `n` rows of `k` entries in `[0, 1]` summing to 1.
    pub z: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
    /// Objective after every LP step of the returned run.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl MagKmeans {
    /// Row argmax, ties to the lowest index.
    pub fn hard_assignments(&self) -> Vec<usize> {
        self.z
            .iter()
            .map(|row| {
                let mut best = 0;
                for (c, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Membership step: the LP
/// `min Σ Z_ij ‖x_i − C_j‖² + γ Σ t_j` s.t. `Σ_j Z_ij = 1`, `0 ≤ Z ≤ 1`,
/// `−t_j ≤ Σ_i Z_ij y_i ≤ t_j`.
pub fn magkmeans_membership(points: &[&[f64]], y: &[f64], centroids: &[Vec<f64>], gamma: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = points.len();
    let k = centroids.len();
    let mut lp = minilp::Problem::new(OptimizationDirection::Minimize);
    let z: Vec<Vec<minilp::Variable>> = points
        .iter()
        .map(|p| centroids.iter().map(|c| lp.add_var(dist2(p, c), (0.0, 1.0))).collect())
        .collect();
    let t: Vec<minilp::Variable> = (0..k).map(|_| lp.add_var(gamma, (0.0, f64::INFINITY))).collect();
    for row in &z {
        lp.add_constraint(row.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    }
    for j in 0..k {
        let balance: Vec<(minilp::Variable, f64)> = (0..n).map(|i| (z[i][j], y[i])).collect();
        lp.add_constraint(balance.iter().copied().chain([(t[j], -1.0)]), ComparisonOp::Le, 0.0);
        lp.add_constraint(balance.iter().copied().chain([(t[j], 1.0)]), ComparisonOp::Ge, 0.0);
    }
    let sol = lp.solve().map_err(|e| PofError::numerical(format!("MagKmeans LP failed: {e}")))?;
    let values: Vec<Vec<f64>> = z.iter().map(|row| row.iter().map(|&v| sol.var_value(v).clamp(0.0, 1.0)).collect()).collect();
    Ok((values, sol.objective()))
}

/// Objective `Σ Z_ij ‖x_i − C_j‖² + γ Σ_j |Σ_i Z_ij y_i|`.
pub fn magkmeans_objective(points: &[&[f64]], y: &[f64], z: &[Vec<f64>], centroids: &[Vec<f64>], gamma: f64) -> f64 {
    let fit: f64 = points
        .iter()
        .zip(z)
        .map(|(p, row)| row.iter().zip(centroids).map(|(w, c)| w * dist2(p, c)).sum::<f64>())
        .sum();
    let balance: f64 = (0..centroids.len())
        .map(|j| z.iter().zip(y).map(|(row, yi)| row[j] * yi).sum::<f64>().abs())
        .sum();
    fit + gamma * balance
}

const MAGKMEANS_RESTARTS: usize = 5;

/// Alternate LP membership and weighted-mean centroid updates. A run that is
/// not stationary after `max_iter` is restarted with a fresh seed, up to five
/// times; the best objective is returned.
pub fn magkmeans(points: &[&[f64]], labels: &[Label], k: usize, gamma: f64, seed: u64, max_iter: usize) -> Result<MagKmeans> {
    if k < 2 {
        return Err(PofError::invalid("MagKmeans needs k >= 2"));
    }
    if !(gamma >= 0.0) {
        return Err(PofError::invalid("gamma must be nonnegative"));
    }
    if max_iter == 0 {
        return Err(PofError::invalid("max_iter must be at least 1"));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let mut best: Option<MagKmeans> = None;
    for attempt in 0..=MAGKMEANS_RESTARTS {
        let mut centroids = seed_centroids(points, k, derive_seed(seed, &[attempt as u64]))?;
        let mut history = Vec::new();
        let mut z = Vec::new();
        let mut converged = false;
        for _ in 0..max_iter {
            let (next_z, _) = magkmeans_membership(points, &y, &centroids, gamma)?;
            z = next_z;
            history.push(magkmeans_objective(points, &y, &z, &centroids, gamma));
            let mut shift: f64 = 0.0;
            for (j, centre) in centroids.iter_mut().enumerate() {
                let mass: f64 = z.iter().map(|row| row[j]).sum();
                if mass <= 1e-12 {
                    continue;
                }
                let mut next = vec![0.0; centre.len()];
                for (p, row) in points.iter().zip(&z) {
                    for (a, x) in next.iter_mut().zip(p.iter()) {
                        *a += row[j] * x;
                    }
                }
                next.iter_mut().for_each(|a| *a /= mass);
                shift = shift.max(dist2(&next, centre).sqrt());
                *centre = next;
            }
            if shift < 1e-8 {
                converged = true;
                break;
            }
        }
        let objective = magkmeans_objective(points, &y, &z, &centroids, gamma);
        let run = MagKmeans { z, centroids, objective, history, converged };
        let better = best.as_ref().is_none_or(|b| run.objective < b.objective);
        if better {
            best = Some(run);
        }
        if converged {
            break;
        }
        log::warn!("MagKmeans not stationary after {max_iter} iterations (attempt {})", attempt + 1);
    }
    Ok(best.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let pts = vec![vec![0.0], vec![1.0], vec![5.0]];
        let km = lloyd_kmeans(&refs(&pts), 3, 1, 300).unwrap();
        assert_eq!(*km.inertia.last().unwrap(), 0.0);
        let mut a = km.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn too_many_clusters_rejected() {
        let pts = vec![vec![0.0], vec![0.0], vec![1.0]];
        assert!(lloyd_kmeans(&refs(&pts), 3, 1, 300).is_err());
    }

    #[test]
    fn nearest_ties_go_low() {
        assert_eq!(nearest(&[vec![-1.0], vec![1.0]], &[0.0]), 0);
    }

    #[test]
    fn similarity_and_merge() {
        let c = |m: &[usize]| Cluster { members: m.to_vec(), centroid: vec![0.0], cbps: vec![] };
        assert_eq!(similarity(&c(&[1, 2, 3]), &c(&[2, 3])), 1.0);
        assert_eq!(similarity(&c(&[1, 2]), &c(&[3, 4])), 0.0);
        let merged = merge_similar(vec![c(&[1, 2]), c(&[1, 2]), c(&[5, 6])], 1.0).unwrap();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged[1].members, vec![5, 6]);
        assert!(merge_similar(vec![c(&[1])], 0.0).is_err());
    }

    #[test]
    fn knn_clusters_single_pair() {
        let ges = GabrielEditedSet { pairs: vec![(0, 1)], cbps: vec![vec![0.5]] };
        let cl = cbp_knn_clusters(&ges, 4).unwrap();
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].members, vec![0, 1]);
        assert_eq!(cl[0].centroid, vec![0.5]);
    }

    #[test]
    fn knn_clusters_k1_are_single_pairs() {
        let ges = GabrielEditedSet { pairs: vec![(0, 1), (2, 3), (1, 4)], cbps: vec![vec![0.0], vec![1.0], vec![2.0]] };
        let cl = cbp_knn_clusters(&ges, 1).unwrap();
        for (c, &(i, j)) in cl.iter().zip(&ges.pairs) {
            assert_eq!(c.members, vec![i, j]);
        }
        let cl = cbp_knn_clusters(&ges, 2).unwrap();
        // CBP 1 is equidistant from 0 and 2; the lower index wins
        assert_eq!(cl[1].cbps, vec![0, 1]);
    }

    #[test]
    fn cluster_csv() {
        let c = Cluster { members: vec![3, 7], centroid: vec![0.0], cbps: vec![] };
        let mut buf = Vec::new();
        write_clusters_csv(&[c], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cluster_id,member_index\n0,3\n0,7\n");
    }

    #[test]
    fn magkmeans_gamma_zero_is_nearest_assignment() {
        let pts = vec![vec![0.0, 0.0], vec![0.2, 0.0], vec![5.0, 5.0], vec![5.2, 5.0]];
        let y = [1.0, -1.0, 1.0, -1.0];
        let centroids = vec![vec![0.0, 0.0], vec![5.0, 5.0]];
        let (z, _) = magkmeans_membership(&refs(&pts), &y, &centroids, 0.0).unwrap();
        for (row, expect) in z.iter().zip([0, 0, 1, 1]) {
            assert!((row[expect] - 1.0).abs() < 1e-9);
        }
    }
}
