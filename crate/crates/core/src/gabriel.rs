//! Gabriel edited set (GES): opposite-label Gabriel neighbours and their
//! midpoints, the characteristic boundary points (CBPs).
//!
//! Two points are Gabriel neighbours when the closed ball with their segment as
//! diameter contains no third sample. A point exactly on the sphere blocks.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{PofError, Result};
use crate::linalg::{dist, dist2, midpoint};
use crate::problems::{BoxDomain, Label, Problem};
use crate::sampling::{fmt_full, TrainingSet};

#[derive(Debug, Clone, PartialEq)]
pub struct GabrielEditedSet {
    /// Index pairs `(i, j)` into the training set, `i < j`, sorted.
    pub pairs: Vec<(usize, usize)>,
    /// Midpoint of each pair, aligned with `pairs`.
    pub cbps: Vec<Vec<f64>>,
}

impl GabrielEditedSet {
    fn from_pairs(ts: &TrainingSet, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let cbps = pairs.iter().map(|&(i, j)| midpoint(ts.point(i), ts.point(j))).collect();
        Self { pairs, cbps }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pair endpoints ordered `(failure, success)`.
    pub fn oriented(&self, ts: &TrainingSet) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .map(|&(i, j)| if ts.label(i) == Label::Failure { (i, j) } else { (j, i) })
            .collect()
    }

    /// GES export: `i, j, xbar1..xbard`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.cbps.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend((1..=d).map(|k| format!("xbar{k}")));
        w.write_record(&header)?;
        for (&(i, j), c) in self.pairs.iter().zip(&self.cbps) {
            let mut row = vec![i.to_string(), j.to_string()];
            row.extend(c.iter().map(|v| fmt_full(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Indices that survive deduplication of exact duplicates (first occurrence kept).
/// Duplicates with opposite labels are inconsistent data.
fn distinct_indices(ts: &TrainingSet) -> Result<Vec<usize>> {
    let mut order: Vec<usize> = (0..ts.len()).collect();
    let lex = |a: &usize, b: &usize| {
        ts.point(*a)
            .iter()
            .zip(ts.point(*b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    order.sort_by(lex);
    let mut keep = vec![true; ts.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && ts.point(order[end]) == ts.point(order[start]) {
            if ts.label(order[end]) != ts.label(order[start]) {
                return Err(PofError::InconsistentData(format!(
                    "samples {} and {} coincide but carry opposite labels",
                    order[start], order[end]
                )));
            }
            keep[order[end]] = false;
            end += 1;
        }
        start = end;
    }
    Ok((0..ts.len()).filter(|&i| keep[i]).collect())
}

/// `x_k` lies in the closed diameter ball of `(x_i, x_j)`.
#[inline]
fn blocks(xk: &[f64], xi: &[f64], xj: &[f64]) -> bool {
    let mut s = 0.0;
    for ((k, i), j) in xk.iter().zip(xi).zip(xj) {
        s += (k - i) * (k - j);
    }
    s <= 0.0
}

/// Edited Gabriel pairs with candidate pruning.
///
/// For each failure point the success points are candidates. A candidate `j`
/// is scanned against every other point `k`: if `k` blocks `(i, j)` the
/// candidate dies; otherwise, if `k` is itself a live candidate that `j`
/// blocks, `k` dies without its own scan.
pub fn gabriel_edited_set(ts: &TrainingSet) -> Result<GabrielEditedSet> {
    ts.require_both_labels()?;
    let active = distinct_indices(ts)?;
    let positives: Vec<usize> = active.iter().copied().filter(|&i| ts.label(i) == Label::Failure).collect();
    let negatives: Vec<usize> = active.iter().copied().filter(|&i| ts.label(i) == Label::Success).collect();
    let n = ts.len();

    let pairs: Vec<(usize, usize)> = positives
        .par_iter()
        .map(|&i| {
            let xi = ts.point(i);
            let mut candidate = vec![false; n];
            for &j in &negatives {
                candidate[j] = true;
            }
            let mut found = Vec::new();
            for &j in &negatives {
                if !candidate[j] {
                    continue;
                }
                let xj = ts.point(j);
                for &k in &active {
                    if k == i || k == j {
                        continue;
                    }
                    let xk = ts.point(k);
                    if blocks(xk, xi, xj) {
                        candidate[j] = false;
                        break;
                    } else if candidate[k] && blocks(xj, xi, xk) {
                        candidate[k] = false;
                    }
                }
                if candidate[j] {
                    found.push((i.min(j), i.max(j)));
                }
            }
            found
        })
        .flatten()
        .collect();
    Ok(GabrielEditedSet::from_pairs(ts, pairs))
}

/// Editing with every axis mapped onto `[0, 1]` by `domain`, for boxes whose
/// sides differ in scale. Pairs index `ts`; CBPs stay in original coordinates.
pub fn gabriel_edited_set_scaled(ts: &TrainingSet, domain: &BoxDomain) -> Result<GabrielEditedSet> {
    if ts.dim() != domain.dim() {
        return Err(PofError::invalid("training set and domain dimensions differ"));
    }
    let mut unit = ts.clone();
    for s in &mut unit.samples {
        for (v, &(lo, hi)) in s.x.iter_mut().zip(domain.bounds()) {
            *v = (*v - lo) / (hi - lo);
        }
    }
    let edited = gabriel_edited_set(&unit)?;
    Ok(GabrielEditedSet::from_pairs(ts, edited.pairs))
}

/// Direct triple loop over all opposite-label pairs using the midpoint form of
/// the Gabriel condition. Test oracle for [`gabriel_edited_set`].
pub fn brute_force_gabriel(ts: &TrainingSet) -> Result<GabrielEditedSet> {
    ts.require_both_labels()?;
    let n = ts.len();
    let mut dropped = vec![false; n];
    for a in 0..n {
        for b in a + 1..n {
            if ts.point(a) == ts.point(b) {
                if ts.label(a) != ts.label(b) {
                    return Err(PofError::InconsistentData(format!(
                        "samples {a} and {b} coincide but carry opposite labels"
                    )));
                }
                dropped[b] = true;
            }
        }
    }
    let mut pairs = Vec::new();
    for i in (0..n).filter(|&i| !dropped[i]) {
        for j in (i + 1..n).filter(|&j| !dropped[j]) {
            if ts.label(i) == ts.label(j) {
                continue;
            }
            let mid = midpoint(ts.point(i), ts.point(j));
            let half = dist(ts.point(i), ts.point(j)) / 2.0;
            let clear = (0..n)
                .filter(|&k| k != i && k != j && !dropped[k])
                .all(|k| dist(ts.point(k), &mid) > half);
            if clear {
                pairs.push((i, j));
            }
        }
    }
    Ok(GabrielEditedSet::from_pairs(ts, pairs))
}

/// Largest Euclidean length over edited pairs.
pub fn max_pair_distance(ges: &GabrielEditedSet, ts: &TrainingSet) -> Result<f64> {
    if ges.is_empty() {
        return Err(PofError::invalid("empty Gabriel edited set"));
    }
    Ok(ges
        .pairs
        .iter()
        .map(|&(i, j)| dist2(ts.point(i), ts.point(j)))
        .fold(0.0, f64::max)
        .sqrt())
}

/// Points where each edited segment crosses `Q = q0`, found by bisection.
/// Segments whose stored responses do not straddle `q0` are skipped.
pub fn segment_intersections(ges: &GabrielEditedSet, ts: &TrainingSet, problem: &Problem) -> Result<Vec<Vec<f64>>> {
    let q0 = problem.q0;
    let found: Vec<Option<Vec<f64>>> = ges
        .pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&ts.samples[i], &ts.samples[j]);
            let (fa, fb) = (a.q - q0, b.q - q0);
            if !((fa >= 0.0) ^ (fb >= 0.0)) {
                log::warn!("GES segment ({i}, {j}) does not straddle the threshold; skipped");
                return Ok(None);
            }
            let at = |t: f64| -> Vec<f64> { a.x.iter().zip(&b.x).map(|(u, v)| u + t * (v - u)).collect() };
            // invariant: side(lo) == side(0), side(hi) == side(1)
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            let a_fails = fa >= 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (problem.eval_q(&at(mid))? - q0 >= 0.0) == a_fails {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(Some(at(0.5 * (lo + hi))))
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// Largest distance from a probe to its nearest intersection point.
pub fn gap_to_intersections(probes: &[Vec<f64>], intersections: &[Vec<f64>]) -> Result<f64> {
    if intersections.is_empty() {
        return Err(PofError::invalid("no boundary intersections to measure against"));
    }
    Ok(probes
        .iter()
        .map(|z| intersections.iter().map(|p| dist2(z, p)).fold(f64::INFINITY, f64::min).sqrt())
        .fold(0.0, f64::max))
}

/// Boundary gap: for each probe on `Q = q0`, the distance to the nearest
/// GES-segment/boundary intersection; the maximum over probes.
pub fn boundary_gap(ges: &GabrielEditedSet, ts: &TrainingSet, problem: &Problem, probes: &[Vec<f64>]) -> Result<f64> {
    let inter = segment_intersections(ges, ts, problem)?;
    gap_to_intersections(probes, &inter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{LabeledSample, SamplingMethod};

    fn toy(points: &[(&[f64], i8)]) -> TrainingSet {
        let samples = points
            .iter()
            .map(|(x, y)| LabeledSample {
                x: x.to_vec(),
                q: *y as f64,
                grad: vec![0.0; x.len()],
                label: Label::try_from(*y).unwrap(),
                radius: 0.0,
            })
            .collect();
        TrainingSet { samples, problem: "toy".into(), seed: 0, method: SamplingMethod::Uniform, saturated: false }
    }

    #[test]
    fn two_points_form_one_pair() {
        let ts = toy(&[(&[0.0, 0.0], -1), (&[1.0, 0.0], 1)]);
        let ges = gabriel_edited_set(&ts).unwrap();
        assert_eq!(ges.pairs, vec![(0, 1)]);
        assert_eq!(ges.cbps, vec![vec![0.5, 0.0]]);
        assert_eq!(brute_force_gabriel(&ts).unwrap(), ges);
    }

    #[test]
    fn collinear_middle_point_blocks() {
        let ts = toy(&[(&[0.0], -1), (&[1.0], -1), (&[2.0], 1)]);
        assert_eq!(gabriel_edited_set(&ts).unwrap().pairs, vec![(1, 2)]);
        assert_eq!(brute_force_gabriel(&ts).unwrap().pairs, vec![(1, 2)]);
    }

    #[test]
    fn point_on_sphere_blocks() {
        // (0,1) lies exactly on the circle with diameter (-1,0)-(1,0)
        let ts = toy(&[(&[-1.0, 0.0], -1), (&[1.0, 0.0], 1), (&[0.0, 1.0], -1)]);
        let ges = gabriel_edited_set(&ts).unwrap();
        assert_eq!(ges.pairs, vec![(1, 2)]);
        assert_eq!(brute_force_gabriel(&ts).unwrap(), ges);
    }

    #[test]
    fn single_label_rejected() {
        let ts = toy(&[(&[0.0], 1), (&[1.0], 1)]);
        assert!(matches!(gabriel_edited_set(&ts), Err(PofError::DegenerateLabels)));
    }

    #[test]
    fn duplicates() {
        let same = toy(&[(&[0.0], -1), (&[0.0], -1), (&[1.0], 1)]);
        assert_eq!(gabriel_edited_set(&same).unwrap().pairs, vec![(0, 2)]);
        assert_eq!(brute_force_gabriel(&same).unwrap().pairs, vec![(0, 2)]);
        let clash = toy(&[(&[0.0], -1), (&[0.0], 1)]);
        assert!(matches!(gabriel_edited_set(&clash), Err(PofError::InconsistentData(_))));
        assert!(matches!(brute_force_gabriel(&clash), Err(PofError::InconsistentData(_))));
    }

    #[test]
    fn max_distance_and_orientation() {
        let ts = toy(&[(&[0.0, 0.0], 1), (&[2.0, 0.0], -1)]);
        let ges = gabriel_edited_set(&ts).unwrap();
        assert_eq!(max_pair_distance(&ges, &ts).unwrap(), 2.0);
        assert_eq!(ges.oriented(&ts), vec![(0, 1)]);
        let empty = GabrielEditedSet { pairs: vec![], cbps: vec![] };
        assert!(max_pair_distance(&empty, &ts).is_err());
    }

    #[test]
    fn csv_export() {
        let ts = toy(&[(&[0.0, 0.0], -1), (&[1.0, 0.0], 1)]);
        let mut buf = Vec::new();
        gabriel_edited_set(&ts).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("i,j,xbar1,xbar2"));
        assert!(lines.next().unwrap().starts_with("0,1,5.0000000000000000e-1,"));
    }

    #[test]
    fn gap_is_zero_at_intersection() {
        let inter = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(gap_to_intersections(&[vec![1.0, 2.0]], &inter).unwrap(), 0.0);
        assert_eq!(gap_to_intersections(&[vec![1.0, 2.0], vec![3.0, 5.0]], &inter).unwrap(), 1.0);
        assert!(gap_to_intersections(&[vec![0.0]], &[]).is_err());
    }
}
