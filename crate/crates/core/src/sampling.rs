//! Training-set generation: uniform sampling and POF-Darts with 1-d darts.
//!
//! POF-Darts surrounds every evaluated point with an exclusion sphere of radius
//! `|Q - q0| / (L * max(floor, |∇Q|))`, an estimate of the distance to the
//! decision boundary, and draws each new point on an axis-aligned line outside
//! all current spheres. Opposite-label spheres are shrunk so they never overlap.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{PofError, Result};
use crate::linalg::{dist, norm};
use crate::problems::{BoxDomain, Label, Problem};
use crate::rng::{rng_from_seed, Rng};

/// One evaluated training point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub q: f64,
    pub grad: Vec<f64>,
    pub label: Label,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    Uniform,
    PofDarts,
}

impl SamplingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMethod::Uniform => "uniform",
            SamplingMethod::PofDarts => "pof-darts",
        }
    }
}

impl std::str::FromStr for SamplingMethod {
    type Err = PofError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingMethod::Uniform),
            "pof-darts" | "pof_darts" | "darts" => Ok(SamplingMethod::PofDarts),
            other => Err(PofError::Unknown { kind: "sampling method", name: other.to_string() }),
        }
    }
}

/// An ordered set of labelled samples from one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<LabeledSample>,
    pub problem: String,
    pub seed: u64,
    pub method: SamplingMethod,
    /// Set when POF-Darts ran out of uncovered space before reaching the requested size.
    pub saturated: bool,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.len())
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.samples[i].x
    }

    pub fn label(&self, i: usize) -> Label {
        self.samples[i].label
    }

    pub fn points(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.x.as_slice()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn has_both_labels(&self) -> bool {
        self.count(Label::Failure) > 0 && self.count(Label::Success) > 0
    }

    pub fn require_both_labels(&self) -> Result<()> {
        if self.has_both_labels() {
            Ok(())
        } else {
            Err(PofError::DegenerateLabels)
        }
    }

    /// Subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            problem: self.problem.clone(),
            seed: self.seed,
            method: self.method,
            saturated: self.saturated,
        }
    }

    /// Write the sample CSV: `x1..xd, q, g1..gd, label, radius`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        header.push("q".into());
        header.extend((1..=d).map(|k| format!("g{k}")));
        header.push("label".into());
        header.push("radius".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.x.iter().map(|v| fmt_full(*v)).collect();
            row.push(fmt_full(s.q));
            row.extend(s.grad.iter().map(|v| fmt_full(*v)));
            row.push(s.label.value().to_string());
            row.push(fmt_full(s.radius));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Read the sample CSV schema written by [`TrainingSet::write_csv`].
    pub fn read_csv<R: Read>(reader: R, problem: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 5 || (cols - 3) % 2 != 0 {
            return Err(PofError::InconsistentData(format!("sample CSV has {cols} columns")));
        }
        let d = (cols - 3) / 2;
        let expected: Vec<String> = (1..=d)
            .map(|k| format!("x{k}"))
            .chain(std::iter::once("q".to_string()))
            .chain((1..=d).map(|k| format!("g{k}")))
            .chain(["label".to_string(), "radius".to_string()])
            .collect();
        if header.iter().zip(&expected).any(|(h, e)| h.trim() != e) {
            return Err(PofError::InconsistentData(format!("unexpected sample CSV header {header:?}")));
        }
        let mut samples = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let parse = |k: usize| -> Result<f64> {
                record[k].trim().parse::<f64>().map_err(|e| {
                    PofError::InconsistentData(format!("row {}: column {}: {e}", row + 1, header[k].to_string()))
                })
            };
            let x = (0..d).map(parse).collect::<Result<Vec<_>>>()?;
            let q = parse(d)?;
            let grad = (d + 1..2 * d + 1).map(parse).collect::<Result<Vec<_>>>()?;
            let label_raw: i8 = record[2 * d + 1]
                .trim()
                .parse()
                .map_err(|e| PofError::InconsistentData(format!("row {}: label: {e}", row + 1)))?;
            let label = Label::try_from(label_raw).map_err(PofError::InconsistentData)?;
            let radius = parse(2 * d + 2)?;
            samples.push(LabeledSample { x, q, grad, label, radius });
        }
        Ok(TrainingSet { samples, problem: problem.to_string(), seed: 0, method: SamplingMethod::Uniform, saturated: false })
    }

    pub fn load_csv(path: impl AsRef<Path>, problem: &str) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file), problem)
    }
}

/// 17 significant digits.
pub(crate) fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// POF-Darts settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DartsConfig {
    pub n_initial: usize,
    /// Safety factor on the local Lipschitz estimate.
    pub scale_l: f64,
    /// Lower bound on the gradient magnitude used in the radius.
    pub grad_floor: f64,
    /// Consecutive failed darts before sampling is declared saturated.
    pub max_misses: usize,
}

impl Default for DartsConfig {
    fn default() -> Self {
        Self { n_initial: 10, scale_l: 1.5, grad_floor: 1e-3, max_misses: 1000 }
    }
}

impl DartsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_initial < 2 {
            return Err(PofError::invalid("n_initial must be at least 2"));
        }
        if !(self.scale_l >= 1.0) {
            return Err(PofError::invalid("scale_l must be >= 1"));
        }
        if !(self.grad_floor > 0.0) {
            return Err(PofError::invalid("grad_floor must be positive"));
        }
        if self.max_misses == 0 {
            return Err(PofError::invalid("max_misses must be positive"));
        }
        Ok(())
    }
}

fn evaluate(problem: &Problem, x: Vec<f64>) -> Result<LabeledSample> {
    let (q, grad) = problem.eval_q_and_grad(&x)?;
    let label = Label::from_response(q, problem.q0);
    Ok(LabeledSample { x, q, grad, label, radius: 0.0 })
}

/// `n` i.i.d. uniform points, evaluated, with zero radii.
pub fn uniform_sample(problem: &Problem, n: usize, seed: u64) -> Result<TrainingSet> {
    if n == 0 {
        return Err(PofError::invalid("sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let samples = (0..n)
        .map(|_| evaluate(problem, problem.domain.sample(&mut rng)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSet { samples, problem: problem.name.clone(), seed, method: SamplingMethod::Uniform, saturated: false })
}

/// Exclusion radius `|q - q0| / (L * max(floor, |∇Q|))`, capped at `cap`.
pub fn radius(q: f64, q0: f64, grad_mag: f64, cfg: &DartsConfig, cap: f64) -> f64 {
    let lipschitz = cfg.grad_floor.max(grad_mag);
    ((q - q0).abs() / (cfg.scale_l * lipschitz)).min(cap)
}

/// Touching radii for two overlapping opposite-label spheres.
///
/// Uses the secant slope `|q_a - q_b| / d` as the Lipschitz estimate, so the
/// returned radii partition the segment: `r_a + r_b = d`.
pub fn resolve_overlap(a: &LabeledSample, b: &LabeledSample, q0: f64) -> (f64, f64) {
    assert_ne!(a.label, b.label, "overlap resolution needs opposite labels");
    let spread = (a.q - b.q).abs();
    assert!(spread > 0.0, "opposite labels imply distinct responses");
    let d = dist(&a.x, &b.x);
    ((a.q - q0).abs() * d / spread, (b.q - q0).abs() * d / spread)
}

/// Shrink opposite-label spheres of `i` and every `j` in `others` until they no longer overlap.
fn separate(samples: &mut [LabeledSample], i: usize, others: impl Iterator<Item = usize>, q0: f64) {
    for j in others {
        if j == i || samples[j].label == samples[i].label {
            continue;
        }
        let d = dist(&samples[i].x, &samples[j].x);
        if samples[i].radius + samples[j].radius > d {
            let (ri, rj) = resolve_overlap(&samples[i], &samples[j], q0);
            // never grow a sphere: a larger radius could cover a third point's sphere
            samples[i].radius = samples[i].radius.min(ri);
            samples[j].radius = samples[j].radius.min(rj);
        }
    }
}

/// Free sub-intervals of `[lo, hi]` after removing the open intervals in `blocked`.
fn free_intervals(lo: f64, hi: f64, mut blocked: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    blocked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut free = Vec::new();
    let mut cursor = lo;
    for (a, b) in blocked {
        if b <= cursor {
            continue;
        }
        if a > cursor {
            free.push((cursor, a.min(hi)));
        }
        cursor = cursor.max(b);
        if cursor >= hi {
            break;
        }
    }
    if cursor < hi {
        free.push((cursor, hi));
    }
    free.retain(|(a, b)| b > a);
    free
}

/// Sphere given by centre and radius.
pub type Sphere<'a> = (&'a [f64], f64);

/// One 1-d dart: a uniform point, then for each axis in ascending order the
/// axis-parallel line through it minus all sphere chords; the first axis with
/// free length returns the point with that coordinate resampled uniformly on
/// the free set. `None` after `max_misses` darts hit nothing.
pub fn one_d_dart(spheres: &[Sphere<'_>], domain: &BoxDomain, rng: &mut Rng, max_misses: usize) -> Option<Vec<f64>> {
    let d = domain.dim();
    for _ in 0..max_misses {
        let mut p = domain.sample(rng);
        // squared distance from each centre to p, reused across axes
        let full: Vec<f64> = spheres
            .iter()
            .map(|(c, _)| c.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        for axis in 0..d {
            let (lo, hi) = domain.bounds()[axis];
            let blocked: Vec<(f64, f64)> = spheres
                .iter()
                .zip(&full)
                .filter_map(|(&(c, r), &d2)| {
                    if r <= 0.0 {
                        return None;
                    }
                    let off = d2 - (c[axis] - p[axis]) * (c[axis] - p[axis]);
                    let half2 = r * r - off;
                    (half2 > 0.0).then(|| {
                        let half = half2.sqrt();
                        (c[axis] - half, c[axis] + half)
                    })
                })
                .collect();
            let free = free_intervals(lo, hi, blocked);
            let total: f64 = free.iter().map(|(a, b)| b - a).sum();
            if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut value = free.last().map(|f| f.1).unwrap_or(hi);
                for (a, b) in &free {
                    let len = b - a;
                    if u < len {
                        value = a + u;
                        break;
                    }
                    u -= len;
                }
                p[axis] = value.clamp(lo, hi);
                return Some(p);
            }
        }
    }
    None
}

/// POF-Darts: `n_initial` uniform points, then darts outside all spheres until
/// `m_total` samples exist. Opposite-label spheres never overlap in the result.
/// Running out of free space returns the partial set with `saturated = true`.
pub fn pof_darts(problem: &Problem, m_total: usize, cfg: &DartsConfig, seed: u64) -> Result<TrainingSet> {
    cfg.validate()?;
    if m_total < cfg.n_initial {
        return Err(PofError::invalid("m_total must be at least n_initial"));
    }
    let cap = problem.domain.diagonal();
    let q0 = problem.q0;
    let mut rng = rng_from_seed(seed);
    let mut samples = Vec::with_capacity(m_total);
    for _ in 0..cfg.n_initial {
        let mut s = evaluate(problem, problem.domain.sample(&mut rng))?;
        s.radius = radius(s.q, q0, norm(&s.grad), cfg, cap);
        samples.push(s);
    }
    for i in 0..samples.len() {
        separate(&mut samples, i, i + 1..cfg.n_initial, q0);
    }

    let mut saturated = false;
    while samples.len() < m_total {
        let dart = {
            let spheres: Vec<Sphere<'_>> = samples.iter().map(|s| (s.x.as_slice(), s.radius)).collect();
            one_d_dart(&spheres, &problem.domain, &mut rng, cfg.max_misses)
        };
        let Some(x) = dart else {
            log::warn!(
                "POF-Darts saturated after {} of {} samples on {}",
                samples.len(),
                m_total,
                problem.name
            );
            saturated = true;
            break;
        };
        let mut s = evaluate(problem, x)?;
        s.radius = radius(s.q, q0, norm(&s.grad), cfg, cap);
        samples.push(s);
        let last = samples.len() - 1;
        separate(&mut samples, last, 0..last, q0);
    }
    Ok(TrainingSet { samples, problem: problem.name.clone(), seed, method: SamplingMethod::PofDarts, saturated })
}

/// Dispatch on the sampling method.
pub fn sample(problem: &Problem, method: SamplingMethod, n: usize, cfg: &DartsConfig, seed: u64) -> Result<TrainingSet> {
    match method {
        SamplingMethod::Uniform => uniform_sample(problem, n, seed),
        SamplingMethod::PofDarts => pof_darts(problem, n, cfg, seed),
    }
}
