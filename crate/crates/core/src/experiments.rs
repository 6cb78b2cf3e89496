//! Experiment runners shared by the command line and the test suites:
//! accuracy benchmarks, convergence diagnostics, the Lotka-Volterra
//! repetition study, and decision grids for plotting.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PofError, Result};
use crate::estimator::{direct_mc_pof, repeat_stats, surrogate_mc_pof, variance_test_one_sided, welch_t_test};
use crate::gabriel::{boundary_gap, gabriel_edited_set, max_pair_distance};
use crate::models::{accuracy_on, cross_validate, labelled_test_set, train, Classifier, HyperGrid, Hyperparams, Method};
use crate::problems::{Label, Model, Problem};
use crate::rng::{derive_seed, name_hash};
use crate::sampling::{fmt_full, pof_darts, sample, uniform_sample, DartsConfig, SamplingMethod, TrainingSet};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub method: String,
    pub problem: String,
    pub sampling: String,
    pub n_train: usize,
    pub rep: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub pof_estimate: Option<f64>,
    pub n_model_evals: usize,
    pub wall_ms: u64,
    pub status: String,
}

/// Write rows with a header; `append` skips the header when the target already has content.
pub fn write_results<W: Write>(rows: &[ResultRow], writer: W, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() && header {
        w.write_record([
            "schema_version",
            "method",
            "problem",
            "sampling",
            "n_train",
            "rep",
            "seed",
            "accuracy",
            "pof_estimate",
            "n_model_evals",
            "wall_ms",
            "status",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

/// Append to a results file, writing the header only for a new or empty file.
pub fn append_results(rows: &[ResultRow], path: &std::path::Path) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    write_results(rows, std::io::BufWriter::new(file), fresh)
}

/// Budget of a sampled training set: one response and one gradient per point.
pub fn training_budget(ts: &TrainingSet) -> usize {
    2 * ts.len()
}

/// Hyperparameters by cross-validation when `folds ≥ 2`, else the first grid point.
pub fn select_hyperparams(ts: &TrainingSet, method: Method, grid: &HyperGrid, folds: usize, seed: u64) -> Result<Hyperparams> {
    if folds >= 2 {
        Ok(cross_validate(ts, method, grid, folds, seed)?.best)
    } else {
        grid.validate()?;
        Ok(grid.points(method)[0])
    }
}

/// Accuracy benchmark settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub problem: String,
    pub methods: Vec<Method>,
    pub sizes: Vec<usize>,
    pub samplings: Vec<SamplingMethod>,
    pub reps: usize,
    pub test_size: usize,
    /// Cross-validation folds; below 2 disables the grid search.
    pub folds: usize,
    pub grid: HyperGrid,
    pub darts: DartsConfig,
    /// Surrogate predictions per PoF estimate; 0 skips the estimate.
    pub n_pred: usize,
    pub seed: u64,
    /// Record wall-clock milliseconds (breaks byte reproducibility).
    pub timing: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            problem: "fn1".into(),
            methods: vec![Method::Ppsvmg],
            sizes: vec![40, 60, 80, 100, 120, 150, 200],
            samplings: vec![SamplingMethod::PofDarts, SamplingMethod::Uniform],
            reps: 20,
            test_size: 2000,
            folds: 10,
            grid: HyperGrid::default(),
            darts: DartsConfig::default(),
            n_pred: 5000,
            seed: 0,
            timing: false,
        }
    }
}

/// Seed of the training set for `(size, rep)`, shared by all methods and sampling modes.
pub fn training_seed(seed: u64, n: usize, rep: usize) -> u64 {
    derive_seed(seed, &[1, n as u64, rep as u64])
}

/// Seed of the held-out test set.
pub fn test_seed(seed: u64) -> u64 {
    derive_seed(seed, &[2])
}

fn run_cell(
    cfg: &BenchmarkConfig,
    problem: &Problem,
    test: &(Vec<Vec<f64>>, Vec<Label>),
    method: Method,
    sampling: SamplingMethod,
    n: usize,
    rep: usize,
) -> ResultRow {
    let start = Instant::now();
    let seed = training_seed(cfg.seed, n, rep);
    let mut row = ResultRow {
        schema_version: RESULTS_SCHEMA_VERSION,
        method: method.to_string(),
        problem: problem.name.clone(),
        sampling: sampling.as_str().into(),
        n_train: n,
        rep,
        seed,
        accuracy: None,
        pof_estimate: None,
        n_model_evals: 0,
        wall_ms: 0,
        status: "ok".into(),
    };
    let outcome = (|| -> Result<()> {
        let ts = sample(problem, sampling, n, &cfg.darts, seed)?;
        row.n_model_evals = training_budget(&ts);
        let model_seed = derive_seed(seed, &[name_hash(method.as_str())]);
        let hp = select_hyperparams(&ts, method, &cfg.grid, cfg.folds, model_seed)?;
        let model = train(method, &ts, &hp, model_seed)?;
        row.accuracy = Some(accuracy_on(&test.0, &test.1, |x| model.predict(x)));
        if cfg.n_pred > 0 {
            let est = surrogate_mc_pof(&model, &problem.domain, cfg.n_pred, derive_seed(seed, &[3]))?;
            row.pof_estimate = Some(est.value);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.status = format!("error: {e}");
    }
    if cfg.timing {
        row.wall_ms = start.elapsed().as_millis() as u64;
    }
    row
}

/// Full factorial over methods × sizes × samplings × repetitions; rows in
/// canonical order regardless of completion order. Failed cells are
/// recorded through their status column.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<ResultRow>> {
    let problem = Problem::by_name(&cfg.problem)?;
    if cfg.sizes.iter().any(|&n| n == 0) || cfg.reps == 0 || cfg.test_size == 0 {
        return Err(PofError::invalid("sizes, reps and test_size must be positive"));
    }
    let test = labelled_test_set(&problem, cfg.test_size, test_seed(cfg.seed))?;
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.sizes {
            for &sampling in &cfg.samplings {
                for rep in 0..cfg.reps {
                    cells.push((method, sampling, n, rep));
                }
            }
        }
    }
    Ok(cells
        .par_iter()
        .map(|&(method, sampling, n, rep)| run_cell(cfg, &problem, &test, method, sampling, n, rep))
        .collect())
}

/// Per-cell aggregate used for accuracy-versus-size plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub problem: String,
    pub sampling: String,
    pub n_train: usize,
    pub n_ok: usize,
    pub mean_accuracy: f64,
    /// `mean ± 1.96 sd` band over repetitions.
    pub accuracy_lo: f64,
    pub accuracy_hi: f64,
    pub mean_pof: Option<f64>,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, String, usize)> =
        rows.iter().map(|r| (r.method.clone(), r.problem.clone(), r.sampling.clone(), r.n_train)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, problem, sampling, n_train)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == method && r.problem == problem && r.sampling == sampling && r.n_train == n_train)
                .collect();
            let acc: Vec<f64> = cell.iter().filter_map(|r| r.accuracy).collect();
            let pof: Vec<f64> = cell.iter().filter_map(|r| r.pof_estimate).collect();
            let (mean, var) = if acc.is_empty() { (f64::NAN, 0.0) } else { crate::stats::mean_var(&acc) };
            let band = 1.96 * var.sqrt();
            SummaryRow {
                method,
                problem,
                sampling,
                n_train,
                n_ok: acc.len(),
                mean_accuracy: mean,
                accuracy_lo: mean - band,
                accuracy_hi: mean + band,
                mean_pof: (!pof.is_empty()).then(|| pof.iter().sum::<f64>() / pof.len() as f64),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Equally spaced points on the decision boundary, where it is known in closed form.
pub fn boundary_probes(problem: &Problem, count: usize) -> Result<Vec<Vec<f64>>> {
    match &problem.model {
        Model::Circle { center, radius } => {
            let r2 = radius * radius - problem.q0;
            if r2 <= 0.0 {
                return Err(PofError::invalid("threshold leaves no boundary"));
            }
            let r = r2.sqrt();
            Ok((0..count)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                    vec![center[0] + r * a.cos(), center[1] + r * a.sin()]
                })
                .collect())
        }
        _ => Err(PofError::invalid(format!("no closed-form boundary probes for {}", problem.name))),
    }
}

/// Convergence diagnostic settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub problem: String,
    pub sizes: Vec<usize>,
    pub seeds: usize,
    pub probes: usize,
    pub sampling: SamplingMethod,
    pub darts: DartsConfig,
    pub seed: u64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            problem: "circle".into(),
            sizes: vec![100, 200, 500, 1000],
            seeds: 20,
            probes: 16,
            sampling: SamplingMethod::Uniform,
            darts: DartsConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub n_pairs: usize,
    pub max_pair_distance: f64,
    pub boundary_gap: Option<f64>,
}

/// `M_n` and the boundary gap per `(n, seed)`.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    let problem = Problem::by_name(&cfg.problem)?;
    let probes = boundary_probes(&problem, cfg.probes).ok();
    let cells: Vec<(usize, usize)> = cfg.sizes.iter().flat_map(|&n| (0..cfg.seeds).map(move |r| (n, r))).collect();
    cells
        .par_iter()
        .map(|&(n, rep)| {
            let seed = derive_seed(cfg.seed, &[4, rep as u64]);
            let ts = sample(&problem, cfg.sampling, n, &cfg.darts, derive_seed(seed, &[n as u64]))?;
            let ges = gabriel_edited_set(&ts)?;
            let gap = match &probes {
                Some(p) => Some(boundary_gap(&ges, &ts, &problem, p)?),
                None => None,
            };
            Ok(ConvergenceRow {
                n,
                rep,
                seed,
                n_pairs: ges.len(),
                max_pair_distance: max_pair_distance(&ges, &ts)?,
                boundary_gap: gap,
            })
        })
        .collect()
}

pub fn write_convergence<W: Write>(rows: &[ConvergenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "rep", "seed", "n_pairs", "max_pair_distance", "boundary_gap"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.n_pairs.to_string(),
            fmt_full(r.max_pair_distance),
            r.boundary_gap.map(fmt_full).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Median of a nonempty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Lotka-Volterra repetition study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LotkaConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub folds: usize,
    pub n_pred: usize,
    pub grid: HyperGrid,
    pub darts: DartsConfig,
    pub seed: u64,
    pub timing: bool,
}

impl Default for LotkaConfig {
    fn default() -> Self {
        Self {
            sizes: vec![20, 30, 40, 50, 70, 100, 150, 200, 300, 500, 750, 1000],
            reps: 30,
            folds: 5,
            n_pred: 5000,
            grid: HyperGrid::default(),
            darts: DartsConfig::default(),
            seed: 0,
            timing: false,
        }
    }
}

/// Per-size comparison of PPSVMG against direct Monte Carlo with equal sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotkaSummary {
    pub n: usize,
    pub reps_ok: usize,
    pub direct_mean: f64,
    pub direct_sd: f64,
    pub ppsvmg_mean: f64,
    pub ppsvmg_sd: f64,
    /// Direct-method 95% interval `trimmed mean ± 1.96 sd`.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ppsvmg_in_ci: bool,
    pub welch_p: f64,
    /// One-sided test of `var(direct) > var(PPSVMG)`.
    pub variance_p: f64,
}

/// Raw rows (both methods) and per-size summaries.
pub fn run_lotka(cfg: &LotkaConfig) -> Result<(Vec<ResultRow>, Vec<LotkaSummary>)> {
    let problem = Problem::by_name("lotka")?;
    if cfg.reps < 5 {
        return Err(PofError::invalid("the Lotka study trims extremes and needs at least 5 repetitions"));
    }
    let cells: Vec<(usize, usize)> = cfg.sizes.iter().flat_map(|&n| (0..cfg.reps).map(move |r| (n, r))).collect();
    let pairs: Vec<(ResultRow, ResultRow)> = cells
        .par_iter()
        .map(|&(n, rep)| {
            let start = Instant::now();
            let seed = training_seed(cfg.seed, n, rep);
            let base = ResultRow {
                schema_version: RESULTS_SCHEMA_VERSION,
                method: Method::Ppsvmg.to_string(),
                problem: problem.name.clone(),
                sampling: SamplingMethod::PofDarts.as_str().into(),
                n_train: n,
                rep,
                seed,
                accuracy: None,
                pof_estimate: None,
                n_model_evals: 0,
                wall_ms: 0,
                status: "ok".into(),
            };
            let mut surrogate = base.clone();
            let outcome = (|| -> Result<f64> {
                let ts = pof_darts(&problem, n, &cfg.darts, seed)?;
                surrogate.n_model_evals = training_budget(&ts);
                let model_seed = derive_seed(seed, &[name_hash("ppsvmg")]);
                let hp = select_hyperparams(&ts, Method::Ppsvmg, &cfg.grid, cfg.folds, model_seed)?;
                let model = train(Method::Ppsvmg, &ts, &hp, model_seed)?;
                Ok(surrogate_mc_pof(&model, &problem.domain, cfg.n_pred, derive_seed(seed, &[3]))?.value)
            })();
            match outcome {
                Ok(v) => surrogate.pof_estimate = Some(v),
                Err(e) => surrogate.status = format!("error: {e}"),
            }
            if cfg.timing {
                surrogate.wall_ms = start.elapsed().as_millis() as u64;
            }
            let mut direct = ResultRow {
                method: "direct".into(),
                sampling: SamplingMethod::Uniform.as_str().into(),
                ..base
            };
            match direct_mc_pof(&problem, n, derive_seed(seed, &[5])) {
                Ok(est) => {
                    direct.pof_estimate = Some(est.value);
                    direct.n_model_evals = est.n_model_evals;
                }
                Err(e) => direct.status = format!("error: {e}"),
            }
            Ok((surrogate, direct))
        })
        .collect::<Result<_>>()?;

    let mut summaries = Vec::new();
    for &n in &cfg.sizes {
        let sur: Vec<f64> = pairs.iter().filter(|p| p.0.n_train == n).filter_map(|p| p.0.pof_estimate).collect();
        let dir: Vec<f64> = pairs.iter().filter(|p| p.1.n_train == n).filter_map(|p| p.1.pof_estimate).collect();
        if sur.len() < 5 || dir.len() < 5 {
            log::warn!("n = {n}: too few successful repetitions for statistics");
            continue;
        }
        let (ds, ss) = (repeat_stats(&dir, true)?, repeat_stats(&sur, true)?);
        let (lo, hi) = (ds.mean - 1.96 * ds.sd, ds.mean + 1.96 * ds.sd);
        summaries.push(LotkaSummary {
            n,
            reps_ok: sur.len(),
            direct_mean: ds.mean,
            direct_sd: ds.sd,
            ppsvmg_mean: ss.mean,
            ppsvmg_sd: ss.sd,
            ci_lo: lo,
            ci_hi: hi,
            ppsvmg_in_ci: (lo..=hi).contains(&ss.mean),
            welch_p: welch_t_test(&ds.estimates, &ss.estimates).unwrap_or(f64::NAN),
            variance_p: variance_test_one_sided(&ds.estimates, &ss.estimates).unwrap_or(f64::NAN),
        });
    }
    let rows = pairs.into_iter().flat_map(|(a, b)| [a, b]).collect();
    Ok((rows, summaries))
}

pub fn write_lotka_summary<W: Write>(rows: &[LotkaSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Classifier decisions on a `resolution × resolution` grid over two axes of
/// the domain; other coordinates sit at the domain centre. Rows are
/// `x1, x2, prediction, truth` with truth omitted when no problem is given.
pub fn write_decision_grid<W: Write>(
    classifier: &Classifier,
    problem: &Problem,
    axes: (usize, usize),
    resolution: usize,
    with_truth: bool,
    writer: W,
) -> Result<()> {
    let d = problem.dim();
    if axes.0 >= d || axes.1 >= d || axes.0 == axes.1 {
        return Err(PofError::invalid(format!("plot axes {axes:?} invalid for a {d}-dimensional problem")));
    }
    if resolution < 2 {
        return Err(PofError::invalid("grid resolution must be at least 2"));
    }
    let centre = problem.domain.center();
    let (b0, b1) = (problem.domain.bounds()[axes.0], problem.domain.bounds()[axes.1]);
    let step = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let points: Vec<Vec<f64>> = (0..resolution)
        .flat_map(|j| (0..resolution).map(move |i| (i, j)))
        .map(|(i, j)| {
            let mut x = centre.clone();
            x[axes.0] = step(b0, i);
            x[axes.1] = step(b1, j);
            x
        })
        .collect();
    let rows: Vec<(Label, Option<Label>)> = points
        .par_iter()
        .map(|x| Ok((classifier.predict(x), if with_truth { Some(problem.classify(x)?) } else { None })))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![format!("x{}", axes.0 + 1), format!("x{}", axes.1 + 1), "prediction".into()];
    if with_truth {
        header.push("truth".into());
    }
    w.write_record(&header)?;
    for (x, (pred, truth)) in points.iter().zip(rows) {
        let mut rec = vec![fmt_full(x[axes.0]), fmt_full(x[axes.1]), pred.value().to_string()];
        if let Some(t) = truth {
            rec.push(t.value().to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Training set for a plot: uniform or POF-Darts, by name.
pub fn plot_training_set(problem: &Problem, sampling: SamplingMethod, n: usize, seed: u64) -> Result<TrainingSet> {
    match sampling {
        SamplingMethod::Uniform => uniform_sample(problem, n, seed),
        SamplingMethod::PofDarts => pof_darts(problem, n, &DartsConfig::default(), seed),
    }
}
