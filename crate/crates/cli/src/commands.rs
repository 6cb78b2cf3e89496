use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use poflab_core::estimator::{direct_mc_pof, surrogate_mc_pof};
use poflab_core::experiments::{
    append_results, read_results, run_benchmark, run_convergence, run_lotka, summarize, test_seed, write_convergence,
    write_decision_grid, write_lotka_summary, write_summary, BenchmarkConfig, ConvergenceConfig, LotkaConfig, ResultRow,
    RESULTS_SCHEMA_VERSION,
};
use poflab_core::gabriel::{gabriel_edited_set, gabriel_edited_set_scaled, max_pair_distance};
use poflab_core::models::{accuracy_on, cross_validate, labelled_test_set, HyperGrid, Hyperparams};
use poflab_core::sampling::{pof_darts, uniform_sample};
use poflab_core::{Classifier, DartsConfig, Label, PofError, Problem, Result, SamplingMethod, TrainingSet};
use serde::de::DeserializeOwned;

use crate::{BenchmarkArgs, ConvergenceArgs, EstimateArgs, HyperArgs, LotkaArgs, PlotData, SampleArgs, TrainArgs};

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn load_config<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    path.as_deref().map_or_else(|| Ok(T::default()), load_json)
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let problem = Problem::by_name(&a.problem)?;
    let defaults = DartsConfig::default();
    let cfg = DartsConfig {
        n_initial: a.init.unwrap_or(defaults.n_initial),
        scale_l: a.scale_l.unwrap_or(defaults.scale_l),
        grad_floor: a.grad_floor.unwrap_or(defaults.grad_floor),
        max_misses: a.max_misses.unwrap_or(defaults.max_misses),
    };
    let ts = match a.method {
        SamplingMethod::Uniform => uniform_sample(&problem, a.n, a.seed)?,
        SamplingMethod::PofDarts => pof_darts(&problem, a.n, &cfg, a.seed)?,
    };
    ts.write_csv(output(&a.out)?)?;
    let mut echo = format!(
        "{} {} n={} failures={} successes={}",
        problem.name,
        a.method.as_str(),
        ts.len(),
        ts.count(Label::Failure),
        ts.count(Label::Success)
    );
    if ts.saturated {
        echo.push_str(" saturated");
    }
    if let Some(path) = &a.ges {
        let ges = if a.scaled { gabriel_edited_set_scaled(&ts, &problem.domain)? } else { gabriel_edited_set(&ts)? };
        ges.save_csv(path)?;
        echo.push_str(&format!(" pairs={} M_n={}", ges.len(), max_pair_distance(&ges, &ts)?));
    }
    eprintln!("{echo}");
    Ok(())
}

fn pin<T: Copy>(axis: &mut Vec<T>, flag: Option<T>) {
    if let Some(v) = flag {
        *axis = vec![v];
    }
}

fn pinned_grid(mut grid: HyperGrid, h: &HyperArgs) -> HyperGrid {
    pin(&mut grid.beta, h.beta);
    pin(&mut grid.kappa, h.kappa);
    pin(&mut grid.big_k, h.big_k);
    pin(&mut grid.s, h.s);
    pin(&mut grid.m, h.m);
    pin(&mut grid.k_clusters, h.k_clusters);
    pin(&mut grid.lambda, h.lambda);
    pin(&mut grid.knn_k, h.knn_k);
    pin(&mut grid.gamma, h.gamma);
    grid
}

fn flagged_hyperparams(h: &HyperArgs) -> Hyperparams {
    let d = Hyperparams::default();
    Hyperparams {
        beta: h.beta.unwrap_or(d.beta),
        kappa: h.kappa.unwrap_or(d.kappa),
        big_k: h.big_k.unwrap_or(d.big_k),
        s: h.s.unwrap_or(d.s),
        m: h.m.unwrap_or(d.m),
        k_clusters: h.k_clusters.unwrap_or(d.k_clusters),
        lambda: h.lambda.unwrap_or(d.lambda),
        knn_k: h.knn_k.unwrap_or(d.knn_k),
        gamma: h.gamma.unwrap_or(d.gamma),
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let ts = TrainingSet::load_csv(&a.samples, &a.problem)?;
    ts.require_both_labels()?;
    let mut report = serde_json::json!({ "method": a.method, "n_train": ts.len() });
    let hp = if a.cv >= 2 {
        let grid = pinned_grid(load_config(&a.grid)?, &a.hyper);
        let cv = cross_validate(&ts, a.method, &grid, a.cv, a.seed)?;
        report["cv"] = serde_json::json!({
            "folds": cv.folds_used,
            "grid_points": cv.grid.len(),
            "best_index": cv.best_index,
            "best_score": cv.scores[cv.best_index],
        });
        cv.best
    } else {
        if a.grid.is_some() {
            return Err(PofError::InvalidArgument("--grid needs --cv of at least 2".into()));
        }
        flagged_hyperparams(&a.hyper)
    };
    let model = poflab_core::models::train(a.method, &ts, &hp, a.seed)?;
    std::fs::write(&a.out, model.to_json()?)?;
    report["hyperparams"] = serde_json::to_value(hp)?;
    if let Classifier::Ensemble(e) = &model {
        report["models"] = e.entries.len().into();
    }
    let training = ts.samples.iter().filter(|s| model.predict(&s.x) == s.label).count() as f64 / ts.len() as f64;
    report["training_accuracy"] = training.into();
    eprintln!("{}", serde_json::to_string(&report)?);
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

pub fn estimate(a: EstimateArgs) -> Result<()> {
    let problem = Problem::by_name(&a.problem)?;
    let mut row = ResultRow {
        schema_version: RESULTS_SCHEMA_VERSION,
        method: "direct".into(),
        problem: problem.name.clone(),
        sampling: SamplingMethod::Uniform.as_str().into(),
        n_train: a.n,
        rep: a.rep,
        seed: a.seed,
        accuracy: None,
        pof_estimate: None,
        n_model_evals: 0,
        wall_ms: 0,
        status: "ok".into(),
    };
    let est = match &a.model {
        None => direct_mc_pof(&problem, a.n, a.seed)?,
        Some(path) => {
            let model = Classifier::from_json(&std::fs::read_to_string(path)?)?;
            if a.test_size > 0 {
                let (x, y) = labelled_test_set(&problem, a.test_size, test_seed(a.seed))?;
                row.accuracy = Some(accuracy_on(&x, &y, |p| model.predict(p)));
            }
            row.method = model.method().to_string();
            row.sampling = "surrogate".into();
            row.n_train = a.n_train;
            surrogate_mc_pof(&model, &problem.domain, a.n, a.seed)?
        }
    };
    row.pof_estimate = Some(est.value);
    // a surrogate's cost is its training data: one response and one gradient per point
    row.n_model_evals = if a.model.is_some() { 2 * a.n_train } else { est.n_model_evals };
    println!("{}", serde_json::to_string(&est)?);
    if let Some(path) = &a.results {
        append_results(&[row], path)?;
    }
    Ok(())
}

pub fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut cfg: BenchmarkConfig = load_config(&a.config)?;
    if let Some(v) = a.problem {
        cfg.problem = v;
    }
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.sizes {
        cfg.sizes = v;
    }
    if let Some(v) = a.samplings {
        cfg.samplings = v;
    }
    cfg.reps = a.reps.unwrap_or(cfg.reps);
    cfg.test_size = a.test_size.unwrap_or(cfg.test_size);
    cfg.folds = a.folds.unwrap_or(cfg.folds);
    cfg.n_pred = a.n_pred.unwrap_or(cfg.n_pred);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.timing |= a.timing;
    let rows = run_benchmark(&cfg)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed; see the status column", rows.len());
    }
    append_results(&rows, &a.out)?;
    if let Some(path) = &a.summary {
        write_summary(&summarize(&rows), output(&Some(path.clone()))?)?;
    }
    eprintln!("{} rows, {failed} failed", rows.len());
    Ok(())
}

pub fn convergence(a: ConvergenceArgs) -> Result<()> {
    let mut cfg: ConvergenceConfig = load_config(&a.config)?;
    if let Some(v) = a.problem {
        cfg.problem = v;
    }
    if let Some(v) = a.sizes {
        cfg.sizes = v;
    }
    cfg.seeds = a.seeds.unwrap_or(cfg.seeds);
    cfg.probes = a.probes.unwrap_or(cfg.probes);
    cfg.sampling = a.sampling.unwrap_or(cfg.sampling);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    write_convergence(&run_convergence(&cfg)?, output(&a.out)?)
}

pub fn lotka(a: LotkaArgs) -> Result<()> {
    let mut cfg: LotkaConfig = load_config(&a.config)?;
    if let Some(v) = a.sizes {
        cfg.sizes = v;
    }
    cfg.reps = a.reps.unwrap_or(cfg.reps);
    cfg.folds = a.folds.unwrap_or(cfg.folds);
    cfg.n_pred = a.n_pred.unwrap_or(cfg.n_pred);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.timing |= a.timing;
    eprintln!("{}", serde_json::to_string(&cfg)?);
    let (rows, summaries) = run_lotka(&cfg)?;
    append_results(&rows, &a.out)?;
    if let Some(path) = &a.report {
        write_lotka_summary(&summaries, output(&Some(path.clone()))?)?;
    }
    for s in &summaries {
        eprintln!(
            "n={} ppsvmg={:.4} direct={:.4} ci=[{:.4}, {:.4}] welch_p={:.3e} variance_p={:.3e}",
            s.n, s.ppsvmg_mean, s.direct_mean, s.ci_lo, s.ci_hi, s.welch_p, s.variance_p
        );
    }
    Ok(())
}

pub fn plot_data(a: PlotData) -> Result<()> {
    match a {
        PlotData::Grid { model, problem, axes, resolution, truth, out } => {
            let problem = Problem::by_name(&problem)?;
            let classifier = Classifier::from_json(&std::fs::read_to_string(model)?)?;
            let [x, y] = axes[..] else {
                return Err(PofError::InvalidArgument(format!("--axes takes two indices, got {}", axes.len())));
            };
            if x == 0 || y == 0 {
                return Err(PofError::InvalidArgument("--axes are one-based".into()));
            }
            write_decision_grid(&classifier, &problem, (x - 1, y - 1), resolution, truth, output(&out)?)
        }
        PlotData::Ges { samples, scaled_by, out } => {
            let ts = TrainingSet::load_csv(samples, "unknown")?;
            let ges = match scaled_by {
                Some(name) => gabriel_edited_set_scaled(&ts, &Problem::by_name(&name)?.domain)?,
                None => gabriel_edited_set(&ts)?,
            };
            ges.write_csv(output(&out)?)
        }
        PlotData::Summary { results, out } => {
            let rows = read_results(File::open(results)?)?;
            write_summary(&summarize(&rows), output(&out)?)
        }
    }
}
