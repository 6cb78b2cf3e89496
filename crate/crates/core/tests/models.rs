mod common;

use common::labelled_set;
use poflab_core::clustering::{cbp_knn_clusters, lloyd_kmeans, cluster_from_pairs};
use poflab_core::gabriel::gabriel_edited_set;
use poflab_core::linalg::{dot, norm};
use poflab_core::models::{
    accuracy_on, cross_validate, fit_cluster_models, labelled_test_set, stratified_folds, train, train_ppsvmg,
    train_psvmg, train_pujol, HyperGrid,
};
use poflab_core::sampling::{pof_darts, uniform_sample};
use poflab_core::svm::train_linear_svm;
use poflab_core::{Classifier, DartsConfig, Hyperparams, Label, Method, Problem};

#[test]
fn psvmg_rings_the_circle() {
    let p = Problem::by_name("circle").unwrap();
    let (tx, ty) = labelled_test_set(&p, 2000, 1000).unwrap();
    let mut total = 0.0;
    for seed in 0..20 {
        let ts = uniform_sample(&p, 500, seed).unwrap();
        // the box spans ten units, so a weak penalty underfits; the nearest model decides
        let ens = train_psvmg(&ts, 8, 10.0, 1, seed).unwrap();
        assert_eq!(ens.entries.len(), 8);
        // each cluster model classifies at least half of its own members
        for (entry, members) in ens.entries.iter().zip(&ens.members) {
            let hits = members.iter().filter(|&&i| entry.model.decision(ts.point(i)) == ts.label(i)).count();
            assert!(2 * hits >= members.len());
        }
        total += accuracy_on(&tx, &ty, |x| ens.predict(x));
    }
    assert!(total / 20.0 >= 0.9, "mean accuracy {}", total / 20.0);
}

#[test]
fn one_cluster_psvmg_is_a_single_svm() {
    let p = Problem::by_name("fn1").unwrap();
    let ts = uniform_sample(&p, 80, 3).unwrap();
    let ens = train_psvmg(&ts, 1, 1.0, 1, 0).unwrap();
    assert_eq!(ens.entries.len(), 1);
    let ges = gabriel_edited_set(&ts).unwrap();
    let mut members: Vec<usize> = ges.pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    members.sort_unstable();
    members.dedup();
    let pts: Vec<&[f64]> = members.iter().map(|&i| ts.point(i)).collect();
    let labels: Vec<Label> = members.iter().map(|&i| ts.label(i)).collect();
    let direct = train_linear_svm(&pts, &labels, 1.0).unwrap();
    assert_eq!(ens.entries[0].model.w, direct.w);
    assert_eq!(ens.entries[0].model.b, direct.b);
}

#[test]
fn unit_k_ppsvmg_is_one_svm_per_pair() {
    let p = Problem::by_name("fn2").unwrap();
    let ts = uniform_sample(&p, 60, 8).unwrap();
    let ges = gabriel_edited_set(&ts).unwrap();
    let ens = train_ppsvmg(&ts, 1, 1.0, 1.0, 0.0, 1).unwrap();
    assert_eq!(ens.entries.len(), ges.len());
    for (entry, &(i, j)) in ens.entries.iter().zip(&ges.pairs) {
        let direct = train_linear_svm(&[ts.point(i), ts.point(j)], &[ts.label(i), ts.label(j)], 1.0).unwrap();
        let dw: f64 = entry.model.w.iter().zip(&direct.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dw <= 1e-9 && (entry.model.b - direct.b).abs() <= 1e-9);
    }
}

#[test]
fn ensemble_size_never_exceeds_cbp_count() {
    let p = Problem::by_name("fn1").unwrap();
    let ts = pof_darts(&p, 150, &DartsConfig::default(), 2).unwrap();
    let ges = gabriel_edited_set(&ts).unwrap();
    for (k, s) in [(3, 0.4), (5, 0.7), (7, 1.0)] {
        let ens = train_ppsvmg(&ts, k, s, 1.0, 1.0, 3).unwrap();
        assert!(ens.entries.len() <= ges.len());
    }
}

#[test]
fn unpenalised_clusters_match_psvmg_models() {
    let p = Problem::by_name("fn1").unwrap();
    let ts = uniform_sample(&p, 200, 6).unwrap();
    let ges = gabriel_edited_set(&ts).unwrap();
    let km = lloyd_kmeans(&ges.cbps.iter().map(Vec::as_slice).collect::<Vec<_>>(), 6, 1, 300).unwrap();
    let clusters: Vec<_> = (0..6)
        .map(|c| cluster_from_pairs(&ges, (0..ges.len()).filter(|&q| km.assignments[q] == c).collect()))
        .collect();
    let (plain, _) = fit_cluster_models(&ts, &clusters, 1.0, None).unwrap();
    let (penalised, _) = fit_cluster_models(&ts, &clusters, 1.0, Some(0.0)).unwrap();
    for (a, b) in plain.iter().zip(&penalised) {
        assert_eq!(a.centroid, b.centroid);
        let dw: f64 = a.model.w.iter().zip(&b.model.w).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(dw <= 1e-9 && (a.model.b - b.model.b).abs() <= 1e-9);
    }
}

#[test]
fn penalisation_aligns_models_with_the_gradient() {
    let p = Problem::by_name("brusselator2d").unwrap();
    let ts = pof_darts(&p, 300, &DartsConfig::default(), 4).unwrap();
    let alignment = |kappa: f64| {
        let ens = train_ppsvmg(&ts, 3, 1.0, 1.0, kappa, 1).unwrap();
        let cos: Vec<f64> = ens
            .entries
            .iter()
            .filter_map(|e| e.model.qbar.as_ref().map(|q| (dot(&e.model.w, q) / norm(&e.model.w)).abs()))
            .collect();
        cos.iter().sum::<f64>() / cos.len() as f64
    };
    let (plain, rotated) = (alignment(0.0), alignment(10.0));
    assert!(rotated > plain, "{rotated} <= {plain}");
}

#[test]
fn penalisation_does_not_hurt_on_the_brusselator_slice() {
    let p = Problem::by_name("brusselator2d").unwrap();
    let (tx, ty) = labelled_test_set(&p, 2000, 77).unwrap();
    let (mut penalised, mut plain) = (0.0, 0.0);
    for seed in 0..20 {
        let ts = pof_darts(&p, 500, &DartsConfig::default(), seed).unwrap();
        let a = train_ppsvmg(&ts, 3, 0.4, 1.0, 10.0, 3).unwrap();
        let b = train_ppsvmg(&ts, 3, 1.0, 1.0, 0.0, 3).unwrap();
        penalised += accuracy_on(&tx, &ty, |x| a.predict(x));
        plain += accuracy_on(&tx, &ty, |x| b.predict(x));
    }
    assert!(penalised / 20.0 >= plain / 20.0 - 0.02, "{} vs {}", penalised / 20.0, plain / 20.0);
}

#[test]
fn pujol_satisfies_its_normal_equations() {
    let p = Problem::by_name("fn1").unwrap();
    for (seed, lambda) in [(1, 0.1), (2, 1.0), (3, 10.0)] {
        let ts = uniform_sample(&p, 120, seed).unwrap();
        let m = train_pujol(&ts, lambda).unwrap();
        let np = m.omega.len();
        let sigma: Vec<Vec<f64>> = (0..ts.len()).map(|l| (0..np).map(|q| m.sigma(q, ts.point(l))).collect()).collect();
        let l2 = lambda * lambda;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for a in 0..np {
            let mut lhs = l2 * m.omega[a];
            let mut rhs = l2 / np as f64;
            for (row, s) in sigma.iter().zip(&ts.samples) {
                lhs += row[a] * row.iter().zip(&m.omega).map(|(u, w)| u * w).sum::<f64>();
                rhs += row[a] * s.label.sign();
            }
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(rhs.abs());
        }
        assert!(worst <= 1e-8 * scale, "residual {worst}");
    }
}

#[test]
fn pujol_orientation_and_strong_prior() {
    let ts = labelled_set(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], &[Label::Failure, Label::Success]);
    let m = train_pujol(&ts, 1e6).unwrap();
    assert!((m.omega[0] - 1.0).abs() < 1e-9);
    assert_eq!(m.sigma(0, &[1.0, 0.0]), 1.0);
    assert_eq!(m.sigma(0, &[-1.0, 0.0]), -1.0);
    let c = Classifier::Pujol(m);
    assert_eq!(c.predict(&[0.5, 3.0]), Label::Failure);
    assert_eq!(c.predict(&[-0.5, 3.0]), Label::Success);
}

#[test]
fn pujol_fits_fn1_training_data() {
    let p = Problem::by_name("fn1").unwrap();
    let mut total = 0.0;
    for seed in 0..20 {
        let ts = uniform_sample(&p, 200, seed).unwrap();
        let m = Classifier::Pujol(train_pujol(&ts, 1.0).unwrap());
        total += ts.samples.iter().filter(|s| m.predict(&s.x) == s.label).count() as f64 / 200.0;
    }
    assert!(total / 20.0 >= 0.8, "{}", total / 20.0);
}

#[test]
fn neighbour_baselines_on_fn1() {
    let p = Problem::by_name("fn1").unwrap();
    let (tx, ty) = labelled_test_set(&p, 2000, 5).unwrap();
    let (mut svm_knn, mut knn) = (0.0, 0.0);
    for seed in 0..20 {
        let ts = pof_darts(&p, 200, &DartsConfig::default(), seed).unwrap();
        let a = train(Method::SvmKnn, &ts, &Hyperparams { knn_k: 20, beta: 10.0, ..Default::default() }, 0).unwrap();
        let b = train(Method::Knn, &ts, &Hyperparams::default(), 0).unwrap();
        svm_knn += accuracy_on(&tx, &ty, |x| a.predict(x));
        knn += accuracy_on(&tx, &ty, |x| b.predict(x));
    }
    assert!(svm_knn / 20.0 >= 0.85, "svm-knn {}", svm_knn / 20.0);
    assert!(knn / 20.0 >= 0.8, "knn {}", knn / 20.0);
}

#[test]
fn neighbourhoods_of_every_point() {
    let p = Problem::by_name("fn2").unwrap();
    let ts = uniform_sample(&p, 40, 1).unwrap();
    let k1 = train(Method::Knn, &ts, &Hyperparams { knn_k: 1, ..Default::default() }, 0).unwrap();
    for s in &ts.samples {
        assert_eq!(k1.predict(&s.x), s.label);
    }
    let majority = Label::from_score(ts.labels().iter().map(|l| l.sign()).sum());
    let all = train(Method::Knn, &ts, &Hyperparams { knn_k: 40, ..Default::default() }, 0).unwrap();
    assert_eq!(all.predict(&[0.3, -0.2]), majority);
    // the whole set as neighbourhood is the global linear SVM
    let global = train_linear_svm(&ts.points(), &ts.labels(), 2.0).unwrap();
    let svm_all = train(Method::SvmKnn, &ts, &Hyperparams { knn_k: 40, beta: 2.0, ..Default::default() }, 0).unwrap();
    for x in [[0.1, 0.9], [-0.7, -0.3], [0.5, 0.0]] {
        assert_eq!(svm_all.predict(&x), global.decision(&x));
    }
}

#[test]
fn classifiers_round_trip_through_json() {
    let p = Problem::by_name("fn1").unwrap();
    let ts = pof_darts(&p, 80, &DartsConfig::default(), 9).unwrap();
    let (tx, _) = labelled_test_set(&p, 200, 9).unwrap();
    for method in Method::ALL {
        let c = train(method, &ts, &Hyperparams { k_clusters: 3, ..Default::default() }, 4).unwrap();
        let back = Classifier::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.method(), method);
        // every float survives the text form bit for bit
        assert_eq!(back.to_json().unwrap(), c.to_json().unwrap(), "{method}");
        for x in &tx {
            assert_eq!(back.predict(x), c.predict(x), "{method}");
        }
        // retraining the same inputs gives the same document
        let again = train(method, &ts, &Hyperparams { k_clusters: 3, ..Default::default() }, 4).unwrap();
        assert_eq!(again.to_json().unwrap(), c.to_json().unwrap());
    }
}

#[test]
fn stratified_folds_partition_and_balance() {
    let labels: Vec<Label> = (0..53).map(|i| if i % 3 == 0 { Label::Failure } else { Label::Success }).collect();
    let folds = stratified_folds(&labels, 5, 11);
    assert_eq!(folds.len(), labels.len());
    let failures = labels.iter().filter(|l| **l == Label::Failure).count();
    for f in 0..5 {
        let idx: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == f).collect();
        let fail = idx.iter().filter(|&&i| labels[i] == Label::Failure).count();
        assert!((fail as f64 - failures as f64 / 5.0).abs() <= 1.0);
        assert!((idx.len() as f64 - 53.0 / 5.0).abs() <= 1.0);
    }
}

#[test]
fn cross_validation_is_deterministic() {
    let p = Problem::by_name("fn1").unwrap();
    let ts = pof_darts(&p, 100, &DartsConfig::default(), 21).unwrap();
    let a = cross_validate(&ts, Method::Ppsvmg, &HyperGrid::default(), 10, 5).unwrap();
    let b = cross_validate(&ts, Method::Ppsvmg, &HyperGrid::default(), 10, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.grid.len(), 243);
    assert!(a.scores.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn cross_validation_edge_cases() {
    let p = Problem::by_name("fn2").unwrap();
    let ts = uniform_sample(&p, 60, 2).unwrap();
    let hp = Hyperparams { knn_k: 3, ..Default::default() };
    let single = cross_validate(&ts, Method::Knn, &HyperGrid::fixed(&hp), 5, 0).unwrap();
    assert_eq!(single.best, hp);
    // a neighbourhood spanning the whole set predicts one constant label
    let grid = HyperGrid { knn_k: vec![60, 1], ..HyperGrid::default() };
    let cv = cross_validate(&ts, Method::Knn, &grid, 5, 0).unwrap();
    assert_eq!(cv.best.knn_k, 1);
    assert!(cross_validate(&ts, Method::Knn, &grid, 1, 0).is_err());
    assert!(cross_validate(&ts.subset(&[0, 1, 2]), Method::Knn, &grid, 5, 0).is_err());
}

#[test]
fn knn_clusters_feed_penalised_models() {
    // every K-nearest cluster trains, so the ensemble keeps one entry per surviving cluster
    let p = Problem::by_name("fn2").unwrap();
    let ts = pof_darts(&p, 120, &DartsConfig::default(), 13).unwrap();
    let ges = gabriel_edited_set(&ts).unwrap();
    let clusters = cbp_knn_clusters(&ges, 3).unwrap();
    let (entries, members) = fit_cluster_models(&ts, &clusters, 1.0, Some(1.0)).unwrap();
    assert_eq!(entries.len(), members.len());
    assert!(entries.iter().all(|e| e.model.theta.is_none_or(|t| (0.0..=1.0).contains(&t))));
}
