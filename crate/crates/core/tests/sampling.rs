use poflab_core::linalg::{dist, norm};
use poflab_core::rng::rng_from_seed;
use poflab_core::sampling::{one_d_dart, pof_darts, uniform_sample, Sphere};
use poflab_core::{BoxDomain, DartsConfig, Label, Problem, TrainingSet};
use proptest::prelude::*;
use rand::Rng as _;

/// Kolmogorov-Smirnov statistic of `xs` against a continuous CDF.
fn ks_one_sample(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn one_d_dart_is_uniform_on_the_leftover_set() {
    let domain = BoxDomain::new(vec![(0.0, 10.0)]).unwrap();
    let centre = [5.0];
    let spheres: Vec<Sphere<'_>> = vec![(&centre, 2.0)];
    let mut rng = rng_from_seed(2024);
    let n = 10_000;
    let mut darts: Vec<f64> = (0..n).map(|_| one_d_dart(&spheres, &domain, &mut rng, 10).unwrap()[0]).collect();
    assert!(darts.iter().all(|&x| (0.0..=3.0).contains(&x) || (7.0..=10.0).contains(&x)));

    // rejection-sampling oracle: uniform draws on [0, 10] kept outside the sphere
    let mut oracle_rng = rng_from_seed(77);
    let mut oracle = Vec::with_capacity(n);
    while oracle.len() < n {
        let x: f64 = oracle_rng.random_range(0.0..10.0);
        if (x - 5.0).abs() >= 2.0 {
            oracle.push(x);
        }
    }
    let crit_two = 1.628 * ((2 * n) as f64 / (n * n) as f64).sqrt();
    let d2 = ks_two_sample(&mut darts.clone(), &mut oracle);
    assert!(d2 < crit_two, "two-sample KS {d2} >= {crit_two}");

    let cdf = |x: f64| {
        if x < 3.0 {
            x / 6.0
        } else if x < 7.0 {
            0.5
        } else {
            0.5 + (x - 7.0) / 6.0
        }
    };
    let crit_one = 1.628 / (n as f64).sqrt();
    let d1 = ks_one_sample(&mut darts, cdf);
    assert!(d1 < crit_one, "one-sample KS {d1} >= {crit_one}");
}

fn boundary_distance(p: &Problem, s: &poflab_core::LabeledSample) -> f64 {
    (s.q - p.q0).abs() / norm(&s.grad).max(1e-12)
}

#[test]
fn darts_concentrate_near_the_boundary() {
    let p = Problem::by_name("fn1").unwrap();
    let cfg = DartsConfig::default();
    let near = |ts: &TrainingSet| {
        ts.samples.iter().filter(|s| boundary_distance(&p, s) < 0.1).count() as f64 / ts.len() as f64
    };
    let (mut darts, mut uniform) = (0.0, 0.0);
    for seed in 0..20 {
        darts += near(&pof_darts(&p, 200, &cfg, seed).unwrap());
        uniform += near(&uniform_sample(&p, 200, seed).unwrap());
    }
    assert!(darts > uniform, "darts {darts} vs uniform {uniform}");
}

#[test]
fn uniform_sampling_matches_published_fn1_probability() {
    let p = Problem::by_name("fn1").unwrap();
    let ts = uniform_sample(&p, 5000, 3).unwrap();
    let frac = ts.count(Label::Failure) as f64 / 5000.0;
    assert!((frac - 0.4562).abs() <= 3.0 * 0.00664, "{frac}");
}

#[test]
fn single_point_on_unit_interval() {
    let domain = BoxDomain::new(vec![(0.0, 1.0)]).unwrap();
    let p = Problem::new("unit", domain, 0.0, poflab_core::Model::LinearSplit).unwrap();
    let ts = uniform_sample(&p, 1, 0).unwrap();
    assert!((0.0..=1.0).contains(&ts.samples[0].x[0]));
    assert_eq!(ts.samples[0].radius, 0.0);
}

#[test]
fn saturation_returns_partial_set() {
    // huge radii: the first spheres cover the box
    let p = Problem::by_name("circle").unwrap();
    let cfg = DartsConfig { n_initial: 2, scale_l: 1.0, grad_floor: 1e-9, max_misses: 20 };
    let ts = pof_darts(&p.with_threshold(-1e6), 50, &cfg, 1).unwrap();
    assert!(ts.saturated);
    assert!(ts.len() < 50);
}

fn check_darts_invariants(ts: &TrainingSet, p: &Problem) {
    for (i, a) in ts.samples.iter().enumerate() {
        assert!(a.radius >= 0.0);
        assert!(p.domain.contains(&a.x));
        assert_eq!(a.label, Label::from_response(a.q, p.q0));
        for b in &ts.samples[i + 1..] {
            if a.label != b.label {
                assert!(a.radius + b.radius <= dist(&a.x, &b.x) + 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn darts_keep_opposite_spheres_apart(seed in any::<u64>(), which in 0usize..4, m in 12usize..80) {
        let name = ["fn1", "fn2", "circle", "brusselator2d"][which];
        let p = Problem::by_name(name).unwrap();
        let ts = pof_darts(&p, m, &DartsConfig::default(), seed).unwrap();
        check_darts_invariants(&ts, &p);
    }

    #[test]
    fn darts_are_deterministic(seed in any::<u64>()) {
        let p = Problem::by_name("fn2").unwrap();
        let a = pof_darts(&p, 40, &DartsConfig::default(), seed).unwrap();
        let b = pof_darts(&p, 40, &DartsConfig::default(), seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dart_lands_outside_every_sphere(
        seed in any::<u64>(),
        spheres in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..3.0), 0..15),
    ) {
        let domain = BoxDomain::new(vec![(0.0, 10.0), (0.0, 10.0)]).unwrap();
        let centres: Vec<[f64; 2]> = spheres.iter().map(|s| [s.0, s.1]).collect();
        let list: Vec<Sphere<'_>> = centres.iter().zip(&spheres).map(|(c, s)| (c.as_slice(), s.2)).collect();
        let mut rng = rng_from_seed(seed);
        if let Some(x) = one_d_dart(&list, &domain, &mut rng, 100) {
            prop_assert!(domain.contains(&x));
            for (c, r) in &list {
                prop_assert!(dist(c, &x) >= r - 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>(), n in 1usize..30) {
        let p = Problem::by_name("fn1").unwrap();
        let ts = uniform_sample(&p, n, seed).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let back = TrainingSet::read_csv(buf.as_slice(), "fn1").unwrap();
        prop_assert_eq!(back.samples, ts.samples);
    }
}
