#![allow(dead_code)]

use poflab_core::rng::rng_from_seed;
use poflab_core::{Label, LabeledSample, SamplingMethod, TrainingSet};
use rand::Rng as _;

/// Training set from raw points and labels; responses are the label signs.
pub fn labelled_set(points: Vec<Vec<f64>>, labels: &[Label]) -> TrainingSet {
    let samples = points
        .into_iter()
        .zip(labels)
        .map(|(x, &label)| LabeledSample { grad: vec![0.0; x.len()], x, q: label.sign(), label, radius: 0.0 })
        .collect();
    TrainingSet { samples, problem: "synthetic".into(), seed: 0, method: SamplingMethod::Uniform, saturated: false }
}

/// `n` uniform points in `[0,1]^d` with random labels, both classes present.
pub fn random_instance(n: usize, d: usize, seed: u64) -> TrainingSet {
    let mut rng = rng_from_seed(seed);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let mut labels: Vec<Label> =
        (0..n).map(|_| if rng.random_bool(0.5) { Label::Failure } else { Label::Success }).collect();
    labels[0] = Label::Failure;
    labels[1] = Label::Success;
    labelled_set(points, &labels)
}
