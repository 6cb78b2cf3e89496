//! Probability-of-failure estimation with locally linear surrogate boundaries.
//!
//! The pipeline samples a computer model (uniformly or with POF-Darts),
//! extracts the Gabriel edited set of opposite-label neighbours, fits
//! cluster-wise linear SVMs around the characteristic boundary points, and
//! estimates the failure probability by Monte Carlo on the surrogate.

pub mod clustering;
pub mod error;
pub mod experiments;
pub mod estimator;
pub mod gabriel;
pub mod linalg;
pub mod models;
pub mod problems;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod svm;

pub use error::{PofError, Result};
pub use problems::{BoxDomain, Label, Model, Problem};
pub use sampling::{DartsConfig, LabeledSample, SamplingMethod, TrainingSet};
pub use gabriel::GabrielEditedSet;
pub use svm::LinearModel;
pub use models::{Classifier, Hyperparams, Method};
