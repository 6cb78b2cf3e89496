//! Computer models `Q : Λ -> R` with thresholds and gradients.
//!
//! A point is a failure (`Label::Failure`, encoded `+1`) when `Q(x) >= q0` and a
//! success (`-1`) otherwise.

pub mod brusselator;
pub mod elliptic;
pub mod lotka;
mod ode;

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{PofError, Result};
use crate::rng::Rng;

pub use brusselator::solve_brusselator;
pub use elliptic::solve_elliptic;
pub use lotka::solve_lotka;

/// Binary classification label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Success,
    Failure,
}

impl Label {
    pub fn from_response(q: f64, q0: f64) -> Self {
        if q >= q0 {
            Label::Failure
        } else {
            Label::Success
        }
    }

    /// `>= 0` maps to `Failure`.
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Failure
        } else {
            Label::Success
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Failure => 1.0,
            Label::Success => -1.0,
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Label::Failure => 1,
            Label::Success => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Failure => Label::Success,
            Label::Success => Label::Failure,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        l.value()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Label::Failure),
            -1 => Ok(Label::Success),
            other => Err(format!("label must be +1 or -1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Axis-aligned box `Π [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    bounds: Vec<(f64, f64)>,
}

impl BoxDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(PofError::invalid("domain needs at least one dimension"));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(PofError::invalid("every domain axis needs finite lo < hi"));
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    pub fn diagonal(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).sum::<f64>().sqrt()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| hi - lo).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| {
                let slack = 1e-12 * (hi - lo);
                v >= lo - slack && v <= hi + slack
            })
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }
}

/// Time grid and states of an integrated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// The model behind a problem, with its solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// `(x2 - 0.5 (tanh(20 x1) tanh(20 (x1 - 0.5)) + 1) exp(0.2 x1^2))^2`
    ComposedOne,
    /// `1 + tanh(10 (x2 - 10 x1 (x1 - 0.5)(x1 + 0.5)))`
    ComposedTwo,
    /// Brusselator time average; `fixed_x3` turns it into a 2-d slice.
    Brusselator { t_end: f64, n_steps: usize, fixed_x3: Option<f64> },
    Elliptic { n_grid: usize },
    Lotka { n_steps: usize },
    /// `r^2 - |x - c|^2`; positive (failure) inside the circle.
    Circle { center: [f64; 2], radius: f64 },
    /// `+1` when `x1 > 5`, `-1` otherwise.
    LinearSplit,
    /// Piecewise-constant oscillatory partition of `[0,10]^2`.
    Oscillatory,
    /// Two-arm spiral; `Q` is the distance to the negative arm minus the distance to the positive arm.
    Spiral { a: f64, b1: f64, b2: f64, c: f64 },
}

/// A named computer model with its domain and threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain: BoxDomain,
    pub q0: f64,
    pub model: Model,
}

/// Names accepted by [`Problem::by_name`].
pub const PROBLEM_NAMES: &[&str] = &[
    "fn1",
    "fn2",
    "brusselator2d",
    "brusselator3d",
    "elliptic",
    "lotka",
    "circle",
    "linear",
    "oscillatory",
    "spiral",
];

impl Problem {
    pub fn new(name: impl Into<String>, domain: BoxDomain, q0: f64, model: Model) -> Result<Self> {
        match &model {
            Model::Brusselator { n_steps, t_end, .. } if *n_steps == 0 || !(*t_end > 0.0) => {
                return Err(PofError::invalid("Brusselator needs positive steps and final time"))
            }
            Model::Elliptic { n_grid } if *n_grid < 3 => return Err(PofError::invalid("elliptic grid needs n >= 3")),
            Model::Lotka { n_steps } if *n_steps == 0 => return Err(PofError::invalid("Lotka needs positive steps")),
            _ => {}
        }
        Ok(Self { name: name.into(), domain, q0, model })
    }

    /// Registry of the built-in problems with their default thresholds and solver settings.
    pub fn by_name(name: &str) -> Result<Self> {
        let b = |v: &[(f64, f64)]| BoxDomain::new(v.to_vec()).expect("static domain");
        let p = match name {
            "fn1" => Problem::new(name, b(&[(0.0, 2.0), (0.0, 2.0)]), 0.5, Model::ComposedOne),
            "fn2" => Problem::new(name, b(&[(-1.0, 1.0), (-1.0, 1.0)]), 1.0, Model::ComposedTwo),
            "brusselator2d" => Problem::new(
                name,
                b(&[(0.7, 1.5), (2.75, 3.25)]),
                3.75,
                Model::Brusselator { t_end: 5.0, n_steps: 100, fixed_x3: Some(1.65) },
            ),
            "brusselator3d" => Problem::new(
                name,
                b(&[(0.7, 1.5), (2.75, 3.25), (1.0, 2.0)]),
                3.75,
                Model::Brusselator { t_end: 5.0, n_steps: 100, fixed_x3: None },
            ),
            "elliptic" => Problem::new(
                name,
                b(&[(1.0, 5.0), (0.1, 0.3), (0.0, 1.0), (0.0, 2.0)]),
                0.0,
                Model::Elliptic { n_grid: 100 },
            ),
            "lotka" => {
                let mut bounds = vec![(0.25, 0.75); 6];
                bounds.extend([(0.1, 2.0); 3]);
                Problem::new(name, b(&bounds), 0.8, Model::Lotka { n_steps: 1000 })
            }
            "circle" => Problem::new(
                name,
                b(&[(0.0, 10.0), (0.0, 10.0)]),
                0.0,
                Model::Circle { center: [5.0, 5.0], radius: 3.0 },
            ),
            "linear" => Problem::new(name, b(&[(0.0, 10.0), (0.0, 10.0)]), 0.0, Model::LinearSplit),
            "oscillatory" => Problem::new(name, b(&[(0.0, 10.0), (0.0, 10.0)]), 0.0, Model::Oscillatory),
            "spiral" => Problem::new(
                name,
                b(&[(-8.0, 8.0), (-8.0, 8.0)]),
                0.0,
                Model::Spiral { a: 1.0, b1: 0.5, b2: 0.5, c: 1.0 },
            ),
            other => return Err(PofError::Unknown { kind: "problem", name: other.to_string() }),
        }?;
        Ok(p)
    }

    /// Replace the step/grid count of the model's solver.
    pub fn with_resolution(mut self, n: usize) -> Result<Self> {
        match &mut self.model {
            Model::Brusselator { n_steps, .. } | Model::Lotka { n_steps } => *n_steps = n,
            Model::Elliptic { n_grid } => *n_grid = n,
            _ => return Ok(self),
        }
        let Problem { name, domain, q0, model } = self;
        Problem::new(name, domain, q0, model)
    }

    pub fn with_threshold(mut self, q0: f64) -> Self {
        self.q0 = q0;
        self
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(PofError::OutsideDomain { point: x.to_vec() })
        }
    }

    /// `Q(x)`.
    pub fn eval_q(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let q = self.raw_q(x)?;
        if !q.is_finite() {
            return Err(PofError::numerical(format!("non-finite response at {x:?}")));
        }
        Ok(q)
    }

    /// `∇Q(x)`: analytic for closed-form models, forward sensitivities for
    /// differential-equation models.
    pub fn eval_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval_q_and_grad(x)?.1)
    }

    /// `Q(x)` and `∇Q(x)` from one solve.
    pub fn eval_q_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let (q, g) = match &self.model {
            Model::ComposedOne => composed_one_with_grad(x),
            Model::ComposedTwo => composed_two_with_grad(x),
            Model::Brusselator { t_end, n_steps, fixed_x3 } => {
                let full = brusselator_point(x, *fixed_x3);
                let (q, g) = brusselator::response_and_gradient(&full, *t_end, *n_steps)?;
                (q, g[..self.dim()].to_vec())
            }
            Model::Elliptic { n_grid } => {
                let (q, g) = elliptic::response_and_gradient(x, *n_grid)?;
                (q, g.to_vec())
            }
            Model::Lotka { n_steps } => {
                let (q, g) = lotka::response_and_gradient(x, *n_steps)?;
                (q, g.to_vec())
            }
            Model::Circle { center, .. } => {
                let q = self.raw_q(x)?;
                (q, vec![-2.0 * (x[0] - center[0]), -2.0 * (x[1] - center[1])])
            }
            Model::LinearSplit | Model::Oscillatory => (self.raw_q(x)?, vec![0.0; self.dim()]),
            Model::Spiral { .. } => (self.raw_q(x)?, self.fd_gradient(x)?),
        };
        if !q.is_finite() || !g.iter().all(|v| v.is_finite()) {
            return Err(PofError::numerical(format!("non-finite response or gradient at {x:?}")));
        }
        Ok((q, g))
    }

    /// Central finite differences with step `1e-5 * (hi - lo)` per axis.
    pub fn eval_grad_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        self.fd_gradient(x)
    }

    fn fd_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let widths = self.domain.widths();
        let mut probe = x.to_vec();
        let mut grad = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let h = 1e-5 * widths[k];
            probe[k] = x[k] + h;
            let up = self.raw_q(&probe)?;
            probe[k] = x[k] - h;
            let down = self.raw_q(&probe)?;
            probe[k] = x[k];
            grad.push((up - down) / (2.0 * h));
        }
        Ok(grad)
    }

    /// `+1` (failure) when `Q(x) >= q0`.
    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_response(self.eval_q(x)?, self.q0))
    }

    fn raw_q(&self, x: &[f64]) -> Result<f64> {
        Ok(match &self.model {
            Model::ComposedOne => composed_one(x),
            Model::ComposedTwo => composed_two(x),
            Model::Brusselator { t_end, n_steps, fixed_x3 } => {
                let full = brusselator_point(x, *fixed_x3);
                brusselator::time_average(&solve_brusselator(&full, *t_end, *n_steps)?)
            }
            Model::Elliptic { n_grid } => solve_elliptic(x, *n_grid)?,
            Model::Lotka { n_steps } => solve_lotka(x, *n_steps)?,
            Model::Circle { center, radius } => {
                radius * radius - (x[0] - center[0]).powi(2) - (x[1] - center[1]).powi(2)
            }
            Model::LinearSplit => {
                if x[0] <= 5.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            Model::Oscillatory => {
                let (x1, x2) = (x[0], x[1]);
                // transcribed literally; the second clause reduces to x1 >= 6 && x2 >= 2
                #[allow(clippy::nonminimal_bool)]
                let hit = (x1 <= 2.0 || x1 >= 8.0 || x2 >= 8.0) || (x1 >= 4.0 && x1 >= 6.0 && x2 >= 2.0);
                if hit {
                    1.0
                } else {
                    -1.0
                }
            }
            Model::Spiral { a, b1, b2, c } => spiral_response(x, *a, *b1, *b2, *c),
        })
    }
}

fn brusselator_point(x: &[f64], fixed_x3: Option<f64>) -> [f64; 3] {
    match fixed_x3 {
        Some(x3) => [x[0], x[1], x3],
        None => [x[0], x[1], x[2]],
    }
}

fn sech2(u: f64) -> f64 {
    let c = u.cosh();
    1.0 / (c * c)
}

fn composed_one_profile(x1: f64) -> (f64, f64) {
    let (ta, tb) = ((20.0 * x1).tanh(), (20.0 * (x1 - 0.5)).tanh());
    let e = (0.2 * x1 * x1).exp();
    let g = 0.5 * (ta * tb + 1.0) * e;
    let dprod = 20.0 * sech2(20.0 * x1) * tb + ta * 20.0 * sech2(20.0 * (x1 - 0.5));
    let dg = 0.5 * (dprod * e + (ta * tb + 1.0) * e * 0.4 * x1);
    (g, dg)
}

fn composed_one(x: &[f64]) -> f64 {
    let (g, _) = composed_one_profile(x[0]);
    (x[1] - g).powi(2)
}

fn composed_one_with_grad(x: &[f64]) -> (f64, Vec<f64>) {
    let (g, dg) = composed_one_profile(x[0]);
    let r = x[1] - g;
    (r * r, vec![-2.0 * r * dg, 2.0 * r])
}

fn composed_two_arg(x: &[f64]) -> f64 {
    10.0 * (x[1] - 10.0 * x[0] * (x[0] - 0.5) * (x[0] + 0.5))
}

fn composed_two(x: &[f64]) -> f64 {
    1.0 + composed_two_arg(x).tanh()
}

fn composed_two_with_grad(x: &[f64]) -> (f64, Vec<f64>) {
    let u = composed_two_arg(x);
    let s = sech2(u);
    let dcubic = 10.0 * (3.0 * x[0] * x[0] - 0.25);
    (1.0 + u.tanh(), vec![s * 10.0 * (-dcubic), 10.0 * s])
}

fn spiral_response(x: &[f64], a: f64, b1: f64, b2: f64, c: f64) -> f64 {
    const SAMPLES: usize = 2000;
    let shift = [(b1 - 0.5) * c / 2.0, -0.75 + (b2 - 0.5) * c / 2.0];
    let mut best = [f64::INFINITY; 2];
    for k in 0..=SAMPLES {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / SAMPLES as f64;
        let rad = (1.0 + theta).powf(a);
        for (arm, sign) in [1.0f64, -1.0].into_iter().enumerate() {
            let px = sign * rad * theta.cos() + shift[0];
            let py = sign * rad * theta.sin() + shift[1];
            let d = ((x[0] - px).powi(2) + (x[1] - py).powi(2)).sqrt();
            best[arm] = best[arm].min(d);
        }
    }
    best[1] - best[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> Problem {
        Problem::by_name(name).unwrap()
    }

    #[test]
    fn composed_one_at_origin() {
        assert_eq!(p("fn1").eval_q(&[0.0, 0.0]).unwrap(), 0.25);
        assert_eq!(p("fn1").classify(&[0.0, 0.0]).unwrap(), Label::Success);
    }

    #[test]
    fn composed_two_at_origin() {
        let prob = p("fn2");
        assert_eq!(prob.eval_q(&[0.0, 0.0]).unwrap(), 1.0);
        let g = prob.eval_grad(&[0.0, 0.0]).unwrap();
        assert!((g[0] - 25.0).abs() < 1e-12);
        assert!((g[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_equality_is_failure() {
        assert_eq!(Label::from_response(1.0, 1.0), Label::Failure);
        // fn2 at the origin sits exactly on q0 = 1
        assert_eq!(p("fn2").classify(&[0.0, 0.0]).unwrap(), Label::Failure);
    }

    #[test]
    fn outside_domain_is_rejected() {
        assert!(matches!(p("fn1").eval_q(&[2.5, 0.0]), Err(PofError::OutsideDomain { .. })));
        assert!(p("fn1").eval_q(&[0.0]).is_err());
    }

    #[test]
    fn registry_knows_every_name() {
        for name in PROBLEM_NAMES {
            let prob = p(name);
            assert_eq!(prob.name, *name);
            let c = prob.domain.center();
            assert!(prob.eval_q(&c).unwrap().is_finite());
        }
        assert!(Problem::by_name("nope").is_err());
    }

    #[test]
    fn eval_is_deterministic() {
        let prob = p("brusselator3d");
        let x = [1.1, 3.0, 1.5];
        assert_eq!(prob.eval_q(&x).unwrap().to_bits(), prob.eval_q(&x).unwrap().to_bits());
    }

    #[test]
    fn invalid_domains() {
        assert!(BoxDomain::new(vec![]).is_err());
        assert!(BoxDomain::new(vec![(1.0, 1.0)]).is_err());
        assert!(BoxDomain::new(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap().volume() == 1.0);
    }

    #[test]
    fn oscillatory_literal_partition() {
        let prob = p("oscillatory");
        assert_eq!(prob.classify(&[1.0, 5.0]).unwrap(), Label::Failure);
        assert_eq!(prob.classify(&[5.0, 5.0]).unwrap(), Label::Success);
        assert_eq!(prob.classify(&[7.0, 3.0]).unwrap(), Label::Failure);
    }

    #[test]
    fn with_resolution_validates() {
        assert!(p("elliptic").with_resolution(2).is_err());
        assert!(p("brusselator3d").with_resolution(0).is_err());
        assert!(p("fn1").with_resolution(0).is_ok());
    }
}
