//! Soft-margin linear SVMs and the gradient-penalised rotated SVM.
//!
//! The plain SVM solves the dual
//! `min ½ αᵀQα − Σα` s.t. `0 ≤ α ≤ β`, `Σ α_j y_j = 0`, `Q_ij = y_i y_j x_iᵀx_j`
//! by SMO with second-order working-set selection.
//!
//! The penalised SVM then rotates the normal toward the cluster's mean unit
//! gradient `Q̄`: `w(θ) = θ w* + (1 − θ) w_Q` with `w_Q = (w*ᵀQ̄) Q̄` and θ from
//! the closed-form stationarity condition of the relaxed objective, clamped to
//! `[0, 1]`.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{PofError, Result};
use crate::linalg::{dot, norm};
use crate::problems::Label;

/// Solver tolerances.
pub const KKT_TOL: f64 = 1e-6;
const GAP_TARGET: f64 = 1e-6;
/// Tolerance audited on every trained model.
pub const GAP_AUDIT_TOL: f64 = 1e-5;
pub const FEASIBILITY_TOL: f64 = 1e-8;
const TAU: f64 = 1e-12;

/// Optimality report of one dual solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SvmDiagnostics {
    pub primal: f64,
    pub dual: f64,
    /// Maximal KKT violation `m(α) − M(α)`.
    pub kkt_residual: f64,
    /// `|Σ α_j y_j|`.
    pub equality_residual: f64,
    pub iterations: usize,
}

impl SvmDiagnostics {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }

    /// Dual feasibility and the relative primal-dual gap bound.
    pub fn within_bounds(&self) -> bool {
        self.equality_residual <= FEASIBILITY_TOL && self.gap() <= GAP_AUDIT_TOL * (1.0 + self.primal.abs())
    }
}

static TRAINED: AtomicUsize = AtomicUsize::new(0);
static VIOLATIONS: AtomicUsize = AtomicUsize::new(0);

/// Process-wide count of `(trained SVMs, SVMs violating feasibility or gap bounds)`.
pub fn audit() -> (usize, usize) {
    (TRAINED.load(Ordering::Relaxed), VIOLATIONS.load(Ordering::Relaxed))
}

/// A separating hyperplane `wᵀx + b`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qbar: Option<Vec<f64>>,
    pub beta: f64,
    #[serde(default)]
    pub kappa: f64,
    /// Dual coefficients, aligned with the training points.
    #[serde(skip)]
    pub alpha: Vec<f64>,
    /// Indices with `α_j > 0`.
    #[serde(skip)]
    pub support: Vec<usize>,
    #[serde(skip)]
    pub diagnostics: Option<SvmDiagnostics>,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    /// `+1` when `wᵀx + b ≥ 0`.
    pub fn decision(&self, x: &[f64]) -> Label {
        Label::from_score(self.score(x))
    }
}

fn check_inputs(points: &[&[f64]], labels: &[Label], beta: f64) -> Result<()> {
    if points.len() != labels.len() {
        return Err(PofError::invalid("points and labels differ in length"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(PofError::invalid("beta must be positive"));
    }
    let pos = labels.iter().filter(|l| **l == Label::Failure).count();
    if pos == 0 || pos == labels.len() {
        return Err(PofError::DegenerateLabels);
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(PofError::invalid("points differ in dimension"));
    }
    Ok(())
}

fn weight(points: &[&[f64]], y: &[f64], alpha: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; points[0].len()];
    for ((p, yi), a) in points.iter().zip(y).zip(alpha) {
        if *a != 0.0 {
            for (wk, xk) in w.iter_mut().zip(p.iter()) {
                *wk += a * yi * xk;
            }
        }
    }
    w
}

/// Bias from free support vectors; without any, the midpoint of the feasible range.
fn free_vector_bias(points: &[&[f64]], y: &[f64], alpha: &[f64], w: &[f64], beta: f64) -> f64 {
    let bound = |a: f64| a >= beta * (1.0 - 1e-12);
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for ((p, &yi), &a) in points.iter().zip(y).zip(alpha) {
        let r = yi - dot(w, p);
        if a > 0.0 && !bound(a) {
            sum += r;
            count += 1;
        } else if (yi > 0.0) == (a == 0.0) {
            lower = lower.max(r);
        } else {
            upper = upper.min(r);
        }
    }
    if count > 0 {
        sum / count as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else {
        upper
    }
}

fn primal_objective(points: &[&[f64]], y: &[f64], w: &[f64], b: f64, beta: f64) -> f64 {
    let hinge: f64 = points
        .iter()
        .zip(y)
        .map(|(p, yi)| (1.0 - yi * (dot(w, p) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + beta * hinge
}

/// Soft-margin linear SVM with box constraint `β`.
pub fn train_linear_svm(points: &[&[f64]], labels: &[Label], beta: f64) -> Result<LinearModel> {
    check_inputs(points, labels, beta)?;
    let n = points.len();
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let gram: Vec<f64> = (0..n)
        .flat_map(|i| {
            let y = &y;
            (0..n).map(move |j| y[i] * y[j] * dot(points[i], points[j]))
        })
        .collect();
    let q = |i: usize, j: usize| gram[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 100_000usize.saturating_mul(n.max(1));
    let mut eps = KKT_TOL;
    let mut iterations = 0usize;

    let up = |a: f64, yt: f64| (yt > 0.0 && a < beta) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < beta);

    loop {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        // j: second-order choice in I_low
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if low(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                if i_sel != usize::MAX && v < gmax {
                    let diff = gmax - v;
                    let a = (q(i_sel, i_sel) + q(t, t) - 2.0 * y[i_sel] * y[t] * q(i_sel, t)).max(TAU);
                    let score = -diff * diff / a;
                    if score < best {
                        best = score;
                        j_sel = t;
                    }
                }
            }
        }
        let residual = (gmax - gmin).max(0.0);
        if residual <= eps || j_sel == usize::MAX {
            let w = weight(points, &y, &alpha);
            let b = free_vector_bias(points, &y, &alpha, &w, beta);
            let primal = primal_objective(points, &y, &w, b, beta);
            let dual = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
            if primal - dual <= GAP_TARGET * (1.0 + primal.abs()) || eps <= 1e-13 || j_sel == usize::MAX {
                return finish(&y, alpha, w, b, beta, primal, dual, residual, iterations);
            }
            eps *= 0.1;
            continue;
        }
        if iterations >= max_iter {
            return Err(PofError::NonConvergence { iterations, residual });
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let a = (q(i, i) + q(j, j) - 2.0 * y[i] * y[j] * q(i, j)).max(TAU);
        // move along y_i d_i = -y_j d_j to decrease the objective
        let b_coef = -y[i] * grad[i] + y[j] * grad[j];
        let step = b_coef / a;
        // clip to the box while keeping y_i α_i + y_j α_j fixed
        let sum = y[i] * ai_old + y[j] * aj_old;
        let mut ai = (ai_old + y[i] * step).clamp(0.0, beta);
        let mut aj = y[j] * (sum - y[i] * ai);
        if aj < 0.0 || aj > beta {
            aj = aj.clamp(0.0, beta);
            ai = (y[i] * (sum - y[j] * aj)).clamp(0.0, beta);
        }
        let (di, dj) = (ai - ai_old, aj - aj_old);
        alpha[i] = ai;
        alpha[j] = aj;
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    y: &[f64],
    alpha: Vec<f64>,
    w: Vec<f64>,
    b: f64,
    beta: f64,
    primal: f64,
    dual: f64,
    kkt_residual: f64,
    iterations: usize,
) -> Result<LinearModel> {
    if !(norm(&w) > 0.0) {
        return Err(PofError::numerical("SVM normal vector vanished"));
    }
    let equality_residual = alpha.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>().abs();
    let diagnostics = SvmDiagnostics { primal, dual, kkt_residual, equality_residual, iterations };
    TRAINED.fetch_add(1, Ordering::Relaxed);
    if !diagnostics.within_bounds() {
        VIOLATIONS.fetch_add(1, Ordering::Relaxed);
        log::warn!("SVM bounds violated: {diagnostics:?}");
    }
    let support = (0..alpha.len()).filter(|&t| alpha[t] > 0.0).collect();
    Ok(LinearModel { w, b, theta: None, qbar: None, beta, kappa: 0.0, alpha, support, diagnostics: Some(diagnostics) })
}

/// Normalised mean of the gradients.
pub fn mean_unit_gradient(grads: &[&[f64]]) -> Result<Vec<f64>> {
    if grads.is_empty() {
        return Err(PofError::invalid("empty gradient set"));
    }
    let d = grads[0].len();
    let mut mean = vec![0.0; d];
    for g in grads {
        for (m, v) in mean.iter_mut().zip(g.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= grads.len() as f64;
    }
    let largest = grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
    let len = norm(&mean);
    if largest == 0.0 || len <= 1e-12 * largest {
        return Err(PofError::DegenerateGradient);
    }
    Ok(mean.into_iter().map(|m| m / len).collect())
}

/// Projection of `w` onto the unit vector `qbar`.
pub fn gradient_component(w: &[f64], qbar: &[f64]) -> Vec<f64> {
    let c = dot(w, qbar) / dot(qbar, qbar);
    qbar.iter().map(|q| c * q).collect()
}

/// Unclamped θ from the stationarity condition; `None` when `w*` is parallel to `Q̄`.
pub fn rotation_theta_unclamped(model: &LinearModel, points: &[&[f64]], labels: &[Label], qbar: &[f64], kappa: f64) -> Option<f64> {
    let w = &model.w;
    let wq = gradient_component(w, qbar);
    let delta: Vec<f64> = w.iter().zip(&wq).map(|(a, b)| a - b).collect();
    let denom = dot(&delta, &delta);
    if denom < 1e-10 {
        return None;
    }
    let fit: f64 = points
        .iter()
        .zip(labels)
        .zip(&model.alpha)
        .map(|((p, l), a)| a * l.sign() * dot(&delta, p))
        .sum();
    let cos2 = dot(w, qbar).powi(2) / (dot(w, w) * dot(qbar, qbar));
    Some((fit - dot(&wq, &delta) - kappa * (1.0 - cos2)) / denom)
}

/// θ clamped to `[0, 1]`; exactly 1 when `w*` is parallel to `Q̄`.
pub fn rotation_theta(model: &LinearModel, points: &[&[f64]], labels: &[Label], qbar: &[f64], kappa: f64) -> f64 {
    rotation_theta_unclamped(model, points, labels, qbar, kappa).map_or(1.0, |t| t.clamp(0.0, 1.0))
}

/// Plain SVM followed by the closed-form rotation toward the mean unit gradient.
pub fn train_penalized_svm(points: &[&[f64]], labels: &[Label], grads: &[&[f64]], beta: f64, kappa: f64) -> Result<LinearModel> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(PofError::invalid("kappa must be nonnegative"));
    }
    if grads.len() != points.len() {
        return Err(PofError::invalid("gradients and points differ in length"));
    }
    let mut model = train_linear_svm(points, labels, beta)?;
    model.kappa = kappa;
    let qbar = match mean_unit_gradient(grads) {
        Ok(q) => q,
        Err(PofError::DegenerateGradient) => {
            log::warn!("degenerate cluster gradient; keeping the unpenalised SVM");
            return Ok(model);
        }
        Err(e) => return Err(e),
    };
    let theta = rotation_theta(&model, points, labels, &qbar, kappa);
    if theta < 1.0 - 1e-12 {
        let wq = gradient_component(&model.w, &qbar);
        let w: Vec<f64> = model.w.iter().zip(&wq).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        if !(norm(&w) > 0.0) {
            return Err(PofError::numerical("rotated normal vector vanished"));
        }
        let (sum, count) = model
            .support
            .iter()
            .map(|&j| labels[j].sign() - dot(&w, points[j]))
            .fold((0.0, 0usize), |(s, c), r| (s + r, c + 1));
        model.b = sum / count as f64;
        model.w = w;
    }
    model.theta = Some(theta);
    model.qbar = Some(qbar);
    Ok(model)
}
