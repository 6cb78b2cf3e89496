//! Two-point boundary value problem
//!
//! `-(a(s) z')' + x2 z' = (1 - s) tanh(4 (s - x3)) + sin(5 pi x4 s)` on `(0, 1)`,
//! `z(0) = z(1) = 0`, with `a(s) = s^2 exp(-x1 s) + 0.05`.
//!
//! Expanded as `-a z'' + (x2 - a') z' = f`, discretised with the centred second
//! difference and the backward first difference on a uniform grid, and solved
//! by tridiagonal Gaussian elimination. Sensitivities reuse the factorisation.

use std::f64::consts::PI;

use crate::error::{PofError, Result};
use crate::linalg::TridiagonalLu;

struct Discretisation {
    h: f64,
    nodes: Vec<f64>,
    diffusion: Vec<f64>,
    advection: Vec<f64>,
}

impl Discretisation {
    fn new(x: &[f64], n_grid: usize) -> Self {
        let h = 1.0 / n_grid as f64;
        let nodes: Vec<f64> = (1..n_grid).map(|i| i as f64 * h).collect();
        let x1 = x[0];
        let diffusion = nodes.iter().map(|&s| s * s * (-x1 * s).exp() + 0.05).collect();
        let advection = nodes
            .iter()
            .map(|&s| x[1] - (2.0 * s - x1 * s * s) * (-x1 * s).exp())
            .collect();
        Self { h, nodes, diffusion, advection }
    }

    fn factor(&self) -> Result<TridiagonalLu> {
        let h2 = self.h * self.h;
        let m = self.nodes.len();
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for i in 0..m {
            let (a, c) = (self.diffusion[i], self.advection[i]);
            diag[i] = 2.0 * a / h2 + c / self.h;
            if i > 0 {
                lower[i] = -a / h2 - c / self.h;
            }
            if i + 1 < m {
                upper[i] = -a / h2;
            }
        }
        TridiagonalLu::factor(&lower, &diag, &upper)
    }
}

fn check_grid(n_grid: usize) -> Result<()> {
    if n_grid < 3 {
        return Err(PofError::invalid("n_grid must be at least 3"));
    }
    Ok(())
}

fn forcing(x: &[f64], s: f64) -> f64 {
    (1.0 - s) * (4.0 * (s - x[2])).tanh() + (5.0 * PI * x[3] * s).sin()
}

/// Interior nodal values `z_1 .. z_{N-1}` (boundary values are zero).
pub fn solve_elliptic_field(x: &[f64], n_grid: usize) -> Result<Vec<f64>> {
    check_grid(n_grid)?;
    let disc = Discretisation::new(x, n_grid);
    let lu = disc.factor()?;
    let rhs: Vec<f64> = disc.nodes.iter().map(|&s| forcing(x, s)).collect();
    let z = lu.solve(&rhs);
    if !z.iter().all(|v| v.is_finite()) {
        return Err(PofError::numerical("non-finite elliptic solution"));
    }
    Ok(z)
}

/// Trapezoidal integral of the discrete solution over `[0, 1]`.
pub fn solve_elliptic(x: &[f64], n_grid: usize) -> Result<f64> {
    let z = solve_elliptic_field(x, n_grid)?;
    Ok(z.iter().sum::<f64>() / n_grid as f64)
}

pub(crate) fn response_and_gradient(x: &[f64], n_grid: usize) -> Result<(f64, [f64; 4])> {
    check_grid(n_grid)?;
    let disc = Discretisation::new(x, n_grid);
    let lu = disc.factor()?;
    let h = disc.h;
    let h2 = h * h;
    let m = disc.nodes.len();
    let rhs: Vec<f64> = disc.nodes.iter().map(|&s| forcing(x, s)).collect();
    let z = lu.solve(&rhs);
    if !z.iter().all(|v| v.is_finite()) {
        return Err(PofError::numerical("non-finite elliptic solution"));
    }
    let at = |i: isize| if i < 0 || i as usize >= m { 0.0 } else { z[i as usize] };
    let second = |i: usize| (at(i as isize + 1) - 2.0 * z[i] + at(i as isize - 1)) / h2;
    let backward = |i: usize| (z[i] - at(i as isize - 1)) / h;

    let x1 = x[0];
    // d/dx1: A' z with da/dx1 = -s^3 e^{-x1 s}, dc/dx1 = -e^{-x1 s} s^2 (x1 s - 3)
    let rhs1: Vec<f64> = (0..m)
        .map(|i| {
            let s = disc.nodes[i];
            let e = (-x1 * s).exp();
            let da = -s * s * s * e;
            let dc = -e * s * s * (x1 * s - 3.0);
            -(-da * second(i) + dc * backward(i))
        })
        .collect();
    let rhs2: Vec<f64> = (0..m).map(|i| -backward(i)).collect();
    let rhs3: Vec<f64> = disc
        .nodes
        .iter()
        .map(|&s| {
            let sech = 1.0 / (4.0 * (s - x[2])).cosh();
            -4.0 * (1.0 - s) * sech * sech
        })
        .collect();
    let rhs4: Vec<f64> = disc
        .nodes
        .iter()
        .map(|&s| 5.0 * PI * s * (5.0 * PI * x[3] * s).cos())
        .collect();

    let q = z.iter().sum::<f64>() * h;
    let mut grad = [0.0; 4];
    for (g, r) in grad.iter_mut().zip([rhs1, rhs2, rhs3, rhs4]) {
        *g = lu.solve(&r).iter().sum::<f64>() * h;
    }
    Ok((q, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_are_zero_and_interior_is_sized() {
        let z = solve_elliptic_field(&[3.0, 0.2, 0.5, 1.0], 100).unwrap();
        assert_eq!(z.len(), 99);
    }

    #[test]
    fn grid_refinement_agrees_within_5e3() {
        let x = [3.0, 0.2, 0.5, 1.0];
        let coarse = solve_elliptic(&x, 100).unwrap();
        let fine = solve_elliptic(&x, 400).unwrap();
        assert!((coarse - fine).abs() < 5e-3, "{coarse} vs {fine}");
    }

    #[test]
    fn tiny_grid_rejected() {
        assert!(solve_elliptic(&[3.0, 0.2, 0.5, 1.0], 2).is_err());
    }
}
