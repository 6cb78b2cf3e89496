//! Brusselator reaction kinetics with forward sensitivities.
//!
//! State `z = (z1, z2)` obeys
//! `z1' = x1 - (1 + x2) z1 + z1^2 z2`, `z2' = x2 z1 - z1^2 z2`,
//! with `z1(0) = x3`, `z2(0) = 1`. The response is the time average of
//! `z1 + z2` over `[0, T]`, integrated with the trapezoidal rule on the RK4 grid
//! plus its Euler-Maclaurin end correction. Along solutions
//! `d(z1 + z2)/dt = x1 - z1`, so the correction term is
//! `-h^2/12 * (z1(0) - z1(T))` and the quadrature is fourth order.

use super::ode::{rk4_step, Rk4Work};
use super::Trajectory;
use crate::error::{PofError, Result};

fn check_steps(n_steps: usize, t_end: f64) -> Result<()> {
    if n_steps == 0 {
        return Err(PofError::invalid("n_steps must be at least 1"));
    }
    if !(t_end > 0.0) {
        return Err(PofError::invalid("final time must be positive"));
    }
    Ok(())
}

fn rates(x1: f64, x2: f64, z: &[f64], dz: &mut [f64]) {
    let (z1, z2) = (z[0], z[1]);
    dz[0] = x1 - (1.0 + x2) * z1 + z1 * z1 * z2;
    dz[1] = x2 * z1 - z1 * z1 * z2;
}

/// Integrate the trajectory at `x = (x1, x2, x3)`.
pub fn solve_brusselator(x: &[f64], t_end: f64, n_steps: usize) -> Result<Trajectory> {
    check_steps(n_steps, t_end)?;
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let h = t_end / n_steps as f64;
    let mut y = vec![x3, 1.0];
    let mut work = Rk4Work::default();
    let mut rhs = |_t: f64, z: &[f64], dz: &mut [f64]| rates(x1, x2, z, dz);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(y.clone());
    for i in 0..n_steps {
        rk4_step(&mut rhs, i as f64 * h, &mut y, h, &mut work);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(PofError::numerical("non-finite Brusselator state"));
        }
        times.push((i + 1) as f64 * h);
        states.push(y.clone());
    }
    Ok(Trajectory { times, states })
}

/// End-corrected trapezoidal time average of `z1 + z2` along a trajectory.
pub fn time_average(traj: &Trajectory) -> f64 {
    let sums: Vec<f64> = traj.states.iter().map(|s| s[0] + s[1]).collect();
    let n = sums.len() - 1;
    let t_end = traj.times[n];
    let h = t_end / n as f64;
    let interior: f64 = sums[1..n].iter().sum();
    let trapezoid = h * (0.5 * (sums[0] + sums[n]) + interior);
    let correction = h * h / 12.0 * (traj.states[0][0] - traj.states[n][0]);
    (trapezoid - correction) / t_end
}

/// Response and its gradient with respect to `(x1, x2, x3)`.
///
/// The augmented system carries `S = dz/dx` (2 x 3, column-major after the
/// state) and obeys `S' = J S + df/dx`, `S(0) = [[0,0,1],[0,0,0]]`.
pub(crate) fn response_and_gradient(x: &[f64], t_end: f64, n_steps: usize) -> Result<(f64, [f64; 3])> {
    check_steps(n_steps, t_end)?;
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let h = t_end / n_steps as f64;
    // [z1, z2, s1_x1, s2_x1, s1_x2, s2_x2, s1_x3, s2_x3]
    let mut y = vec![x3, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let mut work = Rk4Work::default();
    let mut rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
        rates(x1, x2, s, ds);
        let (z1, z2) = (s[0], s[1]);
        let j11 = -(1.0 + x2) + 2.0 * z1 * z2;
        let j12 = z1 * z1;
        let j21 = x2 - 2.0 * z1 * z2;
        let j22 = -z1 * z1;
        // df/dx1 = (1, 0), df/dx2 = (-z1, z1), df/dx3 = 0
        let forcing = [(1.0, 0.0), (-z1, z1), (0.0, 0.0)];
        for (p, (f1, f2)) in forcing.iter().enumerate() {
            let a = s[2 + 2 * p];
            let b = s[3 + 2 * p];
            ds[2 + 2 * p] = j11 * a + j12 * b + f1;
            ds[3 + 2 * p] = j21 * a + j22 * b + f2;
        }
    };

    let mut acc_q = 0.0;
    let mut acc_g = [0.0; 3];
    let mut add = |y: &[f64], w: f64| {
        acc_q += w * (y[0] + y[1]);
        for p in 0..3 {
            acc_g[p] += w * (y[2 + 2 * p] + y[3 + 2 * p]);
        }
    };
    add(&y, 0.5);
    for i in 0..n_steps {
        rk4_step(&mut rhs, i as f64 * h, &mut y, h, &mut work);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(PofError::numerical("non-finite Brusselator state"));
        }
        add(&y, if i + 1 == n_steps { 0.5 } else { 1.0 });
    }
    // end correction: z1(0) = x3, dz1(0)/dx = (0, 0, 1)
    let c = h * h / 12.0;
    let q = (h * acc_q - c * (x3 - y[0])) / t_end;
    let mut g = [0.0; 3];
    for p in 0..3 {
        let s0 = if p == 2 { 1.0 } else { 0.0 };
        g[p] = (h * acc_g[p] - c * (s0 - y[2 + 2 * p])) / t_end;
    }
    Ok((q, g))
}
