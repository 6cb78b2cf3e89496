//! Three-species competitive Lotka-Volterra model.
//!
//! `z_i' = r_i z_i (1 - sum_j s_ij z_j)` on `[0, 10]` with `z(0) = (10, 5, 2)`
//! and `s_ii = 0.5`. The nine parameters are ordered
//! `(s12, s13, s21, s23, s31, s32, r1, r2, r3)`; the response is `z3(10)`.

use super::ode::{heun_step, Rk4Work};
use crate::error::{PofError, Result};

pub const FINAL_TIME: f64 = 10.0;
pub const INITIAL_STATE: [f64; 3] = [10.0, 5.0, 2.0];
pub const SELF_INTERACTION: f64 = 0.5;

/// (row, column) of each off-diagonal interaction parameter.
const OFF_DIAGONAL: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

fn interaction_matrix(params: &[f64]) -> [[f64; 3]; 3] {
    let mut s = [[SELF_INTERACTION; 3]; 3];
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        s[i][j] = params[k];
    }
    s
}

fn check(params: &[f64], n_steps: usize) -> Result<()> {
    if params.len() != 9 {
        return Err(PofError::invalid("Lotka-Volterra takes 9 parameters"));
    }
    if n_steps == 0 {
        return Err(PofError::invalid("n_steps must be at least 1"));
    }
    Ok(())
}

/// Population of species 3 at the final time.
pub fn solve_lotka(params: &[f64], n_steps: usize) -> Result<f64> {
    Ok(solve_lotka_state(params, n_steps)?[2])
}

/// Full state at the final time.
pub fn solve_lotka_state(params: &[f64], n_steps: usize) -> Result<[f64; 3]> {
    check(params, n_steps)?;
    let s = interaction_matrix(params);
    let r = [params[6], params[7], params[8]];
    let h = FINAL_TIME / n_steps as f64;
    let mut y = INITIAL_STATE.to_vec();
    let mut work = Rk4Work::default();
    let mut rhs = |_t: f64, z: &[f64], dz: &mut [f64]| {
        for i in 0..3 {
            let load: f64 = (0..3).map(|j| s[i][j] * z[j]).sum();
            dz[i] = r[i] * z[i] * (1.0 - load);
        }
    };
    for k in 0..n_steps {
        heun_step(&mut rhs, k as f64 * h, &mut y, h, &mut work);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(PofError::numerical("non-finite Lotka-Volterra state"));
        }
    }
    Ok([y[0], y[1], y[2]])
}

/// `z3(10)` and its gradient with respect to the nine parameters, via the
/// forward sensitivity system `S' = J S + df/dp`, `S(0) = 0`.
pub(crate) fn response_and_gradient(params: &[f64], n_steps: usize) -> Result<(f64, [f64; 9])> {
    check(params, n_steps)?;
    let s = interaction_matrix(params);
    let r = [params[6], params[7], params[8]];
    let h = FINAL_TIME / n_steps as f64;
    // layout: z (3), then S column-major: S[3 + 3 * p + i] = dz_i/dp_p
    let mut y = vec![0.0; 3 + 27];
    y[..3].copy_from_slice(&INITIAL_STATE);
    let mut work = Rk4Work::default();
    let mut rhs = |_t: f64, v: &[f64], dv: &mut [f64]| {
        let z = &v[..3];
        let mut free = [0.0; 3];
        for i in 0..3 {
            let load: f64 = (0..3).map(|j| s[i][j] * z[j]).sum();
            free[i] = 1.0 - load;
            dv[i] = r[i] * z[i] * free[i];
        }
        // J_ik = delta_ik r_i free_i - r_i z_i s_ik
        let mut jac = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                jac[i][k] = -r[i] * z[i] * s[i][k];
            }
            jac[i][i] += r[i] * free[i];
        }
        for p in 0..9 {
            let col = &v[3 + 3 * p..6 + 3 * p];
            let mut forcing = [0.0; 3];
            if p < 6 {
                let (i, j) = OFF_DIAGONAL[p];
                forcing[i] = -r[i] * z[i] * z[j];
            } else {
                let i = p - 6;
                forcing[i] = z[i] * free[i];
            }
            for i in 0..3 {
                dv[3 + 3 * p + i] = jac[i][0] * col[0] + jac[i][1] * col[1] + jac[i][2] * col[2] + forcing[i];
            }
        }
    };
    for k in 0..n_steps {
        heun_step(&mut rhs, k as f64 * h, &mut y, h, &mut work);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(PofError::numerical("non-finite Lotka-Volterra state"));
        }
    }
    let mut grad = [0.0; 9];
    for (p, g) in grad.iter_mut().enumerate() {
        *g = y[3 + 3 * p + 2];
    }
    Ok((y[2], grad))
}
