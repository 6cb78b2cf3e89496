//! Fixed-step explicit integrators used by the differential-equation models.

/// Classical fourth-order Runge-Kutta step, in place.
pub(crate) fn rk4_step<F>(rhs: &mut F, t: f64, y: &mut [f64], h: f64, work: &mut Rk4Work)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    work.resize(n);
    let Rk4Work { k1, k2, k3, k4, tmp } = work;
    rhs(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, tmp, k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Heun's method (explicit trapezoidal rule) step, in place.
pub(crate) fn heun_step<F>(rhs: &mut F, t: f64, y: &mut [f64], h: f64, work: &mut Rk4Work)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    work.resize(n);
    let Rk4Work { k1, k2, tmp, .. } = work;
    rhs(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + h * k1[i];
    }
    rhs(t + h, tmp, k2);
    for i in 0..n {
        y[i] += 0.5 * h * (k1[i] + k2[i]);
    }
}

#[derive(Default)]
pub(crate) struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn resize(&mut self, n: usize) {
        if self.k1.len() != n {
            for v in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.tmp] {
                v.resize(n, 0.0);
            }
        }
    }
}
