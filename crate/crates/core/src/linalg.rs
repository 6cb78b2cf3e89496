//! Small dense vector helpers and a tridiagonal solver.

use crate::error::{PofError, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

pub fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Arithmetic mean of a nonempty set of equal-length points.
pub fn mean_point<'a, I>(points: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut iter = points.into_iter();
    let first = iter.next().expect("mean of empty point set");
    let mut acc = first.to_vec();
    let mut count = 1usize;
    for p in iter {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
        count += 1;
    }
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// LU factors of a tridiagonal matrix, computed by Gaussian elimination without pivoting.
///
/// Row `i` holds `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(PofError::invalid("tridiagonal bands must share a nonzero length"));
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        let mut pivots = vec![0.0; n];
        let mut multipliers = vec![0.0; n];
        pivots[0] = diag[0];
        for i in 1..n {
            if pivots[i - 1].abs() <= 1e-14 * scale {
                return Err(PofError::numerical("singular tridiagonal system"));
            }
            multipliers[i] = lower[i] / pivots[i - 1];
            pivots[i] = diag[i] - multipliers[i] * upper[i - 1];
        }
        if pivots[n - 1].abs() <= 1e-14 * scale {
            return Err(PofError::numerical("singular tridiagonal system"));
        }
        Ok(Self { lower: multipliers, pivots, upper: upper.to_vec() })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.pivots.len();
        let mut y = rhs.to_vec();
        for i in 1..n {
            y[i] -= self.lower[i] * y[i - 1];
        }
        y[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = (y[i] - self.upper[i] * y[i + 1]) / self.pivots[i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense_product() {
        let lower = [0.0, -1.0, -1.0, -0.5];
        let diag = [4.0, 4.0, 4.0, 3.0];
        let upper = [-1.0, -1.0, -2.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b = [0.0; 4];
        for i in 0..4 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += lower[i] * x[i - 1];
            }
            if i < 3 {
                b[i] += upper[i] * x[i + 1];
            }
        }
        let lu = TridiagonalLu::factor(&lower, &diag, &upper).unwrap();
        let got = lu.solve(&b);
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_is_rejected() {
        let r = TridiagonalLu::factor(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0]);
        assert!(r.is_err());
    }

    #[test]
    fn mean_point_averages() {
        let pts = [vec![0.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(mean_point(pts.iter().map(|p| p.as_slice())), vec![1.0, 3.0]);
    }
}
