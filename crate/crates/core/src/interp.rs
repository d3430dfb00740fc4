//! One-dimensional interpolants used by the implied surface and tabulated
//! coefficient functions.

use crate::error::{Error, Result};
use crate::tridiag::Tridiagonal;

fn locate(xs: &[f64], x: f64) -> usize {
    // index of the interval [xs[k], xs[k+1]] containing x (clamped)
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(xs.len() - 2),
        Err(0) => 0,
        Err(k) => (k - 1).min(xs.len() - 2),
    }
}

fn check_nodes(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    if xs.len() != ys.len() || xs.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} nodes, got {}",
            xs.len()
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InsufficientData(
            "interpolation nodes must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Piecewise-linear interpolant, flat outside the node range.
#[derive(Debug, Clone)]
pub struct Linear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Linear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_nodes(&xs, &ys, 2)?;
        Ok(Linear { xs, ys })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = locate(&self.xs, x);
        let w = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.ys[k] + w * (self.ys[k + 1] - self.ys[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndCondition {
    Natural,
    NotAKnot,
}

/// Cubic spline in Hermite form: node values plus node slopes.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, end: EndCondition) -> Result<Self> {
        let min = match end {
            EndCondition::Natural => 2,
            EndCondition::NotAKnot => 4,
        };
        check_nodes(&xs, &ys, min)?;
        let m = second_derivatives(&xs, &ys, end)?;
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        for k in 0..n {
            let (a, b) = if k + 1 < n { (k, k + 1) } else { (k - 1, k) };
            let h = xs[b] - xs[a];
            let sec = (ys[b] - ys[a]) / h;
            slopes[k] = if k + 1 < n {
                sec - h * (2.0 * m[a] + m[b]) / 6.0
            } else {
                sec + h * (m[a] + 2.0 * m[b]) / 6.0
            };
        }
        Ok(CubicSpline { xs, ys, slopes })
    }

    /// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson).
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        check_nodes(&xs, &ys, 2)?;
        let n = xs.len();
        let sec: Vec<f64> = (0..n - 1)
            .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = sec[0];
        slopes[n - 1] = sec[n - 2];
        for k in 1..n - 1 {
            if sec[k - 1] * sec[k] > 0.0 {
                let h0 = xs[k] - xs[k - 1];
                let h1 = xs[k + 1] - xs[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[k] = (w1 + w2) / (w1 / sec[k - 1] + w2 / sec[k]);
            }
        }
        Ok(CubicSpline { xs, ys, slopes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    /// Value; linear extrapolation with the end slopes outside the nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        let k = locate(&self.xs, x);
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[k] + h10 * h * self.slopes[k] + h01 * self.ys[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// Smallest first derivative over the node range, sampled densely.
    pub fn min_derivative(&self, samples_per_interval: usize) -> f64 {
        let mut min = f64::INFINITY;
        for k in 0..self.xs.len() - 1 {
            let h = self.xs[k + 1] - self.xs[k];
            for q in 0..=samples_per_interval {
                let s = q as f64 / samples_per_interval as f64;
                let d = (6.0 * s * s - 6.0 * s) * (self.ys[k] - self.ys[k + 1]) / h
                    + (3.0 * s * s - 4.0 * s + 1.0) * self.slopes[k]
                    + (3.0 * s * s - 2.0 * s) * self.slopes[k + 1];
                min = min.min(d);
            }
        }
        min
    }
}

fn second_derivatives(xs: &[f64], ys: &[f64], end: EndCondition) -> Result<Vec<f64>> {
    let n = xs.len();
    if n == 2 {
        return Ok(vec![0.0; 2]);
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut sys = Tridiagonal::with_len(n);
    let mut rhs = vec![0.0; n];
    for k in 1..n - 1 {
        sys.lower[k] = h[k - 1];
        sys.diag[k] = 2.0 * (h[k - 1] + h[k]);
        sys.upper[k] = h[k];
        rhs[k] = 6.0 * (d[k] - d[k - 1]);
    }
    match end {
        EndCondition::Natural => {
            sys.diag[0] = 1.0;
            sys.diag[n - 1] = 1.0;
            sys.solve(&rhs)
        }
        EndCondition::NotAKnot => {
            // Third-derivative continuity at x1 and x_{n-2}:
            //   h1 m0 - (h0 + h1) m1 + h0 m2 = 0.
            // Substituting m0 (resp. m_{n-1}) into row 1 (resp. n-2) keeps the
            // reduced system tridiagonal.
            let mut red = Tridiagonal::with_len(n - 2);
            let mut r = vec![0.0; n - 2];
            for k in 1..n - 1 {
                let q = k - 1;
                red.lower[q] = sys.lower[k];
                red.diag[q] = sys.diag[k];
                red.upper[q] = sys.upper[k];
                r[q] = rhs[k];
            }
            // m0 = ((h0 + h1) m1 - h0 m2) / h1
            let (h0, h1) = (h[0], h[1]);
            red.diag[0] += h[0] * (h0 + h1) / h1;
            red.upper[0] -= h[0] * h0 / h1;
            let (ha, hb) = (h[n - 3], h[n - 2]);
            // m_{n-1} = ((ha + hb) m_{n-2} - hb m_{n-3}) / ha
            let last = n - 3;
            red.diag[last] += h[n - 2] * (ha + hb) / ha;
            red.lower[last] -= h[n - 2] * hb / ha;
            let inner = red.solve(&r)?;
            let mut m = vec![0.0; n];
            m[1..n - 1].copy_from_slice(&inner);
            m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
            m[n - 1] = ((ha + hb) * m[n - 2] - hb * m[n - 3]) / ha;
            Ok(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let xs: Vec<f64> = vec![0.25, 0.5, 1.0, 1.5, 2.0];
        let f = |x: f64| 0.3 - x + 0.7 * x * x - 0.2 * x * x * x;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let sp = CubicSpline::new(xs, ys, EndCondition::NotAKnot).unwrap();
        for q in 0..50 {
            let x = 0.25 + 1.75 * q as f64 / 49.0;
            assert!((sp.eval(x) - f(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn splines_interpolate_nodes() {
        let xs: Vec<f64> = (0..7).map(|k| (k as f64 * 0.4).exp()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (1.0 / x).sin()).collect();
        for sp in [
            CubicSpline::new(xs.clone(), ys.clone(), EndCondition::Natural).unwrap(),
            CubicSpline::monotone(xs.clone(), ys.clone()).unwrap(),
        ] {
            for (x, y) in xs.iter().zip(&ys) {
                assert!((sp.eval(*x) - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monotone_spline_keeps_monotone_data_monotone() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.01, 0.02, 1.0, 1.01];
        let sp = CubicSpline::monotone(xs, ys).unwrap();
        assert!(sp.min_derivative(50) >= -1e-12);
    }

    #[test]
    fn linear_is_flat_outside() {
        let l = Linear::new(vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(l.eval(-1.0), 1.0);
        assert_eq!(l.eval(0.5), 2.0);
        assert_eq!(l.eval(9.0), 3.0);
    }
}
