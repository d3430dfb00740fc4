//! Thomas algorithm for the implicit sweeps.

use crate::error::{Error, Result};

pub const PIVOT_GUARD: f64 = 1e-14;

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn with_len(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solves in place; `rhs` is overwritten with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(());
        }
        scratch.clear();
        scratch.resize(n, 0.0);
        let mut pivot = self.diag[0];
        if pivot.abs() < PIVOT_GUARD {
            return Err(Error::SingularPivot(pivot));
        }
        scratch[0] = self.upper[0] / pivot;
        rhs[0] /= pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * scratch[i - 1];
            if pivot.abs() < PIVOT_GUARD {
                return Err(Error::SingularPivot(pivot));
            }
            scratch[i] = self.upper[i] / pivot;
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x, &mut Vec::new())?;
        Ok(x)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// `max |A x - rhs| / max(|rhs|, tiny)`.
    pub fn relative_residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let ax = self.apply(x);
        let scale = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = ax
            .iter()
            .zip(rhs)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }
}
