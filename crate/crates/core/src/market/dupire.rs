//! Dupire local volatility and the one-dimensional forward equation
//!
//! ```text
//! q_t = d_SS(sigma_D^2 S^2 q / 2) - d_S(r S q) - r q
//! ```
//!
//! for the discounted marginal density of the spot.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{trapezoid_weights, Field3};
use crate::market::surface::ImpliedSurface;
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalVolConfig {
    pub floor: f64,
    pub cap: f64,
    /// Denominators below this count as degenerate.
    pub min_denominator: f64,
    /// Largest tolerated fraction of degenerate nodes.
    pub max_degenerate: f64,
    /// Earliest maturity at which the surface is differentiated.
    pub t_min: f64,
}

impl Default for LocalVolConfig {
    fn default() -> Self {
        LocalVolConfig {
            floor: 0.01,
            cap: 3.0,
            min_denominator: 1e-6,
            max_degenerate: 0.05,
            t_min: 1e-3,
        }
    }
}

/// `sigma_D` on a `(t, S)` grid.
#[derive(Debug, Clone)]
pub struct LocalVolSurface {
    pub times: Vec<f64>,
    pub spots: Vec<f64>,
    /// Row-major `[t][S]`.
    pub sigma: Vec<f64>,
    pub degenerate_fraction: f64,
}

impl LocalVolSurface {
    pub fn constant(times: Vec<f64>, spots: Vec<f64>, sigma: f64) -> Self {
        let n = times.len() * spots.len();
        LocalVolSurface {
            times,
            spots,
            sigma: vec![sigma; n],
            degenerate_fraction: 0.0,
        }
    }

    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.sigma[k * self.spots.len() + i]
    }

    /// Bilinear interpolation, flat outside the grid; exact at the nodes.
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let (k, wt) = bracket(&self.times, t);
        let (i, ws) = bracket(&self.spots, s);
        let ns = self.spots.len();
        let v = |k: usize, i: usize| self.sigma[k * ns + i];
        let k1 = (k + 1).min(self.times.len() - 1);
        let i1 = (i + 1).min(ns - 1);
        let lo = v(k, i) + ws * (v(k, i1) - v(k, i));
        let hi = v(k1, i) + ws * (v(k1, i1) - v(k1, i));
        lo + wt * (hi - lo)
    }

    /// As a `(t, S)` field with the given spacings.
    pub fn to_field(&self, dt: f64, ds: f64) -> Field3 {
        let mut f = Field3::zeros(self.times.len(), self.spots.len(), 1, dt, ds, 1.0);
        f.data.copy_from_slice(&self.sigma);
        f
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,S,sigma_D")?;
        for (k, t) in self.times.iter().enumerate() {
            for (i, s) in self.spots.iter().enumerate() {
                writeln!(out, "{t},{s},{}", self.at(k, i))?;
            }
        }
        Ok(())
    }
}

fn bracket(xs: &[f64], x: f64) -> (usize, f64) {
    let n = xs.len();
    if n == 1 || x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[n - 1] {
        return (n - 1, 0.0);
    }
    let k = xs.partition_point(|v| *v <= x) - 1;
    (k, (x - xs[k]) / (xs[k + 1] - xs[k]))
}

/// Local variance from the total-variance form of Dupire's formula,
/// `dw/dT / (1 - (y/w) w' + (-1/4 - 1/w + y^2/w^2) w'^2 / 4 + w'' / 2)`,
/// and the denominator itself.
pub fn local_variance(surface: &ImpliedSurface, t: f64, s: f64) -> (f64, f64) {
    let y = surface.log_moneyness(t, s);
    let ht = 1e-4 * t.max(1e-2);
    let hy = 1e-3;
    let w = surface.total_variance(t, y);
    let tw = |u: f64| surface.total_variance(u, y);
    let last = surface.last_maturity();
    let w_t = if t <= last && t + ht > last {
        // one-sided, so the flat extrapolation beyond the last quote is not seen
        (3.0 * w - 4.0 * tw(t - ht) + tw(t - 2.0 * ht)) / (2.0 * ht)
    } else {
        (tw(t + ht) - tw((t - ht).max(0.0))) / (t + ht - (t - ht).max(0.0))
    };
    let wp = surface.total_variance(t, y + hy);
    let wm = surface.total_variance(t, y - hy);
    let w_y = (wp - wm) / (2.0 * hy);
    let w_yy = (wp - 2.0 * w + wm) / (hy * hy);
    let den = 1.0 - y / w * w_y + 0.25 * (-0.25 - 1.0 / w + y * y / (w * w)) * w_y * w_y + 0.5 * w_yy;
    (w_t / den, den)
}

/// `sigma_D` at every `(times[k], spots[i])`, clamped to `[floor, cap]`.
pub fn dupire_local_vol(surface: &ImpliedSurface, times: &[f64], spots: &[f64], cfg: &LocalVolConfig) -> Result<LocalVolSurface> {
    let mut sigma = Vec::with_capacity(times.len() * spots.len());
    let mut degenerate = 0usize;
    for &t in times {
        let t = t.max(cfg.t_min);
        for &s in spots {
            let (var, den) = local_variance(surface, t, s);
            let v = if !(den >= cfg.min_denominator) || !var.is_finite() {
                degenerate += 1;
                cfg.cap
            } else {
                var.max(0.0).sqrt().clamp(cfg.floor, cfg.cap)
            };
            sigma.push(v);
        }
    }
    let fraction = degenerate as f64 / sigma.len() as f64;
    if fraction > cfg.max_degenerate {
        return Err(Error::DegenerateSurface { fraction });
    }
    Ok(LocalVolSurface {
        times: times.to_vec(),
        spots: spots.to_vec(),
        sigma,
        degenerate_fraction: fraction,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ForwardConfig {
    pub theta: f64,
    /// Implicit Euler half-steps replacing the first step.
    pub rannacher: bool,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            theta: 0.5,
            rannacher: true,
        }
    }
}

/// Finite-volume operator `(F_{i+1/2} - F_{i-1/2}) / w_i - r q_i` with zero
/// flux at both ends, as a tridiagonal matrix `L` (so `q_t = L q`).
fn forward_operator(spots: &[f64], sigma: &[f64], r: f64) -> Tridiagonal {
    let n = spots.len();
    let h = spots[1] - spots[0];
    let w = trapezoid_weights(n, h);
    let d: Vec<f64> = spots.iter().zip(sigma).map(|(s, v)| 0.5 * v * v * s * s).collect();
    let mut op = Tridiagonal::with_len(n);
    for i in 0..n - 1 {
        // F = (D_{i+1} q_{i+1} - D_i q_i)/h - r S_{i+1/2} (q_i + q_{i+1})/2
        let s_half = 0.5 * (spots[i] + spots[i + 1]);
        let c_next = d[i + 1] / h - 0.5 * r * s_half;
        let c_here = -d[i] / h - 0.5 * r * s_half;
        // +F in row i, -F in row i+1
        op.diag[i] += c_here / w[i];
        op.upper[i] += c_next / w[i];
        op.lower[i + 1] -= c_here / w[i + 1];
        op.diag[i + 1] -= c_next / w[i + 1];
    }
    for v in op.diag.iter_mut() {
        *v -= r;
    }
    op
}

fn theta_step(q: &[f64], now: &Tridiagonal, next: &Tridiagonal, dt: f64, theta: f64) -> Result<Vec<f64>> {
    let n = q.len();
    let lq = now.apply(q);
    let rhs: Vec<f64> = (0..n).map(|i| q[i] + (1.0 - theta) * dt * lq[i]).collect();
    let mut sys = Tridiagonal::with_len(n);
    for i in 0..n {
        sys.lower[i] = -theta * dt * next.lower[i];
        sys.diag[i] = 1.0 - theta * dt * next.diag[i];
        sys.upper[i] = -theta * dt * next.upper[i];
    }
    sys.solve(&rhs)
}

/// Marginal density trajectory `q_D(t_k, S_i)` as a `(t, S)` field.
pub fn dupire_forward_solve(lv: &LocalVolSurface, r: f64, q0: &[f64], cfg: &ForwardConfig) -> Result<Field3> {
    let (nt, ns) = (lv.times.len(), lv.spots.len());
    if q0.len() != ns || nt < 1 || ns < 3 {
        return Err(Error::InvalidGrid("initial marginal does not match the local-vol grid".into()));
    }
    let h = lv.spots[1] - lv.spots[0];
    let dt0 = if nt > 1 { lv.times[1] - lv.times[0] } else { 1.0 };
    let mut out = Field3::zeros(nt, ns, 1, dt0, h, 1.0);
    out.slice_mut(0).copy_from_slice(q0);
    let op_at = |k: usize| forward_operator(&lv.spots, &lv.sigma[k * ns..(k + 1) * ns], r);
    let op_mid = |k: usize| {
        let mid: Vec<f64> = (0..ns).map(|i| 0.5 * (lv.at(k, i) + lv.at(k + 1, i))).collect();
        forward_operator(&lv.spots, &mid, r)
    };
    let mut now = op_at(0);
    for k in 0..nt.saturating_sub(1) {
        let dt = lv.times[k + 1] - lv.times[k];
        let next = op_at(k + 1);
        let q = out.slice(k).to_vec();
        let q1 = if k == 0 && cfg.rannacher {
            let half = theta_step(&q, &now, &op_mid(0), 0.5 * dt, 1.0)?;
            theta_step(&half, &now, &next, 0.5 * dt, 1.0)?
        } else {
            theta_step(&q, &now, &next, dt, cfg.theta)?
        };
        let mass: f64 = q1.iter().sum();
        if q1.iter().any(|v| !v.is_finite()) || !(mass >= 0.0) {
            return Err(Error::StabilityFailure(format!("1D forward solve failed at step {k}")));
        }
        out.slice_mut(k + 1).copy_from_slice(&q1);
        now = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::quotes::{OptionQuote, QuoteValue};
    use crate::market::surface::build_implied_surface;

    fn surface(f: impl Fn(f64, f64) -> f64, r: f64) -> ImpliedSurface {
        let mut q = Vec::new();
        for &t in &[0.25, 0.5, 1.0, 1.5, 2.0] {
            for &k in &[60.0, 80.0, 100.0, 120.0, 140.0, 170.0] {
                q.push(OptionQuote {
                    maturity: t,
                    strike: k,
                    value: QuoteValue::ImpliedVol(f(t, k)),
                    line: 0,
                });
            }
        }
        build_implied_surface(&q, 100.0, r).unwrap()
    }

    fn axis(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn flat_surface_gives_flat_local_vol() {
        for r in [0.0, 0.03] {
            let s = surface(|_, _| 0.2, r);
            let lv = dupire_local_vol(&s, &axis(0.0, 2.0, 21), &axis(40.0, 250.0, 30), &LocalVolConfig::default()).unwrap();
            assert!(lv.sigma.iter().all(|v| (v - 0.2).abs() < 1e-6), "r = {r}");
        }
    }

    #[test]
    fn term_structure_local_vol() {
        let s = surface(|t, _| (0.04 + 0.01 * t).sqrt(), 0.0);
        let times = axis(0.25, 2.0, 8);
        let lv = dupire_local_vol(&s, &times, &axis(80.0, 120.0, 5), &LocalVolConfig::default()).unwrap();
        for (k, t) in times.iter().enumerate() {
            for i in 0..5 {
                assert!((lv.at(k, i).powi(2) - (0.04 + 0.02 * t)).abs() < 1e-4, "t = {t}");
            }
        }
    }

    #[test]
    fn extreme_skew_is_degenerate() {
        let s = surface(|_, k| (0.2 + 4.0 * (k / 100.0).ln()).max(0.05), 0.0);
        let err = dupire_local_vol(&s, &axis(0.1, 2.0, 10), &axis(60.0, 170.0, 30), &LocalVolConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateSurface { .. }), "{err}");
    }

    fn lognormal_setup(ns: usize, nt: usize) -> (LocalVolSurface, Vec<f64>, f64, f64) {
        let spots = axis(1.0, 400.0, ns);
        let times = axis(0.0, 1.0, nt + 1);
        let (m, s2) = (100f64.ln(), 0.1f64.powi(2));
        let q0: Vec<f64> = spots
            .iter()
            .map(|&x| (-(x.ln() - m).powi(2) / (2.0 * s2)).exp() / (x * (2.0 * std::f64::consts::PI * s2).sqrt()))
            .collect();
        (LocalVolSurface::constant(times, spots, 0.2), q0, m, s2)
    }

    #[test]
    fn lognormal_benchmark() {
        let (lv, q0, m, s2) = lognormal_setup(400, 100);
        let q = dupire_forward_solve(&lv, 0.0, &q0, &ForwardConfig::default()).unwrap();
        let var = s2 + 0.04;
        let mean = m - 0.02;
        let h = lv.spots[1] - lv.spots[0];
        let last = q.slice(q.nt - 1);
        let l1: f64 = lv
            .spots
            .iter()
            .zip(last)
            .map(|(&x, &v)| {
                let exact = (-(x.ln() - mean).powi(2) / (2.0 * var)).exp() / (x * (2.0 * std::f64::consts::PI * var).sqrt());
                (v - exact).abs()
            })
            .sum::<f64>()
            * h;
        assert!(l1 < 1e-3, "{l1}");
        assert!(last.iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn mass_is_conserved_and_zero_vol_is_static() {
        let (lv, q0, _, _) = lognormal_setup(200, 50);
        let w = trapezoid_weights(200, lv.spots[1] - lv.spots[0]);
        let mass = |q: &[f64]| q.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let q = dupire_forward_solve(&lv, 0.0, &q0, &ForwardConfig::default()).unwrap();
        let m0 = mass(&q0);
        assert!((mass(q.slice(q.nt - 1)) - m0).abs() < 1e-12);
        let still = LocalVolSurface::constant(lv.times.clone(), lv.spots.clone(), 0.0);
        let q = dupire_forward_solve(&still, 0.0, &q0, &ForwardConfig::default()).unwrap();
        assert_eq!(q.slice(q.nt - 1), &q0[..]);
    }

    #[test]
    fn discounting_removes_mass_at_rate_r() {
        let (lv, q0, _, _) = lognormal_setup(200, 50);
        let w = trapezoid_weights(200, lv.spots[1] - lv.spots[0]);
        let mass = |q: &[f64]| q.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let q = dupire_forward_solve(&lv, 0.05, &q0, &ForwardConfig::default()).unwrap();
        let ratio = mass(q.slice(q.nt - 1)) / mass(&q0);
        assert!((ratio - (-0.05f64).exp()).abs() < 1e-6, "{ratio}");
    }

    #[test]
    fn eval_interpolates_nodes() {
        let lv = LocalVolSurface {
            times: vec![0.0, 1.0],
            spots: vec![1.0, 2.0, 3.0],
            sigma: vec![0.1, 0.2, 0.3, 0.2, 0.3, 0.4],
            degenerate_fraction: 0.0,
        };
        assert_eq!(lv.eval(1.0, 2.0), 0.3);
        assert!((lv.eval(0.5, 2.5) - 0.3).abs() < 1e-15);
        assert_eq!(lv.eval(9.0, 9.0), 0.4);
    }
}
