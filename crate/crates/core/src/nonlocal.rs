//! The nonlocal ratio `I(p) = int p dy / int b^2 p dy`, marginals, leverage
//! extraction and the empirical monitor of the ratio-gap estimate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field3, GridSpec};
use crate::holder::{holder_norm, PairMode};
use crate::model::Func1;
use crate::par::Exec;

pub const DEFAULT_EPS_DEN: f64 = 1e-300;

/// `q_i = int p(S_i, y) dy` by the composite trapezoid rule.
pub fn marginal(p: &[f64], grid: &GridSpec) -> Vec<f64> {
    let wy = grid.y_weights();
    let ny = grid.n_y();
    (0..grid.n_s())
        .map(|i| {
            p[i * ny..(i + 1) * ny]
                .iter()
                .zip(&wy)
                .map(|(v, w)| v * w)
                .sum()
        })
        .collect()
}

/// Numerator and denominator integrals of the ratio at every S node.
pub fn ratio_integrals(p: &[f64], b2: &[f64], grid: &GridSpec) -> Vec<(f64, f64)> {
    let wy = grid.y_weights();
    let ny = grid.n_y();
    (0..grid.n_s())
        .map(|i| {
            let row = &p[i * ny..(i + 1) * ny];
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..ny {
                let wp = wy[j] * row[j];
                num += wp;
                den += wp * b2[j];
            }
            (num, den)
        })
        .collect()
}

/// One time slice of the nonlocal field.
#[derive(Debug, Clone)]
pub struct NonlocalSlice {
    /// `I(S_i)`, one value per S node.
    pub ratio: Vec<f64>,
    pub denominator_min: f64,
}

/// `I(S) = int p dy / int b^2 p dy`.
pub fn ratio_i(p: &[f64], b: &Func1, grid: &GridSpec, eps_den: f64) -> Result<NonlocalSlice> {
    let b2: Vec<f64> = grid
        .y_nodes()
        .into_iter()
        .map(|y| {
            let v = b.eval(y);
            v * v
        })
        .collect();
    ratio_from_b2(p, &b2, grid, eps_den)
}

pub fn ratio_from_b2(p: &[f64], b2: &[f64], grid: &GridSpec, eps_den: f64) -> Result<NonlocalSlice> {
    let parts = ratio_integrals(p, b2, grid);
    let mut ratio = Vec::with_capacity(parts.len());
    let mut denominator_min = f64::INFINITY;
    for (i, (num, den)) in parts.into_iter().enumerate() {
        if !(den > eps_den) {
            return Err(Error::DegenerateDenominator {
                s_index: i,
                value: den,
            });
        }
        denominator_min = denominator_min.min(den);
        ratio.push(num / den);
    }
    debug_assert!({
        let lo = b2.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = b2.iter().copied().fold(0.0, f64::max);
        ratio
            .iter()
            .all(|&v| v <= (1.0 / lo) * (1.0 + 1e-12) && v >= (1.0 / hi) * (1.0 - 1e-12))
    });
    Ok(NonlocalSlice {
        ratio,
        denominator_min,
    })
}

/// Ratio gaps against a reference level `bar_b`:
/// `I - 1/bar_b^2 = int (bar_b^2 - b^2) p / (bar_b^2 int b^2 p)` and
/// `sqrt(I) - 1/bar_b = (I - 1/bar_b^2) / (sqrt(I) + 1/bar_b)`.
///
/// Both vanish identically when `b` equals `bar_b` at every node.
pub fn ratio_gaps(
    p: &[f64],
    b2: &[f64],
    bar_b: f64,
    grid: &GridSpec,
    eps_den: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let wy = grid.y_weights();
    let ny = grid.n_y();
    let bar_b2 = bar_b * bar_b;
    let mut gap = Vec::with_capacity(grid.n_s());
    let mut sqrt_gap = Vec::with_capacity(grid.n_s());
    for i in 0..grid.n_s() {
        let row = &p[i * ny..(i + 1) * ny];
        let mut num = 0.0;
        let mut diff = 0.0;
        let mut den = 0.0;
        for j in 0..ny {
            let wp = wy[j] * row[j];
            num += wp;
            den += wp * b2[j];
            diff += wp * (bar_b2 - b2[j]);
        }
        if !(den > eps_den) {
            return Err(Error::DegenerateDenominator {
                s_index: i,
                value: den,
            });
        }
        let g = diff / (bar_b2 * den);
        let ratio = num / den;
        gap.push(g);
        sqrt_gap.push(g / (ratio.sqrt() + 1.0 / bar_b));
    }
    Ok((gap, sqrt_gap))
}

/// `I(p)` on every time level, as a `(t, S)` field.
pub fn ratio_field(p: &Field3, b: &Func1, grid: &GridSpec, eps_den: f64, exec: Exec) -> Result<Field3> {
    let b2: Vec<f64> = grid
        .y_nodes()
        .into_iter()
        .map(|y| b.eval(y).powi(2))
        .collect();
    let rows = exec.map_range(p.nt, |k| ratio_from_b2(p.slice(k), &b2, grid, eps_den).map(|r| r.ratio));
    let mut out = Field3::zeros(p.nt, grid.n_s(), 1, p.dt, grid.ds(), 1.0);
    for (k, row) in rows.into_iter().enumerate() {
        out.slice_mut(k).copy_from_slice(&row?);
    }
    Ok(out)
}

/// Leverage `a = sigma_D sqrt(I)` pointwise on a `(t, S)` field.
pub fn leverage(sigma_d: &Field3, ratio: &Field3) -> Field3 {
    assert_eq!(sigma_d.data.len(), ratio.data.len());
    sigma_d.with_data(
        sigma_d
            .data
            .iter()
            .zip(&ratio.data)
            .map(|(s, i)| s * i.sqrt())
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonitorRecord {
    /// `|I(p) - 1/bar_b^2|_{2+h} + |sqrt(I(p)) - 1/bar_b|_{2+h}`.
    pub lhs: f64,
    pub gap_norm: f64,
    pub sqrt_gap_norm: f64,
    /// `|p|_{2+h}`.
    pub p_norm: f64,
    /// `lhs / (b* (1 + |p|_{2+h})^6)`.
    pub ratio: f64,
}

/// Evaluates both sides of the ratio-gap estimate on a space-time density.
///
/// `p_norm` may be supplied when the caller already has `|p|_{2+h}`.
#[allow(clippy::too_many_arguments)]
pub fn lemma1_monitor(
    p: &Field3,
    b: &Func1,
    bar_b: f64,
    b_star: f64,
    p_lower0: f64,
    grid: &GridSpec,
    p_norm: Option<f64>,
    exec: Exec,
) -> Result<MonitorRecord> {
    let min = p.min();
    if min < 0.5 * p_lower0 {
        return Err(Error::XSetViolation {
            min,
            bound: 0.5 * p_lower0,
        });
    }
    let b2: Vec<f64> = grid
        .y_nodes()
        .into_iter()
        .map(|y| b.eval(y).powi(2))
        .collect();
    let rows = exec.map_range(p.nt, |k| ratio_gaps(p.slice(k), &b2, bar_b, grid, 0.0));
    let mut gap = Field3::zeros(p.nt, grid.n_s(), 1, p.dt, grid.ds(), 1.0);
    let mut sqrt_gap = gap.clone();
    for (k, row) in rows.into_iter().enumerate() {
        let (g, sg) = row?;
        gap.slice_mut(k).copy_from_slice(&g);
        sqrt_gap.slice_mut(k).copy_from_slice(&sg);
    }
    let h = grid.holder;
    let gap_norm = holder_norm(&gap, 2, h, PairMode::Neighbor, exec).value;
    let sqrt_gap_norm = holder_norm(&sqrt_gap, 2, h, PairMode::Neighbor, exec).value;
    let p_norm = match p_norm {
        Some(v) => v,
        None => holder_norm(p, 2, h, PairMode::Neighbor, exec).value,
    };
    let lhs = gap_norm + sqrt_gap_norm;
    assert!(lhs.is_finite(), "ratio-gap norm is not finite");
    let ratio = if lhs == 0.0 {
        0.0
    } else {
        lhs / (b_star * (1.0 + p_norm).powi(6))
    };
    Ok(MonitorRecord {
        lhs,
        gap_norm,
        sqrt_gap_norm,
        p_norm,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::measure_b_star;

    fn grid(ny: usize, y_min: f64, y_max: f64) -> GridSpec {
        GridSpec {
            s_min: 0.0,
            s_max: 1.0,
            y_min,
            y_max,
            ns: 8,
            ny,
            t_end: 1.0,
            nt: 4,
            holder: 0.5,
        }
    }

    fn fill(g: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; g.slice_len()];
        for i in 0..g.n_s() {
            for j in 0..g.n_y() {
                out[g.idx(i, j)] = f(g.s(i), g.y(j));
            }
        }
        out
    }

    #[test]
    fn marginal_of_uniform_and_zero() {
        let g = grid(20, -1.0, 1.5);
        let q = marginal(&vec![3.0; g.slice_len()], &g);
        assert!(q.iter().all(|v| (v - 7.5).abs() < 1e-13));
        let q0 = marginal(&vec![0.0; g.slice_len()], &g);
        assert!(q0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn marginal_of_product_matches_refined_quadrature() {
        let g = grid(256, 0.0, 2.0);
        let gy = |y: f64| (-(y - 1.0).powi(2) / 0.08).exp() * (1.0 + 0.3 * (3.0 * y).sin());
        let fs = |s: f64| 1.0 + s * s;
        let q = marginal(&fill(&g, |s, y| fs(s) * gy(y)), &g);
        // reference: composite Simpson with 20000 panels
        let n = 20000;
        let h = 2.0 / n as f64;
        let mut reference = gy(0.0) + gy(2.0);
        for k in 1..n {
            reference += if k % 2 == 1 { 4.0 } else { 2.0 } * gy(k as f64 * h);
        }
        reference *= h / 3.0;
        for i in 0..g.n_s() {
            let exact = fs(g.s(i)) * reference;
            assert!(((q[i] - exact) / exact).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_b_gives_inverse_square() {
        let g = grid(32, -1.0, 1.0);
        let p = fill(&g, |s, y| 1.0 + s + (y * 3.0).cos().powi(2));
        for delta in [1.0, 2.0, 0.5] {
            let r = ratio_i(&p, &Func1::constant(delta), &g, 0.0).unwrap();
            assert!(r.ratio.iter().all(|&v| v == 1.0 / (delta * delta)));
        }
        let delta = 1.37;
        let r = ratio_i(&p, &Func1::constant(delta), &g, 0.0).unwrap();
        assert!(r
            .ratio
            .iter()
            .all(|&v| (v * delta * delta - 1.0).abs() < 4.0 * f64::EPSILON));
    }

    #[test]
    fn uniform_density_with_linear_b_squared() {
        let g = grid(256, 1.0, 2.0);
        let p = vec![1.0; g.slice_len()];
        let r = ratio_i(&p, &Func1::new("sqrt", f64::sqrt), &g, 0.0).unwrap();
        for v in r.ratio {
            assert!((v - 2.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn concentrated_mass_hits_lower_bound() {
        let g = grid(64, 0.0, 1.0);
        let b = Func1::new("lin", |y| 1.0 + y);
        let delta2 = 2.0;
        let p = fill(&g, |_, y| if y > 0.999 { 1.0 } else { 0.0 });
        let r = ratio_i(&p, &b, &g, 0.0).unwrap();
        for v in r.ratio {
            assert!((v - 1.0 / (delta2 * delta2)).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        let g = grid(16, 0.0, 1.0);
        let err = ratio_i(&vec![0.0; g.slice_len()], &Func1::constant(1.0), &g, 1e-12).unwrap_err();
        assert!(matches!(err, Error::DegenerateDenominator { s_index: 0, .. }));
    }

    #[test]
    fn gaps_vanish_for_constant_b() {
        let g = grid(16, 0.0, 1.0);
        let p = fill(&g, |s, y| 1.0 + s * y);
        let b2 = vec![1.7 * 1.7; g.n_y()];
        let (gap, sg) = ratio_gaps(&p, &b2, 1.7, &g, 0.0).unwrap();
        assert!(gap.iter().chain(&sg).all(|&v| v == 0.0));
    }

    #[test]
    fn leverage_examples() {
        let sd = Field3::from_fn(3, 5, 1, 0.1, 0.1, 1.0, |_, _, _| 0.2);
        let one = sd.map(|_| 1.0);
        assert_eq!(leverage(&sd, &one), sd);
        let four = sd.map(|_| 4.0);
        assert!(leverage(&sd, &four).data.iter().all(|&a| (a - 0.4).abs() < 1e-15));
        // a^2 / I reproduces sigma_D^2
        let ratio = Field3::from_fn(3, 5, 1, 0.1, 0.1, 1.0, |k, i, _| 0.3 + 0.1 * (k + i) as f64);
        let a = leverage(&sd, &ratio);
        for (av, iv) in a.data.iter().zip(&ratio.data) {
            assert!((av * av / iv - 0.04).abs() < 1e-12 * 0.04);
        }
    }

    fn monitor_density(g: &GridSpec) -> Field3 {
        let mut p = Field3::on_grid(g);
        for k in 0..p.nt {
            let t = g.t(k);
            for i in 0..g.n_s() {
                for j in 0..g.n_y() {
                    let (s, y) = (g.s(i), g.y(j));
                    let idx = p.index(k, i, j);
                    p.data[idx] = 1.0 + 0.5 * (-(y - 0.3 * s).powi(2) * (1.0 + t)).exp();
                }
            }
        }
        p
    }

    #[test]
    fn monitor_is_zero_for_constant_b() {
        let g = grid(24, -1.0, 1.0);
        let p = monitor_density(&g);
        let rec = lemma1_monitor(&p, &Func1::constant(1.2), 1.2, 0.0, 1.0, &g, None, Exec::Sequential).unwrap();
        assert_eq!(rec.lhs, 0.0);
    }

    #[test]
    fn monitor_lhs_is_linear_in_perturbation_scale() {
        let g = grid(24, -1.0, 1.0);
        let p = monitor_density(&g);
        let lhs = |s: f64| {
            let b = Func1::sin_perturbed(s);
            let bs = measure_b_star(&b, &g);
            lemma1_monitor(&p, &b, b.eval(0.0), bs, 1.0, &g, None, Exec::Sequential)
                .unwrap()
                .lhs
        };
        let ratio = lhs(1e-2) / lhs(1e-3);
        assert!((ratio / 10.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn monitor_rejects_x_set_violation() {
        let g = grid(16, -1.0, 1.0);
        let p = monitor_density(&g);
        let err = lemma1_monitor(&p, &Func1::constant(1.0), 1.0, 0.0, 3.0, &g, None, Exec::Sequential).unwrap_err();
        assert!(matches!(err, Error::XSetViolation { .. }));
    }
}
