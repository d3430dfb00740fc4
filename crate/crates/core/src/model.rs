//! Model coefficients, hypothesis checks and the regularised initial density.
//!
//! The forward operator is written for one spot variable `S` and one factor
//! `y`:
//!
//! ```text
//! dp/dt - d2/dS2 (r11 a1^2 I(p) p) - 2 d2/dSdy (r12 a1 a2 sqrt(I(p)) p)
//!       - d2/dy2 (r22 a2^2 p) + d/dS ((beta1 + r S) p) + d/dy (beta2 p)
//!       + (gamma + r) p = 0
//! ```
//!
//! with the half-scaled correlation matrix (`r11 = r22 = 1/2`). The mixed
//! term carries the factor 2 of the symmetric sum over `(S, y)` and `(y, S)`.

use std::fmt;
use std::sync::Arc;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::interp::Linear;
use crate::nonlocal;

/// Scalar function of the volatility factor.
#[derive(Clone)]
pub struct Func1 {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl Func1 {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Func1 {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant:{c}"), move |_| c)
    }

    /// `b(y) = exp(y)`, optionally clamped to `[lo, hi]`.
    pub fn exp(clamp: Option<(f64, f64)>) -> Self {
        match clamp {
            Some((lo, hi)) => Self::new(format!("exp:{lo}:{hi}"), move |y: f64| y.exp().clamp(lo, hi)),
            None => Self::new("exp", f64::exp),
        }
    }

    /// `b(y) = sqrt(1 + s sin y)`.
    pub fn sin_perturbed(s: f64) -> Self {
        Self::new(format!("sin:{s}"), move |y: f64| (1.0 + s * y.sin()).sqrt())
    }

    pub fn tabulated(label: impl Into<String>, table: Linear) -> Self {
        Self::new(label, move |y| table.eval(y))
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        (self.f)(y)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Func1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Func1({})", self.label)
    }
}

/// Coefficient function of `(t, S, y)`.
#[derive(Clone)]
pub struct Func3 {
    f: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
    label: String,
}

impl Func3 {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Func3 {
            f: Arc::new(f),
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant:{c}"), move |_, _, _| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn of_y(g: Func1) -> Self {
        let label = format!("y:{}", g.label());
        Self::new(label, move |_, _, y| g.eval(y))
    }

    /// `kappa (theta - y)`.
    pub fn mean_reverting(kappa: f64, theta: f64) -> Self {
        Self::new(format!("mean_reverting:{kappa}:{theta}"), move |_, _, y| {
            kappa * (theta - y)
        })
    }

    /// `nu sqrt(max(y, floor))`.
    pub fn cir(nu: f64, floor: f64) -> Self {
        Self::new(format!("cir:{nu}:{floor}"), move |_, _, y: f64| {
            nu * y.max(floor).sqrt()
        })
    }

    #[inline]
    pub fn eval(&self, t: f64, s: f64, y: f64) -> f64 {
        (self.f)(t, s, y)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Func3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Func3({})", self.label)
    }
}

/// Correlation matrix in the half-scaled convention: unit diagonal becomes
/// `1/2`, off-diagonal entries lie in `(-1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub ss: f64,
    pub sy: f64,
    pub yy: f64,
}

impl CorrelationMatrix {
    /// Raw entries, unchecked; [`validate_model`] rejects invalid ones.
    pub fn from_entries(ss: f64, sy: f64, yy: f64) -> Self {
        CorrelationMatrix { ss, sy, yy }
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        sym2_eigenvalues(self.ss, self.sy, self.yy)
    }

    /// Smallest eigenvalue `K_rho`.
    pub fn k_rho(&self) -> f64 {
        self.eigenvalues().0
    }

    /// Market correlation recovered from the off-diagonal entry.
    pub fn market(&self) -> f64 {
        2.0 * self.sy
    }

    fn check(&self) -> Result<()> {
        let viol = |detail: String| {
            Err(Error::HypothesisViolation {
                name: "rho",
                detail,
            })
        };
        if (self.ss - 0.5).abs() > 1e-15 || (self.yy - 0.5).abs() > 1e-15 {
            return viol(format!("diagonal ({}, {}) must be 1/2", self.ss, self.yy));
        }
        if !(self.sy.abs() < 0.5) {
            return viol(format!("off-diagonal {} not in (-1/2, 1/2)", self.sy));
        }
        if !(self.k_rho() > 0.0) {
            return viol("matrix is not positive definite".into());
        }
        Ok(())
    }
}

/// Ascending eigenvalues of `[[a, b], [b, c]]`.
pub fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Converts a market correlation in `(-1, 1)` to the half-scaled matrix.
pub fn convert_correlation(rho_market: f64) -> Result<CorrelationMatrix> {
    if !(rho_market.abs() < 1.0) {
        return Err(Error::OutOfRange(rho_market));
    }
    let m = CorrelationMatrix::from_entries(0.5, 0.5 * rho_market, 0.5);
    if m.k_rho() < 1e-2 {
        warn!(
            "correlation {rho_market} gives K_rho = {:e}; the operator is close to degenerate",
            m.k_rho()
        );
    }
    Ok(m)
}

/// Coefficients of the forward equation.
///
/// `drift_s` is the spot drift on top of `r S`; `gamma` is the zeroth-order
/// coefficient on top of `r`. Both default to zero in the LSV setting.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub b: Func1,
    pub alpha_s: Func3,
    pub alpha_y: Func3,
    pub drift_s: Func3,
    pub drift_y: Func3,
    pub gamma: Func3,
    pub rho: CorrelationMatrix,
    pub r: f64,
    pub s0: f64,
    pub y0: f64,
    /// Lower bound required of both diffusion amplitudes.
    pub eps: f64,
}

impl ModelSpec {
    #[inline]
    pub fn eff_drift_s(&self, t: f64, s: f64, y: f64) -> f64 {
        self.drift_s.eval(t, s, y) + self.r * s
    }

    #[inline]
    pub fn eff_gamma(&self, t: f64, s: f64, y: f64) -> f64 {
        self.gamma.eval(t, s, y) + self.r
    }

    /// `b^2` at the y nodes of `grid`.
    pub fn b2_nodes(&self, grid: &GridSpec) -> Vec<f64> {
        grid.y_nodes()
            .into_iter()
            .map(|y| {
                let b = self.b.eval(y);
                b * b
            })
            .collect()
    }

    /// Reference level `b(y0)` used to freeze the nonlocal ratio.
    pub fn bar_b(&self) -> f64 {
        self.b.eval(self.y0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub delta1: f64,
    pub delta2: f64,
    pub b_star: f64,
    pub min_alpha_s: f64,
    pub min_alpha_y: f64,
    pub k_rho: f64,
    pub warnings: Vec<String>,
}

/// Checks positivity and smoothness of `b`, the amplitude floor and the
/// correlation convention on the grid, and measures `delta1`, `delta2`, `b*`.
pub fn validate_model(spec: &ModelSpec, grid: &GridSpec) -> Result<ValidationReport> {
    grid.validate()?;
    grid.check_interior(spec.s0, spec.y0)?;
    spec.rho.check()?;

    let ys = grid.y_nodes();
    let bs: Vec<f64> = ys.iter().map(|&y| spec.b.eval(y)).collect();
    if let Some((j, b)) = bs.iter().enumerate().find(|(_, b)| !(**b > 0.0) || !b.is_finite()) {
        return Err(Error::HypothesisViolation {
            name: "H1",
            detail: format!("b({}) = {b}", ys[j]),
        });
    }
    let delta1 = bs.iter().copied().fold(f64::INFINITY, f64::min);
    let delta2 = bs.iter().copied().fold(0.0, f64::max);
    let b_star = measure_b_star(&spec.b, grid);

    let (mut min_as, mut min_ay) = (f64::INFINITY, f64::INFINITY);
    for k in 0..grid.n_t() {
        let t = grid.t(k);
        for i in 0..grid.n_s() {
            let s = grid.s(i);
            for &y in &ys {
                min_as = min_as.min(spec.alpha_s.eval(t, s, y));
                min_ay = min_ay.min(spec.alpha_y.eval(t, s, y));
            }
        }
    }
    if !(min_as >= spec.eps) || !(min_ay >= spec.eps) || !(spec.eps > 0.0) {
        return Err(Error::HypothesisViolation {
            name: "alpha",
            detail: format!(
                "min alpha_S = {min_as}, min alpha_y = {min_ay}, floor eps = {}",
                spec.eps
            ),
        });
    }

    let mut warnings = Vec::new();
    let k_rho = spec.rho.k_rho();
    if k_rho < 1e-2 {
        warnings.push(format!("K_rho = {k_rho:e} is close to zero"));
    }
    Ok(ValidationReport {
        delta1,
        delta2,
        b_star,
        min_alpha_s: min_as,
        min_alpha_y: min_ay,
        k_rho,
        warnings,
    })
}

/// `sup |d(b^2)/dy|` by centred differences with the grid step.
pub fn measure_b_star(b: &Func1, grid: &GridSpec) -> f64 {
    let h = grid.dy();
    grid.y_nodes()
        .into_iter()
        .map(|y| {
            let up = b.eval(y + h);
            let dn = b.eval(y - h);
            ((up * up - dn * dn) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max)
}

/// Strictly positive initial (and lateral boundary) density.
#[derive(Debug, Clone)]
pub struct InitialDensity {
    pub psi: Vec<f64>,
    pub floor: f64,
    /// `inf psi`.
    pub lower: f64,
    /// `sup psi`.
    pub upper: f64,
}

impl InitialDensity {
    pub fn from_values(psi: Vec<f64>) -> Result<Self> {
        let lower = psi.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lower > 0.0) {
            return Err(Error::HypothesisViolation {
                name: "H3",
                detail: format!("initial density has inf {lower}"),
            });
        }
        Ok(InitialDensity {
            psi,
            floor: lower,
            lower,
            upper,
        })
    }
}

/// Peak-one Gaussian bump sampled at the grid nodes.
pub fn gaussian_bump(grid: &GridSpec, s0: f64, y0: f64, bw_s: f64, bw_y: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.slice_len()];
    for i in 0..grid.n_s() {
        let zs = (grid.s(i) - s0) / bw_s;
        for j in 0..grid.n_y() {
            let zy = (grid.y(j) - y0) / bw_y;
            out[grid.idx(i, j)] = (-0.5 * (zs * zs + zy * zy)).exp();
        }
    }
    out
}

/// Absolute floor equal to `rel` times the peak of the normalised bump.
pub fn relative_floor(grid: &GridSpec, s0: f64, y0: f64, bw_s: f64, bw_y: f64, rel: f64) -> f64 {
    rel / grid.mass(&gaussian_bump(grid, s0, y0, bw_s, bw_y))
}

/// Regularised Dirac mass at `(s0, y0)`: `floor + c * bump`, with `c` chosen
/// so the trapezoid mass over the grid is one.
pub fn smoothed_dirac(
    s0: f64,
    y0: f64,
    bw_s: f64,
    bw_y: f64,
    floor: f64,
    grid: &GridSpec,
) -> Result<InitialDensity> {
    grid.check_interior(s0, y0)?;
    if !(floor > 0.0) {
        return Err(Error::HypothesisViolation {
            name: "H3",
            detail: format!("floor {floor} must be positive"),
        });
    }
    for (axis, bw, h) in [("S", bw_s, grid.ds()), ("y", bw_y, grid.dy())] {
        if !(bw > 0.0) || bw < 3.0 * h {
            return Err(Error::BandwidthTooSmall {
                axis,
                bandwidth: bw,
                cells: bw / h,
            });
        }
    }
    let bump = gaussian_bump(grid, s0, y0, bw_s, bw_y);
    let bump_mass = grid.mass(&bump);
    let area = (grid.s_max - grid.s_min) * (grid.y_max - grid.y_min);
    let scale = (1.0 - floor * area) / bump_mass;
    if !(scale > 0.0) {
        return Err(Error::HypothesisViolation {
            name: "H3",
            detail: format!("floor {floor} carries more than unit mass"),
        });
    }
    let psi: Vec<f64> = bump.iter().map(|g| floor + scale * g).collect();
    let upper = psi.iter().copied().fold(0.0, f64::max);
    Ok(InitialDensity {
        psi,
        floor,
        lower: floor,
        upper,
    })
}

/// Spatial part of the full nonlinear operator applied to one slice, at the
/// interior nodes (boundary entries are zero).
pub fn nonlinear_spatial_operator(
    p: &[f64],
    t: f64,
    spec: &ModelSpec,
    grid: &GridSpec,
    eps_den: f64,
) -> Result<Vec<f64>> {
    let ratio = nonlocal::ratio_i(p, &spec.b, grid, eps_den)?;
    let (ns, ny) = (grid.n_s(), grid.n_y());
    let n = grid.slice_len();
    let mut diff_ss = vec![0.0; n];
    let mut diff_sy = vec![0.0; n];
    let mut diff_yy = vec![0.0; n];
    let mut flux_s = vec![0.0; n];
    let mut flux_y = vec![0.0; n];
    for i in 0..ns {
        let s = grid.s(i);
        let ri = ratio.ratio[i];
        for j in 0..ny {
            let y = grid.y(j);
            let q = grid.idx(i, j);
            let a1 = spec.alpha_s.eval(t, s, y);
            let a2 = spec.alpha_y.eval(t, s, y);
            diff_ss[q] = spec.rho.ss * a1 * a1 * ri * p[q];
            diff_sy[q] = spec.rho.sy * a1 * a2 * ri.sqrt() * p[q];
            diff_yy[q] = spec.rho.yy * a2 * a2 * p[q];
            flux_s[q] = spec.eff_drift_s(t, s, y) * p[q];
            flux_y[q] = spec.drift_y.eval(t, s, y) * p[q];
        }
    }
    let (hs, hy) = (grid.ds(), grid.dy());
    let mut out = vec![0.0; n];
    for i in 1..ns - 1 {
        let s = grid.s(i);
        for j in 1..ny - 1 {
            let q = grid.idx(i, j);
            let d_ss = (diff_ss[q + ny] - 2.0 * diff_ss[q] + diff_ss[q - ny]) / (hs * hs);
            let d_sy = (diff_sy[q + ny + 1] - diff_sy[q + ny - 1] - diff_sy[q - ny + 1]
                + diff_sy[q - ny - 1])
                / (4.0 * hs * hy);
            let d_yy = (diff_yy[q + 1] - 2.0 * diff_yy[q] + diff_yy[q - 1]) / (hy * hy);
            let d_s = (flux_s[q + ny] - flux_s[q - ny]) / (2.0 * hs);
            let d_y = (flux_y[q + 1] - flux_y[q - 1]) / (2.0 * hy);
            out[q] = -d_ss - 2.0 * d_sy - d_yy + d_s + d_y + spec.eff_gamma(t, s, grid.y(j)) * p[q];
        }
    }
    Ok(out)
}

/// `max |O(psi)|` over the interior nodes adjacent to the lateral boundary at
/// `t = 0`. Exact corner compatibility would make this zero.
pub fn compatibility_residual(psi: &[f64], spec: &ModelSpec, grid: &GridSpec) -> Result<f64> {
    let op = nonlinear_spatial_operator(psi, 0.0, spec, grid, 0.0)?;
    let (ns, ny) = (grid.ns, grid.ny);
    let mut worst: f64 = 0.0;
    for i in 1..=ns {
        for j in 1..=ny {
            if i == 1 || i == ns || j == 1 || j == ny {
                worst = worst.max(op[grid.idx(i, j)].abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn grid(ns: usize, ny: usize) -> GridSpec {
        GridSpec {
            s_min: 50.0,
            s_max: 150.0,
            y_min: -1.0,
            y_max: 1.0,
            ns,
            ny,
            t_end: 1.0,
            nt: 10,
            holder: 0.5,
        }
    }

    fn flat_spec(b: Func1) -> ModelSpec {
        ModelSpec {
            b,
            alpha_s: Func3::constant(0.3),
            alpha_y: Func3::constant(0.3),
            drift_s: Func3::zero(),
            drift_y: Func3::zero(),
            gamma: Func3::zero(),
            rho: convert_correlation(0.0).unwrap(),
            r: 0.0,
            s0: 100.0,
            y0: 0.0,
            eps: 1e-3,
        }
    }

    #[test]
    fn constant_b_passes_with_zero_b_star() {
        let rep = validate_model(&flat_spec(Func1::constant(1.0)), &grid(16, 16)).unwrap();
        assert_eq!(rep.b_star, 0.0);
        assert_eq!(rep.delta1, 1.0);
        assert_eq!(rep.delta2, 1.0);
        assert_eq!(rep.k_rho, 0.5);
        assert_eq!(rep.min_alpha_s, 0.3);
    }

    #[test]
    fn exponential_b_bounds_and_b_star() {
        let g = grid(16, 199);
        let rep = validate_model(&flat_spec(Func1::exp(None)), &g).unwrap();
        let e = std::f64::consts::E;
        assert!((rep.delta1 - 1.0 / e).abs() < 1e-14);
        assert!((rep.delta2 - e).abs() < 1e-14);
        // centred difference of exp(2y) at y = 1 overshoots by (2h)^2 / 6
        let analytic = 2.0 * e * e;
        let h = g.dy();
        assert!((rep.b_star - analytic).abs() < analytic * (4.0 * h * h));
        assert!(rep.b_star >= analytic);
    }

    #[test]
    fn b_star_error_is_second_order() {
        let analytic = 2.0 * std::f64::consts::E.powi(2);
        let err = |ny| (measure_b_star(&Func1::exp(None), &grid(16, ny)) - analytic).abs();
        let ratio = err(49) / err(99);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn rejects_paper_convention_off_diagonal_above_half() {
        let mut spec = flat_spec(Func1::constant(1.0));
        spec.rho = CorrelationMatrix::from_entries(0.5, 0.6, 0.5);
        let err = validate_model(&spec, &grid(16, 16)).unwrap_err();
        assert!(matches!(err, Error::HypothesisViolation { name: "rho", .. }));
    }

    #[test]
    fn rejects_nonpositive_b_and_small_alpha() {
        let spec = flat_spec(Func1::new("lin", |y| y));
        assert!(matches!(
            validate_model(&spec, &grid(16, 16)),
            Err(Error::HypothesisViolation { name: "H1", .. })
        ));
        let mut spec = flat_spec(Func1::constant(1.0));
        spec.eps = 0.5;
        assert!(matches!(
            validate_model(&spec, &grid(16, 16)),
            Err(Error::HypothesisViolation { name: "alpha", .. })
        ));
    }

    #[test]
    fn correlation_conversion_examples() {
        let m = convert_correlation(0.0).unwrap();
        assert_eq!((m.ss, m.sy, m.yy), (0.5, 0.0, 0.5));
        assert_eq!(m.k_rho(), 0.5);

        let m = convert_correlation(-0.5).unwrap();
        assert_eq!(m.sy, -0.25);
        let (lo, hi) = m.eigenvalues();
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);

        let m = convert_correlation(0.999).unwrap();
        assert!((m.k_rho() - 0.0005).abs() < 1e-15);
        assert!((m.eigenvalues().1 - 0.9995).abs() < 1e-15);

        assert!(matches!(convert_correlation(1.0), Err(Error::OutOfRange(_))));
        assert!(matches!(convert_correlation(-1.3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn k_rho_matches_closed_form() {
        for k in 0..=40 {
            let rho = -0.99 + k as f64 * 0.0495;
            let m = convert_correlation(rho).unwrap();
            assert!((m.k_rho() - 0.5 * (1.0 - rho.abs())).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothed_dirac_mass_and_floor() {
        let g = grid(64, 64);
        let floor = 1e-4;
        let init = smoothed_dirac(100.0, 0.0, 40.0, 0.8, floor, &g).unwrap();
        assert!((g.mass(&init.psi) - 1.0).abs() < 1e-12);
        assert!(init.psi.iter().all(|&v| v >= floor));
        assert_eq!(init.lower, floor);
    }

    #[test]
    fn bump_mass_matches_gaussian_integral() {
        let g = grid(128, 128);
        let (bs, by) = (6.0, 0.1);
        let m = g.mass(&gaussian_bump(&g, 100.0, 0.0, bs, by));
        let exact = 2.0 * std::f64::consts::PI * bs * by;
        assert!(((m - exact) / exact).abs() < 1e-3);
    }

    #[test]
    fn under_resolved_bump_is_rejected() {
        let g = grid(64, 64);
        let err = smoothed_dirac(100.0, 0.0, 1.5 * g.ds(), 0.5, 1e-6, &g).unwrap_err();
        assert!(matches!(err, Error::BandwidthTooSmall { axis: "S", .. }));
    }

    #[test]
    fn compatibility_residual_vanishes_on_constants() {
        let g = grid(16, 16);
        let spec = flat_spec(Func1::exp(None));
        let psi = vec![0.01; g.slice_len()];
        assert_eq!(compatibility_residual(&psi, &spec, &g).unwrap(), 0.0);
    }

    #[test]
    fn compatibility_residual_generic_gaussian_is_positive() {
        let g = grid(32, 32);
        let spec = flat_spec(Func1::constant(1.0));
        let init = smoothed_dirac(100.0, 0.0, 20.0, 0.4, 1e-6, &g).unwrap();
        assert!(compatibility_residual(&init.psi, &spec, &g).unwrap() > 0.0);
    }

    #[test]
    fn compatibility_residual_of_stationary_density_refines_away() {
        // Ornstein-Uhlenbeck pair: the product Gaussian N(S0, a/k1) x N(0, c/k2)
        // is stationary for constant diffusions and linear restoring drifts.
        let (a, c, k1, k2) = (50.0, 0.02, 1.0, 0.5);
        let resid = |n: usize| {
            let g = grid(n, n);
            let spec = ModelSpec {
                b: Func1::constant(1.0),
                alpha_s: Func3::constant((2.0_f64 * a).sqrt()),
                alpha_y: Func3::constant((2.0_f64 * c).sqrt()),
                drift_s: Func3::new("ou", move |_, s, _| -k1 * (s - 100.0)),
                drift_y: Func3::new("ou", move |_, _, y| -k2 * y),
                gamma: Func3::zero(),
                rho: convert_correlation(0.0).unwrap(),
                r: 0.0,
                s0: 100.0,
                y0: 0.0,
                eps: 1e-3,
            };
            let (vs, vy) = (a / k1, c / k2);
            let mut psi = vec![0.0; g.slice_len()];
            for i in 0..g.n_s() {
                for j in 0..g.n_y() {
                    let (ds, dy) = (g.s(i) - 100.0, g.y(j));
                    psi[g.idx(i, j)] = (-0.5 * (ds * ds / vs + dy * dy / vy)).exp();
                }
            }
            compatibility_residual(&psi, &spec, &g).unwrap()
        };
        let (r1, r2) = (resid(32), resid(64));
        assert!(r2 < r1 / 3.0, "{r1} -> {r2}");
    }
}
