//! Frozen-coefficient linear parabolic problem
//!
//! ```text
//! v_t = a_ss v_SS + 2 a_sy v_Sy + a_yy v_yy - b_s v_S - b_y v_y - c v + f
//! ```
//!
//! with Dirichlet data on the lateral boundary, advanced by a Craig–Sneyd ADI
//! scheme: implicit tridiagonal sweeps in S and y, explicit mixed derivative
//! and source.
//!
//! The divergence-form model operator is brought to this form by
//! differentiating the coefficient products with centred differences:
//! with `A = rho_ss alpha_s^2 R`, `C = rho_sy alpha_s alpha_y sqrt(R)`,
//! `B = rho_yy alpha_y^2`,
//!
//! ```text
//! b_s = beta_s - 2 A_S - 2 C_y        b_y = beta_y - 2 B_y - 2 C_S
//! c   = gamma + beta_s,S + beta_y,y - A_SS - 2 C_Sy - B_yy
//! ```
//!
//! where `R` is the frozen ratio (a constant `1/bar_b^2` or a field `I(t, S)`).

use std::sync::Arc;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field3, GridSpec};
use crate::model::{sym2_eigenvalues, ModelSpec};
use crate::par::Exec;
use crate::tridiag::Tridiagonal;

/// Coefficients of the linear operator on one time level, stored per node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSlice {
    pub a_ss: Vec<f64>,
    pub a_sy: Vec<f64>,
    pub a_yy: Vec<f64>,
    pub b_s: Vec<f64>,
    pub b_y: Vec<f64>,
    pub c: Vec<f64>,
}

impl CoefficientSlice {
    fn zeros(n: usize) -> Self {
        CoefficientSlice {
            a_ss: vec![0.0; n],
            a_sy: vec![0.0; n],
            a_yy: vec![0.0; n],
            b_s: vec![0.0; n],
            b_y: vec![0.0; n],
            c: vec![0.0; n],
        }
    }
}

/// Pointwise coefficients, used to build fields directly from formulas.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoefficientPoint {
    pub a_ss: f64,
    pub a_sy: f64,
    pub a_yy: f64,
    pub b_s: f64,
    pub b_y: f64,
    pub c: f64,
}

/// One coefficient slice per time level. Consecutive identical slices share
/// storage, which also lets the stepper skip the coefficient-change terms.
#[derive(Debug, Clone)]
pub struct CoefficientFields {
    pub grid: GridSpec,
    pub slices: Vec<Arc<CoefficientSlice>>,
    /// Smallest eigenvalue of the correlation matrix, when known; used to
    /// sanity-check the measured ellipticity.
    pub k_rho: Option<f64>,
}

impl CoefficientFields {
    pub fn from_fn(grid: &GridSpec, g: impl Fn(f64, f64, f64) -> CoefficientPoint) -> Self {
        let mut out = CoefficientFields {
            grid: *grid,
            slices: Vec::with_capacity(grid.n_t()),
            k_rho: None,
        };
        for k in 0..grid.n_t() {
            let t = grid.t(k);
            let mut cs = CoefficientSlice::zeros(grid.slice_len());
            for i in 0..grid.n_s() {
                for j in 0..grid.n_y() {
                    let q = grid.idx(i, j);
                    let p = g(t, grid.s(i), grid.y(j));
                    cs.a_ss[q] = p.a_ss;
                    cs.a_sy[q] = p.a_sy;
                    cs.a_yy[q] = p.a_yy;
                    cs.b_s[q] = p.b_s;
                    cs.b_y[q] = p.b_y;
                    cs.c[q] = p.c;
                }
            }
            out.push(cs);
        }
        out
    }

    fn push(&mut self, cs: CoefficientSlice) {
        match self.slices.last() {
            Some(prev) if **prev == cs => {
                let prev = Arc::clone(prev);
                self.slices.push(prev);
            }
            _ => self.slices.push(Arc::new(cs)),
        }
    }

    /// Number of distinct slices actually stored.
    pub fn distinct_slices(&self) -> usize {
        1 + self
            .slices
            .windows(2)
            .filter(|w| !Arc::ptr_eq(&w[0], &w[1]))
            .count()
    }

    /// Keeps the first `levels` time levels (for a shortened horizon).
    pub fn truncate(&self, levels: usize) -> CoefficientFields {
        CoefficientFields {
            grid: self.grid.with_steps(levels - 1),
            slices: self.slices[..levels].to_vec(),
            k_rho: self.k_rho,
        }
    }
}

/// Value of the frozen ratio `R` in the diffusion coefficients.
#[derive(Debug, Clone, Copy)]
pub enum FrozenRatio<'a> {
    Constant(f64),
    /// `(t, S)` field, one value per time level and S node.
    Field(&'a Field3),
}

/// Assembles one time level with ratio `ratio[i]` at S node `i`.
pub fn assemble_slice(spec: &ModelSpec, t: f64, ratio: &[f64], grid: &GridSpec) -> CoefficientSlice {
    let (ns, ny) = (grid.n_s(), grid.n_y());
    let n = grid.slice_len();
    debug_assert_eq!(ratio.len(), ns);
    let mut a = vec![0.0; n];
    let mut cr = vec![0.0; n];
    let mut bb = vec![0.0; n];
    let mut beta_s = vec![0.0; n];
    let mut beta_y = vec![0.0; n];
    let mut gamma = vec![0.0; n];
    for i in 0..ns {
        let s = grid.s(i);
        let r = ratio[i];
        let sr = r.sqrt();
        for j in 0..ny {
            let y = grid.y(j);
            let q = grid.idx(i, j);
            let a1 = spec.alpha_s.eval(t, s, y);
            let a2 = spec.alpha_y.eval(t, s, y);
            a[q] = spec.rho.ss * a1 * a1 * r;
            cr[q] = spec.rho.sy * a1 * a2 * sr;
            bb[q] = spec.rho.yy * a2 * a2;
            beta_s[q] = spec.eff_drift_s(t, s, y);
            beta_y[q] = spec.drift_y.eval(t, s, y);
            gamma[q] = spec.eff_gamma(t, s, y);
        }
    }
    let (hs, hy) = (grid.ds(), grid.dy());
    let mut cs = CoefficientSlice::zeros(n);
    cs.a_ss.copy_from_slice(&a);
    cs.a_sy.copy_from_slice(&cr);
    cs.a_yy.copy_from_slice(&bb);
    cs.b_s.copy_from_slice(&beta_s);
    cs.b_y.copy_from_slice(&beta_y);
    cs.c.copy_from_slice(&gamma);
    let d_s = |f: &[f64], q: usize| (f[q + ny] - f[q - ny]) / (2.0 * hs);
    let d_y = |f: &[f64], q: usize| (f[q + 1] - f[q - 1]) / (2.0 * hy);
    for i in 1..ns - 1 {
        for j in 1..ny - 1 {
            let q = grid.idx(i, j);
            let a_ss = (a[q + ny] - 2.0 * a[q] + a[q - ny]) / (hs * hs);
            let b_yy = (bb[q + 1] - 2.0 * bb[q] + bb[q - 1]) / (hy * hy);
            let c_sy = (cr[q + ny + 1] - cr[q + ny - 1] - cr[q - ny + 1] + cr[q - ny - 1]) / (4.0 * hs * hy);
            cs.b_s[q] = beta_s[q] - 2.0 * d_s(&a, q) - 2.0 * d_y(&cr, q);
            cs.b_y[q] = beta_y[q] - 2.0 * d_y(&bb, q) - 2.0 * d_s(&cr, q);
            cs.c[q] = gamma[q] + d_s(&beta_s, q) + d_y(&beta_y, q) - a_ss - 2.0 * c_sy - b_yy;
        }
    }
    cs
}

/// Non-divergence coefficients of the model operator with a frozen ratio, on
/// every time level of `grid`.
pub fn assemble_frozen(spec: &ModelSpec, ratio: FrozenRatio<'_>, grid: &GridSpec, exec: Exec) -> Result<CoefficientFields> {
    let ns = grid.n_s();
    if let FrozenRatio::Field(f) = ratio {
        if f.nt != grid.n_t() || f.nx != ns || f.ny != 1 {
            return Err(Error::InvalidGrid(format!(
                "frozen ratio field has shape {}x{}x{}",
                f.nt, f.nx, f.ny
            )));
        }
    }
    let ratio_row = |k: usize| -> Vec<f64> {
        match ratio {
            FrozenRatio::Constant(r) => vec![r; ns],
            FrozenRatio::Field(f) => f.slice(k).to_vec(),
        }
    };
    if ratio_row(0).iter().any(|r| !(*r > 0.0)) {
        return Err(Error::HypothesisViolation {
            name: "ratio",
            detail: "frozen ratio must be positive".into(),
        });
    }
    let slices = exec.map_range(grid.n_t(), |k| assemble_slice(spec, grid.t(k), &ratio_row(k), grid));
    let mut out = CoefficientFields {
        grid: *grid,
        slices: Vec::with_capacity(slices.len()),
        k_rho: Some(spec.rho.k_rho()),
    };
    for cs in slices {
        out.push(cs);
    }
    ellipticity_constant(&out)?;
    Ok(out)
}

/// Smallest eigenvalue of the diffusion matrix over all interior nodes and
/// time levels.
pub fn ellipticity_constant(fields: &CoefficientFields) -> Result<f64> {
    let g = &fields.grid;
    let mut k2 = f64::INFINITY;
    for (k, cs) in fields.slices.iter().enumerate() {
        if k > 0 && Arc::ptr_eq(cs, &fields.slices[k - 1]) {
            continue;
        }
        for i in 1..g.n_s() - 1 {
            for j in 1..g.n_y() - 1 {
                let q = g.idx(i, j);
                let (lo, _) = sym2_eigenvalues(cs.a_ss[q], cs.a_sy[q], cs.a_yy[q]);
                k2 = k2.min(lo);
            }
        }
    }
    if !(k2 > 0.0) {
        return Err(Error::NonElliptic { k2 });
    }
    Ok(k2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LateralBoundary {
    /// Values held at the initial data.
    Dirichlet,
    /// Zero normal derivative of the increments.
    ZeroFlux,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepConfig {
    pub theta: f64,
    /// Correction rounds for the explicit mixed term; 1 is plain Craig–Sneyd,
    /// more rounds iterate the cross term towards an implicit treatment.
    pub cross_iterations: usize,
    pub boundary: LateralBoundary,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            theta: 0.5,
            cross_iterations: 1,
            boundary: LateralBoundary::Dirichlet,
            exec: Exec::Parallel,
        }
    }
}

/// Running diagnostics of a sequence of steps.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StepStats {
    pub max_tridiagonal_residual: f64,
    pub max_cross_cfl: f64,
    pub tridiagonal_solves: usize,
}

impl StepStats {
    fn merge_residual(&mut self, r: f64, solves: usize) {
        self.max_tridiagonal_residual = self.max_tridiagonal_residual.max(r);
        self.tridiagonal_solves += solves;
    }
}

#[derive(Debug, Clone, Copy)]
enum Part {
    Cross,
    AlongS,
    AlongY,
}

/// Applies one operator part at the interior nodes; boundary entries are zero.
fn apply_part(part: Part, cs: &CoefficientSlice, v: &[f64], g: &GridSpec, exec: Exec) -> Vec<f64> {
    let (ns, ny) = (g.n_s(), g.n_y());
    let (hs, hy) = (g.ds(), g.dy());
    let mut out = vec![0.0; v.len()];
    exec.for_each_chunk(&mut out, ny, |i, row| {
        if i == 0 || i == ns - 1 {
            return;
        }
        for (j, o) in row.iter_mut().enumerate().take(ny - 1).skip(1) {
            let q = i * ny + j;
            *o = match part {
                Part::Cross => {
                    2.0 * cs.a_sy[q] * (v[q + ny + 1] - v[q + ny - 1] - v[q - ny + 1] + v[q - ny - 1])
                        / (4.0 * hs * hy)
                }
                Part::AlongS => {
                    cs.a_ss[q] * (v[q + ny] - 2.0 * v[q] + v[q - ny]) / (hs * hs)
                        - cs.b_s[q] * (v[q + ny] - v[q - ny]) / (2.0 * hs)
                        - 0.5 * cs.c[q] * v[q]
                }
                Part::AlongY => {
                    cs.a_yy[q] * (v[q + 1] - 2.0 * v[q] + v[q - 1]) / (hy * hy)
                        - cs.b_y[q] * (v[q + 1] - v[q - 1]) / (2.0 * hy)
                        - 0.5 * cs.c[q] * v[q]
                }
            };
        }
    });
    out
}

/// Full discrete operator `L v` at the interior nodes.
pub fn apply_operator(cs: &CoefficientSlice, v: &[f64], g: &GridSpec, exec: Exec) -> Vec<f64> {
    let mut out = apply_part(Part::Cross, cs, v, g, exec);
    for part in [Part::AlongS, Part::AlongY] {
        for (o, x) in out.iter_mut().zip(apply_part(part, cs, v, g, exec)) {
            *o += x;
        }
    }
    out
}

/// Builds `I - theta dt A_part` along one grid line.
fn line_system(
    part: Part,
    cs: &CoefficientSlice,
    g: &GridSpec,
    line: usize,
    theta_dt: f64,
    boundary: LateralBoundary,
) -> Tridiagonal {
    let (h, n, stride, base) = match part {
        Part::AlongS => (g.ds(), g.ns, g.n_y(), line),
        Part::AlongY => (g.dy(), g.ny, 1, line * g.n_y()),
        Part::Cross => unreachable!(),
    };
    let mut t = Tridiagonal::with_len(n);
    for m in 0..n {
        let q = base + (m + 1) * stride;
        let (a, b) = match part {
            Part::AlongS => (cs.a_ss[q], cs.b_s[q]),
            _ => (cs.a_yy[q], cs.b_y[q]),
        };
        let diff = a / (h * h);
        let adv = b / (2.0 * h);
        t.lower[m] = -theta_dt * (diff + adv);
        t.upper[m] = -theta_dt * (diff - adv);
        t.diag[m] = 1.0 + theta_dt * (2.0 * diff + 0.5 * cs.c[q]);
    }
    if boundary == LateralBoundary::ZeroFlux {
        t.diag[0] += t.lower[0];
        t.diag[n - 1] += t.upper[n - 1];
    }
    t
}

/// Solves `(I - theta dt A_part) z = rhs` along every interior line, in place.
fn sweep(
    part: Part,
    cs: &CoefficientSlice,
    rhs: &mut [f64],
    g: &GridSpec,
    theta_dt: f64,
    cfg: &StepConfig,
    stats: &mut StepStats,
) -> Result<()> {
    let ny = g.n_y();
    let (lines, n, stride, base): (usize, usize, usize, fn(usize, usize) -> usize) = match part {
        Part::AlongS => (g.ny, g.ns, ny, |line, _| line + 1),
        Part::AlongY => (g.ns, g.ny, 1, |line, ny| (line + 1) * ny),
        Part::Cross => unreachable!(),
    };
    let src: &[f64] = rhs;
    let solved = cfg.exec.map_range(lines, |line| -> Result<(Vec<f64>, f64)> {
        let start = base(line, ny);
        let sys = line_system(part, cs, g, line + 1, theta_dt, cfg.boundary);
        let b: Vec<f64> = (0..n).map(|m| src[start + (m + 1) * stride]).collect();
        let mut x = b.clone();
        sys.solve_in_place(&mut x, &mut Vec::with_capacity(n))?;
        let res = sys.relative_residual(&x, &b);
        Ok((x, res))
    });
    let count = solved.len();
    let mut worst: f64 = 0.0;
    for (line, r) in solved.into_iter().enumerate() {
        let (x, res) = r?;
        worst = worst.max(res);
        let start = base(line, ny);
        for (m, v) in x.into_iter().enumerate() {
            rhs[start + (m + 1) * stride] = v;
        }
    }
    stats.merge_residual(worst, count);
    Ok(())
}

/// Copies interior increments to the boundary (zero-flux option).
fn reflect_boundary(z: &mut [f64], g: &GridSpec) {
    let (ns, ny) = (g.n_s(), g.n_y());
    for i in 0..ns {
        z[i * ny] = z[i * ny + 1];
        z[i * ny + ny - 1] = z[i * ny + ny - 2];
    }
    for j in 0..ny {
        z[j] = z[ny + j];
        z[(ns - 1) * ny + j] = z[(ns - 2) * ny + j];
    }
}

fn zero_boundary(z: &mut [f64], g: &GridSpec) {
    let (ns, ny) = (g.n_s(), g.n_y());
    for i in 0..ns {
        z[i * ny] = 0.0;
        z[i * ny + ny - 1] = 0.0;
    }
    z[..ny].fill(0.0);
    z[(ns - 1) * ny..].fill(0.0);
}

/// Source terms at the two ends of a step.
#[derive(Debug, Clone, Copy)]
pub struct StepSource<'a> {
    pub now: Option<&'a [f64]>,
    pub next: Option<&'a [f64]>,
}

impl StepSource<'_> {
    pub const NONE: StepSource<'static> = StepSource {
        now: None,
        next: None,
    };
}

/// Largest explicit cross-term Courant number `2 dt |a_sy| / (dS dy)`.
pub fn cross_cfl(cs: &CoefficientSlice, g: &GridSpec, dt: f64) -> f64 {
    let m = cs.a_sy.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    2.0 * dt * m / (g.ds() * g.dy())
}

/// One Craig–Sneyd step from `v` (level n) with coefficients `now` and `next`.
#[allow(clippy::too_many_arguments)]
pub fn step_linear(
    now: &Arc<CoefficientSlice>,
    next: &Arc<CoefficientSlice>,
    v: &[f64],
    source: StepSource<'_>,
    dt: f64,
    g: &GridSpec,
    cfg: &StepConfig,
    stats: &mut StepStats,
) -> Result<Vec<f64>> {
    let exec = cfg.exec;
    let n = v.len();
    let theta_dt = cfg.theta * dt;
    let same = Arc::ptr_eq(now, next);
    stats.max_cross_cfl = stats.max_cross_cfl.max(cross_cfl(next, g, dt));

    let a0v = apply_part(Part::Cross, now, v, g, exec);
    let a1v = apply_part(Part::AlongS, now, v, g, exec);
    let a2v = apply_part(Part::AlongY, now, v, g, exec);
    // Coefficient-change terms theta dt (A_i^{n+1} - A_i^n) v.
    let (d1, d2) = if same {
        (None, None)
    } else {
        let a1n = apply_part(Part::AlongS, next, v, g, exec);
        let a2n = apply_part(Part::AlongY, next, v, g, exec);
        let d1: Vec<f64> = a1n.iter().zip(&a1v).map(|(x, y)| theta_dt * (x - y)).collect();
        let d2: Vec<f64> = a2n.iter().zip(&a2v).map(|(x, y)| theta_dt * (x - y)).collect();
        (Some(d1), Some(d2))
    };

    // Y0 - v
    let mut y0 = vec![0.0; n];
    for q in 0..n {
        let mut rate = a0v[q] + a1v[q] + a2v[q];
        if let Some(f) = source.now {
            rate += f[q];
        }
        y0[q] = dt * rate;
    }
    if source.now.is_some() {
        // sources live on the interior only
        zero_boundary(&mut y0, g);
    }

    let directional = |rhs0: &[f64], stats: &mut StepStats| -> Result<Vec<f64>> {
        let mut z = rhs0.to_vec();
        if let Some(d) = &d1 {
            for (a, b) in z.iter_mut().zip(d) {
                *a += b;
            }
        }
        sweep(Part::AlongS, next, &mut z, g, theta_dt, cfg, stats)?;
        if let Some(d) = &d2 {
            for (a, b) in z.iter_mut().zip(d) {
                *a += b;
            }
        }
        sweep(Part::AlongY, next, &mut z, g, theta_dt, cfg, stats)?;
        match cfg.boundary {
            LateralBoundary::Dirichlet => zero_boundary(&mut z, g),
            LateralBoundary::ZeroFlux => reflect_boundary(&mut z, g),
        }
        Ok(z)
    };

    let mut z = directional(&y0, stats)?;
    for _ in 0..cfg.cross_iterations.max(1) {
        // Y2 = v + z
        let y2: Vec<f64> = v.iter().zip(&z).map(|(a, b)| a + b).collect();
        let a0n = apply_part(Part::Cross, next, &y2, g, exec);
        let mut corrected = y0.clone();
        for q in 0..n {
            let mut delta = a0n[q] - a0v[q];
            if let Some(f) = source.next {
                delta += f[q];
            }
            if let Some(f) = source.now {
                delta -= f[q];
            }
            corrected[q] += 0.5 * dt * delta;
        }
        if source.now.is_some() || source.next.is_some() {
            zero_boundary(&mut corrected, g);
        }
        z = directional(&corrected, stats)?;
    }

    let out: Vec<f64> = v.iter().zip(&z).map(|(a, b)| a + b).collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::StabilityFailure("non-finite value after ADI step".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearSolveReport {
    pub k2: f64,
    pub max_residual: f64,
    pub max_cross_cfl: f64,
    pub steps: usize,
    /// Tridiagonal solves per step.
    pub solves_per_step: usize,
    pub cross_iterations: usize,
}

/// Trajectory from initial/boundary data `psi` over every step of `fields`.
pub fn solve_linear(
    fields: &CoefficientFields,
    psi: &[f64],
    source: Option<&Field3>,
    cfg: &StepConfig,
) -> Result<(Field3, LinearSolveReport)> {
    let g = fields.grid;
    if psi.len() != g.slice_len() || fields.slices.len() != g.n_t() {
        return Err(Error::InvalidGrid("data does not match the grid".into()));
    }
    if let Some(f) = source {
        if f.nt != g.n_t() || f.slice_len() != g.slice_len() {
            return Err(Error::InvalidGrid("source does not match the grid".into()));
        }
    }
    let k2 = ellipticity_constant(fields)?;
    if let Some(k_rho) = fields.k_rho {
        debug_assert!(k2 > 0.0 && k_rho > 0.0);
    }
    let dt = g.dt();
    let mut out = Field3::on_grid(&g);
    out.slice_mut(0).copy_from_slice(psi);
    let mut stats = StepStats::default();
    for k in 0..g.nt {
        let src = StepSource {
            now: source.map(|f| f.slice(k)),
            next: source.map(|f| f.slice(k + 1)),
        };
        let v = out.slice(k).to_vec();
        let next = step_linear(&fields.slices[k], &fields.slices[k + 1], &v, src, dt, &g, cfg, &mut stats)?;
        out.slice_mut(k + 1).copy_from_slice(&next);
    }
    if stats.max_cross_cfl > 1.0 {
        warn!(
            "explicit cross-term Courant number {:.3} exceeds 1",
            stats.max_cross_cfl
        );
    }
    let steps = g.nt;
    Ok((
        out,
        LinearSolveReport {
            k2,
            max_residual: stats.max_tridiagonal_residual,
            max_cross_cfl: stats.max_cross_cfl,
            steps,
            solves_per_step: stats.tridiagonal_solves / steps.max(1),
            cross_iterations: cfg.cross_iterations.max(1),
        },
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeBoundCurve {
    pub times: Vec<f64>,
    /// `|u(t)|_0 / (t |f|_0)`.
    pub ratios: Vec<f64>,
    /// Supremum of the curve (empirical `K_0`).
    pub k0: f64,
}

/// Solves with zero initial/boundary data and source `f`, and records
/// `|u(t)|_0 / (t |f|_0)` at every time level after the first.
pub fn supnorm_time_bound(fields: &CoefficientFields, f: &Field3, cfg: &StepConfig) -> Result<TimeBoundCurve> {
    let g = fields.grid;
    let zero = vec![0.0; g.slice_len()];
    let (u, _) = solve_linear(fields, &zero, Some(f), cfg)?;
    let f0 = f.sup_norm();
    let mut times = Vec::with_capacity(g.nt);
    let mut ratios = Vec::with_capacity(g.nt);
    for k in 1..g.n_t() {
        let t = g.t(k);
        let sup = u.slice(k).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        times.push(t);
        ratios.push(if f0 > 0.0 { sup / (t * f0) } else { 0.0 });
    }
    let k0 = ratios.iter().copied().fold(0.0, f64::max);
    Ok(TimeBoundCurve { times, ratios, k0 })
}
