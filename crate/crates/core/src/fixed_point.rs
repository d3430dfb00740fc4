//! The map `M` and the iteration `p_{n+1} = M(p_n)`.
//!
//! `M(u)` freezes the ratio at `1/bar_b^2` in the diffusion and moves the
//! error of that approximation to the right-hand side:
//!
//! ```text
//! O'(v) = d_SS(rho_ss alpha_s^2 (I(u) - 1/bar_b^2) u)
//!       + 2 d_Sy(rho_sy alpha_s alpha_y (sqrt(I(u)) - 1/bar_b) u)
//! ```
//!
//! where `O'` is the model operator with `I` replaced by `1/bar_b^2`. A fixed
//! point solves the full nonlinear equation. Iterates must stay in the set
//! `X` of densities with `p_lower/2 <= p <= p_upper + p_lower/2` and a capped
//! `|.|_{2+h}` norm.

use log::{debug, info, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field3, GridSpec};
use crate::holder::{holder_norm, PairMode};
use crate::linpde::{
    assemble_frozen, assemble_slice, solve_linear, step_linear, CoefficientFields, FrozenRatio,
    LinearSolveReport, StepConfig, StepSource, StepStats,
};
use crate::model::{measure_b_star, InitialDensity, ModelSpec};
use crate::nonlocal::{lemma1_monitor, ratio_from_b2, ratio_gaps, MonitorRecord, DEFAULT_EPS_DEN};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Every application of `M` solves over the whole horizon.
    FixedPoint,
    /// One forward sweep with the ratio lagged by one time step.
    TimeLagged,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct XSetParams {
    pub x_star: f64,
    pub p_lower0: f64,
    pub p_upper0: f64,
    pub t_star: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FixedPointConfig {
    pub mode: Mode,
    pub max_iter: usize,
    /// Stopping tolerance relative to `sup psi`.
    pub tol_rel: f64,
    pub x_star_factor: f64,
    pub max_halvings: usize,
    /// Evaluate the ratio-gap monitor on every iterate.
    pub monitor: bool,
    pub eps_den: f64,
    pub step: StepConfig,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            mode: Mode::FixedPoint,
            max_iter: 50,
            tol_rel: 1e-8,
            x_star_factor: 1.5,
            max_halvings: 6,
            monitor: true,
            eps_den: DEFAULT_EPS_DEN,
            step: StepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Membership {
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub norm_ok: bool,
    pub min: f64,
    pub max: f64,
    pub norm: f64,
}

impl Membership {
    pub fn passed(&self) -> bool {
        self.lower_ok && self.upper_ok && self.norm_ok
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Contraction {
    pub ratio: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointReport {
    pub mode: Mode,
    /// `sup |p_{n+1} - p_n|` per completed iteration.
    pub residuals: Vec<f64>,
    /// `|p_{n+1}|_{2+h}` per completed iteration.
    pub norms: Vec<f64>,
    pub membership: Vec<Membership>,
    pub monitor: Vec<MonitorRecord>,
    pub contraction: Option<Contraction>,
    pub t_star: f64,
    pub converged: bool,
    pub iterations: usize,
    pub halvings: usize,
    pub x_star: f64,
    pub tol: f64,
    /// Whether the residuals decreased monotonically.
    pub cauchy: bool,
    /// Largest single-step discrepancy of the converged density against the
    /// full nonlinear scheme.
    pub consistency_residual: Option<f64>,
    pub solver: Option<LinearSolveReport>,
}

impl FixedPointReport {
    /// Report with no iterations recorded yet.
    pub fn empty(mode: Mode, params: &XSetParams) -> Self {
        FixedPointReport {
            mode,
            residuals: Vec::new(),
            norms: Vec::new(),
            membership: Vec::new(),
            monitor: Vec::new(),
            contraction: None,
            t_star: params.t_star,
            converged: false,
            iterations: 0,
            halvings: 0,
            x_star: params.x_star,
            tol: params.tol,
            cauchy: true,
            consistency_residual: None,
            solver: None,
        }
    }
}

/// Everything that stays fixed across applications of `M`.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub spec: &'a ModelSpec,
    pub grid: GridSpec,
    pub initial: &'a InitialDensity,
    pub bar_b: f64,
    pub b_star: f64,
    frozen: CoefficientFields,
    b2: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(spec: &'a ModelSpec, grid: &GridSpec, initial: &'a InitialDensity, exec: Exec) -> Result<Self> {
        if initial.psi.len() != grid.slice_len() {
            return Err(Error::InvalidGrid("initial density does not match the grid".into()));
        }
        let bar_b = spec.bar_b();
        let frozen = assemble_frozen(spec, FrozenRatio::Constant(1.0 / (bar_b * bar_b)), grid, exec)?;
        Ok(Problem {
            spec,
            grid: *grid,
            initial,
            bar_b,
            b_star: measure_b_star(&spec.b, grid),
            frozen,
            b2: spec.b2_nodes(grid),
        })
    }

    /// Same problem on the first `steps` time steps.
    pub fn with_steps(&self, steps: usize) -> Problem<'a> {
        let frozen = self.frozen.truncate(steps + 1);
        Problem {
            grid: frozen.grid,
            frozen,
            ..self.clone()
        }
    }

    pub fn frozen(&self) -> &CoefficientFields {
        &self.frozen
    }

    /// `p_0`: the initial density held constant in time.
    pub fn p0(&self) -> Field3 {
        Field3::extend_in_time(&self.grid, &self.initial.psi)
    }

    /// Solution of the frozen linear problem with no source.
    pub fn frozen_solution(&self, cfg: &StepConfig) -> Result<(Field3, LinearSolveReport)> {
        solve_linear(&self.frozen, &self.initial.psi, None, cfg)
    }
}

/// Right-hand side of the frozen equation generated by `u`, on every level.
pub fn build_rhs(u: &Field3, problem: &Problem<'_>, eps_den: f64, exec: Exec) -> Result<Field3> {
    let g = &problem.grid;
    let spec = problem.spec;
    let (ns, ny) = (g.n_s(), g.n_y());
    let (hs, hy) = (g.ds(), g.dy());
    if u.nt != g.n_t() || u.slice_len() != g.slice_len() {
        return Err(Error::InvalidGrid("density does not match the grid".into()));
    }
    let levels = exec.map_range(g.n_t(), |k| -> Result<Vec<f64>> {
        let p = u.slice(k);
        let (gap, sqrt_gap) = ratio_gaps(p, &problem.b2, problem.bar_b, g, eps_den)?;
        let mut f = vec![0.0; p.len()];
        if gap.iter().all(|&v| v == 0.0) {
            return Ok(f);
        }
        let t = g.t(k);
        let mut p1 = vec![0.0; p.len()];
        let mut p2 = vec![0.0; p.len()];
        for i in 0..ns {
            let s = g.s(i);
            for j in 0..ny {
                let y = g.y(j);
                let q = i * ny + j;
                let a1 = spec.alpha_s.eval(t, s, y);
                let a2 = spec.alpha_y.eval(t, s, y);
                p1[q] = spec.rho.ss * a1 * a1 * gap[i] * p[q];
                p2[q] = spec.rho.sy * a1 * a2 * sqrt_gap[i] * p[q];
            }
        }
        for i in 1..ns - 1 {
            for j in 1..ny - 1 {
                let q = i * ny + j;
                let d_ss = (p1[q + ny] - 2.0 * p1[q] + p1[q - ny]) / (hs * hs);
                let d_sy = (p2[q + ny + 1] - p2[q + ny - 1] - p2[q - ny + 1] + p2[q - ny - 1]) / (4.0 * hs * hy);
                f[q] = d_ss + 2.0 * d_sy;
            }
        }
        Ok(f)
    });
    let mut out = Field3::on_grid(g);
    for (k, level) in levels.into_iter().enumerate() {
        out.slice_mut(k).copy_from_slice(&level?);
    }
    Ok(out)
}

/// `v = M(u)`.
pub fn apply_m(u: &Field3, problem: &Problem<'_>, cfg: &FixedPointConfig) -> Result<(Field3, LinearSolveReport)> {
    let f = build_rhs(u, problem, cfg.eps_den, cfg.step.exec)?;
    // A vanishing gap reduces M to the plain linear solve, bit for bit.
    let source = (f.sup_norm() > 0.0).then_some(&f);
    solve_linear(&problem.frozen, &problem.initial.psi, source, &cfg.step)
}

pub fn membership_check(p: &Field3, params: &XSetParams, h: f64, exec: Exec) -> Membership {
    let min = p.min();
    let max = p.max();
    let norm = holder_norm(p, 2, h, PairMode::Neighbor, exec).value;
    Membership {
        lower_ok: min >= 0.5 * params.p_lower0,
        upper_ok: max <= params.p_upper0 + 0.5 * params.p_lower0,
        norm_ok: norm <= params.x_star,
        min,
        max,
        norm,
    }
}

/// Membership parameters for `problem`.
///
/// The norm cap is `factor * max(|p_0|_{2+h}, |v_0|_{2+h})`, with `v_0` the
/// source-free frozen solution: it plays the part of the Schauder bound of
/// the boundary data, which has no closed form.
pub fn x_set_params(problem: &Problem<'_>, cfg: &FixedPointConfig) -> Result<XSetParams> {
    let h = problem.grid.holder;
    let exec = cfg.step.exec;
    let p0 = problem.p0();
    let n0 = holder_norm(&p0, 2, h, PairMode::Neighbor, exec).value;
    let (v0, _) = problem.frozen_solution(&cfg.step)?;
    let nv = holder_norm(&v0, 2, h, PairMode::Neighbor, exec).value;
    Ok(XSetParams {
        x_star: cfg.x_star_factor * n0.max(nv),
        p_lower0: problem.initial.lower,
        p_upper0: problem.initial.upper,
        t_star: problem.grid.t_end,
        tol: cfg.tol_rel * problem.initial.upper,
    })
}

/// Least-squares fit of `log r_n` against `n`, over residuals above the
/// round-off floor. Needs at least three points.
pub fn fit_contraction(residuals: &[f64], floor: f64) -> Option<Contraction> {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > floor)
        .map(|(n, r)| (n as f64, r.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some(Contraction {
        ratio: slope.exp(),
        r_squared,
        points: pts.len(),
    })
}

/// `max_k sup |p^{k+1} - Step(p^k)|` with the source generated by `p` itself.
pub fn consistency_residual(p: &Field3, problem: &Problem<'_>, cfg: &FixedPointConfig) -> Result<f64> {
    let f = build_rhs(p, problem, cfg.eps_den, cfg.step.exec)?;
    let zero = f.sup_norm() == 0.0;
    let g = &problem.grid;
    let mut stats = StepStats::default();
    let mut worst: f64 = 0.0;
    for k in 0..g.nt {
        let src = if zero {
            StepSource::NONE
        } else {
            StepSource {
                now: Some(f.slice(k)),
                next: Some(f.slice(k + 1)),
            }
        };
        let next = step_linear(
            &problem.frozen.slices[k],
            &problem.frozen.slices[k + 1],
            p.slice(k),
            src,
            g.dt(),
            g,
            &cfg.step,
            &mut stats,
        )?;
        let d = next
            .iter()
            .zip(p.slice(k + 1))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(d);
    }
    Ok(worst)
}

fn finish(report: &mut FixedPointReport, params: &XSetParams) {
    report.contraction = fit_contraction(&report.residuals, 1e-3 * params.tol);
    report.cauchy = report.residuals.windows(2).all(|w| w[1] <= w[0]);
    if !report.cauchy {
        warn!("fixed-point residuals are not monotone: {:?}", report.residuals);
    }
}

/// Runs the iteration from `p_0` until the residual drops below `params.tol`.
pub fn iterate(problem: &Problem<'_>, params: &XSetParams, cfg: &FixedPointConfig) -> Result<(Field3, FixedPointReport)> {
    match cfg.mode {
        Mode::FixedPoint => iterate_global(problem, params, cfg),
        Mode::TimeLagged => time_lagged(problem, params, cfg),
    }
}

fn record_monitor(p: &Field3, norm: f64, problem: &Problem<'_>, params: &XSetParams, cfg: &FixedPointConfig, report: &mut FixedPointReport) {
    if !cfg.monitor {
        return;
    }
    match lemma1_monitor(
        p,
        &problem.spec.b,
        problem.bar_b,
        problem.b_star,
        params.p_lower0,
        &problem.grid,
        Some(norm),
        cfg.step.exec,
    ) {
        Ok(rec) => report.monitor.push(rec),
        Err(e) => debug!("monitor skipped: {e}"),
    }
}

fn iterate_global(problem: &Problem<'_>, params: &XSetParams, cfg: &FixedPointConfig) -> Result<(Field3, FixedPointReport)> {
    let h = problem.grid.holder;
    let exec = cfg.step.exec;
    let mut report = FixedPointReport::empty(Mode::FixedPoint, params);
    let mut p = problem.p0();
    for n in 0..cfg.max_iter {
        let (next, solve) = apply_m(&p, problem, cfg)?;
        let residual = next.sup_distance(&p);
        let membership = membership_check(&next, params, h, exec);
        report.residuals.push(residual);
        report.norms.push(membership.norm);
        report.membership.push(membership);
        report.iterations = n + 1;
        report.solver = Some(solve);
        record_monitor(&next, membership.norm, problem, params, cfg, &mut report);
        debug!(
            "iteration {}: residual {residual:.3e}, norm {:.4e}, min {:.3e}, max {:.3e}",
            n + 1,
            membership.norm,
            membership.min,
            membership.max
        );
        p = next;
        if !membership.passed() {
            finish(&mut report, params);
            return Err(Error::MembershipLost {
                iteration: n + 1,
                report: Box::new(report),
            });
        }
        if residual <= params.tol {
            report.converged = true;
            break;
        }
    }
    finish(&mut report, params);
    if !report.converged {
        return Err(Error::NotConverged(Box::new(report)));
    }
    report.consistency_residual = Some(consistency_residual(&p, problem, cfg)?);
    info!(
        "fixed point converged after {} iterations on [0, {}]",
        report.iterations, params.t_star
    );
    Ok((p, report))
}

/// Single forward sweep, assembling every step with `I(p^n)`.
fn time_lagged(problem: &Problem<'_>, params: &XSetParams, cfg: &FixedPointConfig) -> Result<(Field3, FixedPointReport)> {
    let g = &problem.grid;
    let spec = problem.spec;
    let mut report = FixedPointReport::empty(Mode::TimeLagged, params);
    let mut p = Field3::on_grid(g);
    p.slice_mut(0).copy_from_slice(&problem.initial.psi);
    let mut stats = StepStats::default();
    for k in 0..g.nt {
        let ratio = ratio_from_b2(p.slice(k), &problem.b2, g, cfg.eps_den)?.ratio;
        let now = std::sync::Arc::new(assemble_slice(spec, g.t(k), &ratio, g));
        let next = std::sync::Arc::new(assemble_slice(spec, g.t(k + 1), &ratio, g));
        let v = p.slice(k).to_vec();
        let out = step_linear(&now, &next, &v, StepSource::NONE, g.dt(), g, &cfg.step, &mut stats)?;
        p.slice_mut(k + 1).copy_from_slice(&out);
    }
    let membership = membership_check(&p, params, g.holder, cfg.step.exec);
    report.norms.push(membership.norm);
    report.membership.push(membership);
    report.iterations = 1;
    record_monitor(&p, membership.norm, problem, params, cfg, &mut report);
    if !membership.passed() {
        return Err(Error::MembershipLost {
            iteration: 1,
            report: Box::new(report),
        });
    }
    report.converged = true;
    Ok((p, report))
}

/// Outcome of [`shrink_horizon`].
#[derive(Debug, Clone)]
pub struct HorizonSearch {
    pub params: XSetParams,
    pub steps: usize,
    pub halvings: usize,
    pub density: Field3,
    pub report: FixedPointReport,
}

/// Runs [`iterate`], halving the horizon after each failure.
pub fn shrink_horizon(problem: &Problem<'_>, params: &XSetParams, cfg: &FixedPointConfig) -> Result<HorizonSearch> {
    let mut steps = problem.grid.nt;
    let mut halvings = 0;
    loop {
        let sub = if steps == problem.grid.nt {
            problem.clone()
        } else {
            problem.with_steps(steps)
        };
        let trial = XSetParams {
            t_star: sub.grid.t_end,
            ..*params
        };
        match iterate(&sub, &trial, cfg) {
            Ok((density, mut report)) => {
                report.halvings = halvings;
                return Ok(HorizonSearch {
                    params: trial,
                    steps,
                    halvings,
                    density,
                    report,
                });
            }
            Err(Error::MembershipLost { report, .. }) | Err(Error::NotConverged(report)) => {
                if halvings >= cfg.max_halvings || steps < 2 {
                    let mut report = report;
                    report.halvings = halvings;
                    return Err(Error::HorizonExhausted { halvings, report });
                }
                warn!(
                    "fixed point failed on [0, {}]; halving the horizon",
                    trial.t_star
                );
                halvings += 1;
                steps /= 2;
            }
            Err(e) => return Err(e),
        }
    }
}
