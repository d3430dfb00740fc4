//! End-to-end calibration: quotes → implied surface → Dupire local vol →
//! fixed point for the joint density → leverage, marginals and checks.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;

use super::config::{RunConfig, SnapshotFormat};
use super::output::{snapshot_bin, snapshot_csv, ts_csv, write_atomic, write_json};
use crate::error::{Error, Result};
use crate::fixed_point::{
    shrink_horizon, x_set_params, FixedPointConfig, FixedPointReport, Mode, Problem, XSetParams,
};
use crate::grid::{Field3, GridSpec};
use crate::linpde::{assemble_frozen, solve_linear, FrozenRatio, StepConfig};
use crate::market::bs::call_price;
use crate::market::{
    build_implied_surface, dupire_forward_solve, dupire_local_vol, load_quotes, ForwardConfig,
    LocalVolConfig, LocalVolSurface, OptionQuote, QuoteValue,
};
use crate::model::{
    convert_correlation, relative_floor, smoothed_dirac, validate_model, Func3, ModelSpec,
    ValidationReport,
};
use crate::nonlocal::{leverage, marginal, ratio_field, ratio_integrals};
use crate::par::Exec;

/// Overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub verify: Option<bool>,
    pub snapshot_every: Option<usize>,
    pub exec: Exec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// Converged and every enabled check within tolerance.
    Success,
    /// Converged, but a verification check failed.
    VerificationFailed,
    /// No horizon on which the iteration converged.
    HorizonExhausted,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::VerificationFailed | RunStatus::HorizonExhausted => 2,
        }
    }
}

/// Exit code for an error that aborted the run before any artifact.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged(_) | Error::MembershipLost { .. } | Error::HorizonExhausted { .. } => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaturityCheck {
    pub maturity: f64,
    pub level: usize,
    pub l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepriceCheck {
    pub maturity: f64,
    pub strike: f64,
    pub model: f64,
    pub market: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorSummary {
    pub records: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub lhs_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// `|q_p - q_D|_1` at each quoted maturity up to `T*` and at `T*`.
    pub marginal_l1: Vec<MaturityCheck>,
    pub max_l1: f64,
    pub l1_tol: f64,
    /// Same distance for the run with `a = sigma_D` (ratio ignored).
    pub uncorrected_l1: Vec<MaturityCheck>,
    pub uncorrected_max_l1: f64,
    /// Part of `|q_p - q_D|_1` at `T*` carried by the outer tenth of the S
    /// range at either end, where the fixed lateral data bites.
    pub boundary_layer_l1: f64,
    pub repricing: Vec<RepriceCheck>,
    /// Informational: includes the smoothing of the initial Dirac mass.
    pub max_repricing_error: f64,
    /// `max_k |m_k - e^{-r t_k} m_0|` for the 2D density.
    pub mass_drift: f64,
    pub mass_drift_dupire: f64,
    /// `max |a^2 int b^2 p / int p - sigma_D^2| / sigma_D^2`.
    pub identity_max_rel: f64,
    pub identity_tol: f64,
    pub monitor: MonitorSummary,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub config: RunConfig,
    pub validation: ValidationReport,
    pub local_vol_degenerate_fraction: f64,
    pub eps_den: f64,
    pub x_set: XSetParams,
    pub t_star: f64,
    pub steps: usize,
    pub halvings: usize,
    pub fixed_point: FixedPointReport,
    pub verification: Option<VerificationReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub status: RunStatus,
    pub output_dir: PathBuf,
    pub report: RunReport,
}

/// Call prices `sum_i w_i (S_i - K)^+ q(T, S_i)` for each `(T, K)`, with `q`
/// a `(t, S)` field of discounted marginal densities and `T` interpolated
/// linearly between time levels.
pub fn reprice_calls(q: &Field3, grid: &GridSpec, options: &[(f64, f64)]) -> Vec<f64> {
    let w = grid.s_weights();
    let price_at = |k: usize, strike: f64| -> f64 {
        (0..q.nx)
            .map(|i| w[i] * (grid.s(i) - strike).max(0.0) * q.get(k, i, 0))
            .sum()
    };
    options
        .iter()
        .map(|&(t, strike)| {
            let x = (t / q.dt).clamp(0.0, (q.nt - 1) as f64);
            let k = (x.floor() as usize).min(q.nt - 1);
            let frac = x - k as f64;
            let lo = price_at(k, strike);
            if frac > 0.0 && k + 1 < q.nt {
                lo + frac * (price_at(k + 1, strike) - lo)
            } else {
                lo
            }
        })
        .collect()
}

/// `sum_i w_i |a_i - b_i|` on level `k` of two `(t, S)` fields.
fn l1_at(a: &Field3, b: &Field3, k: usize, w: &[f64]) -> f64 {
    (0..a.nx).map(|i| w[i] * (a.get(k, i, 0) - b.get(k, i, 0)).abs()).sum()
}

fn marginal_field(p: &Field3, grid: &GridSpec) -> Field3 {
    let mut q = Field3::zeros(p.nt, grid.n_s(), 1, p.dt, grid.ds(), 1.0);
    for k in 0..p.nt {
        q.slice_mut(k).copy_from_slice(&marginal(p.slice(k), grid));
    }
    q
}

fn truncate_local_vol(lv: &LocalVolSurface, levels: usize) -> LocalVolSurface {
    let ns = lv.spots.len();
    LocalVolSurface {
        times: lv.times[..levels].to_vec(),
        spots: lv.spots.clone(),
        sigma: lv.sigma[..levels * ns].to_vec(),
        degenerate_fraction: lv.degenerate_fraction,
    }
}

/// Inputs of [`verify_calibration`] beyond the density itself.
pub struct VerifyContext<'a> {
    pub quotes: &'a [OptionQuote],
    pub s0: f64,
    pub r: f64,
    pub eps_den: f64,
    pub l1_tol: f64,
    pub identity_tol: f64,
    pub step: StepConfig,
    pub report: &'a FixedPointReport,
}

/// Derived fields shared by verification and the artifacts.
pub struct CalibratedFields {
    pub ratio: Field3,
    pub leverage: Field3,
    pub q_p: Field3,
    pub q_d: Field3,
}

pub fn calibrated_fields(p: &Field3, lv: &LocalVolSurface, spec: &ModelSpec, grid: &GridSpec, eps_den: f64, exec: Exec) -> Result<CalibratedFields> {
    let ratio = ratio_field(p, &spec.b, grid, eps_den, exec)?;
    let sigma = lv.to_field(grid.dt(), grid.ds());
    let leverage = leverage(&sigma, &ratio);
    let q_p = marginal_field(p, grid);
    let q_d = dupire_forward_solve(lv, spec.r, q_p.slice(0), &ForwardConfig::default())?;
    Ok(CalibratedFields {
        ratio,
        leverage,
        q_p,
        q_d,
    })
}

/// Checks the converged density against the Dupire marginal and the quotes.
/// `lv` and `grid` must cover exactly the time levels of `p`.
pub fn verify_calibration(
    p: &Field3,
    fields: &CalibratedFields,
    lv: &LocalVolSurface,
    spec: &ModelSpec,
    grid: &GridSpec,
    ctx: &VerifyContext<'_>,
) -> Result<VerificationReport> {
    let t_star = grid.t_end;
    let w = grid.s_weights();
    let dt = grid.dt();

    let mut maturities: Vec<f64> = ctx
        .quotes
        .iter()
        .map(|q| q.maturity)
        .filter(|t| *t <= t_star + 1e-12)
        .collect();
    maturities.push(t_star);
    maturities.sort_by(f64::total_cmp);
    maturities.dedup_by(|a, b| (*a - *b).abs() < 0.5 * dt);
    let levels: Vec<(f64, usize)> = maturities
        .iter()
        .map(|&t| (t, ((t / dt).round() as usize).min(grid.nt)))
        .collect();

    let checks = |q: &Field3| -> Vec<MaturityCheck> {
        levels
            .iter()
            .map(|&(maturity, level)| MaturityCheck {
                maturity,
                level,
                l1: l1_at(q, &fields.q_d, level, &w),
            })
            .collect()
    };
    let marginal_l1 = checks(&fields.q_p);
    let max_l1 = marginal_l1.iter().map(|c| c.l1).fold(0.0, f64::max);

    let plain = assemble_frozen(spec, FrozenRatio::Constant(1.0), grid, ctx.step.exec)?;
    let (p_plain, _) = solve_linear(&plain, p.slice(0), None, &ctx.step)?;
    let uncorrected_l1 = checks(&marginal_field(&p_plain, grid));
    let uncorrected_max_l1 = uncorrected_l1.iter().map(|c| c.l1).fold(0.0, f64::max);

    let edge = 0.1 * (grid.s_max - grid.s_min);
    let boundary_layer_l1 = (0..grid.n_s())
        .filter(|&i| grid.s(i) < grid.s_min + edge || grid.s(i) > grid.s_max - edge)
        .map(|i| w[i] * (fields.q_p.get(grid.nt, i, 0) - fields.q_d.get(grid.nt, i, 0)).abs())
        .sum();

    let quoted: Vec<&OptionQuote> = ctx.quotes.iter().filter(|q| q.maturity <= t_star + 1e-12).collect();
    let model = reprice_calls(
        &fields.q_p,
        grid,
        &quoted.iter().map(|q| (q.maturity, q.strike)).collect::<Vec<_>>(),
    );
    let mut repricing = Vec::with_capacity(quoted.len());
    for (q, m) in quoted.iter().zip(model) {
        let market = match q.value {
            QuoteValue::Price(c) => c,
            QuoteValue::ImpliedVol(v) => call_price(ctx.s0, q.strike, q.maturity, ctx.r, v),
        };
        repricing.push(RepriceCheck {
            maturity: q.maturity,
            strike: q.strike,
            model: m,
            market,
            rel_error: (m - market).abs() / market.abs().max(1e-12),
        });
    }
    let max_repricing_error = repricing.iter().map(|c| c.rel_error).fold(0.0, f64::max);

    let m0 = grid.mass(p.slice(0));
    let mass_drift = (0..p.nt)
        .map(|k| (grid.mass(p.slice(k)) - m0 * (-ctx.r * grid.t(k)).exp()).abs())
        .fold(0.0, f64::max);
    let md0: f64 = (0..grid.n_s()).map(|i| w[i] * fields.q_d.get(0, i, 0)).sum();
    let mass_drift_dupire = (0..p.nt)
        .map(|k| {
            let m: f64 = (0..grid.n_s()).map(|i| w[i] * fields.q_d.get(k, i, 0)).sum();
            (m - md0 * (-ctx.r * grid.t(k)).exp()).abs()
        })
        .fold(0.0, f64::max);

    let b2 = spec.b2_nodes(grid);
    let mut identity_max_rel: f64 = 0.0;
    for k in 0..p.nt {
        for (i, (num, den)) in ratio_integrals(p.slice(k), &b2, grid).into_iter().enumerate() {
            let sigma = lv.at(k, i);
            let a = fields.leverage.get(k, i, 0);
            let rel = (a * a * den / num - sigma * sigma).abs() / (sigma * sigma);
            identity_max_rel = identity_max_rel.max(rel);
        }
    }

    let mon = &ctx.report.monitor;
    let monitor = MonitorSummary {
        records: mon.len(),
        ratio_min: mon.iter().map(|m| m.ratio).fold(f64::INFINITY, f64::min),
        ratio_max: mon.iter().map(|m| m.ratio).fold(0.0, f64::max),
        lhs_max: mon.iter().map(|m| m.lhs).fold(0.0, f64::max),
    };

    let passed = max_l1 < ctx.l1_tol && identity_max_rel < ctx.identity_tol;
    Ok(VerificationReport {
        marginal_l1,
        max_l1,
        l1_tol: ctx.l1_tol,
        uncorrected_l1,
        uncorrected_max_l1,
        boundary_layer_l1,
        repricing,
        max_repricing_error,
        mass_drift,
        mass_drift_dupire,
        identity_max_rel,
        identity_tol: ctx.identity_tol,
        monitor,
        passed,
    })
}

/// Model of the pipeline: `alpha_S = sigma_D(t, S) S b(y)`, so that the
/// calibrated diffusion is `a(t, S) S b(y)` with `a = sigma_D sqrt(I(p))`.
pub fn build_model(cfg: &RunConfig, lv: Arc<LocalVolSurface>) -> Result<ModelSpec> {
    let b = cfg.b.to_func1()?;
    let b_in = b.clone();
    let alpha_s = Func3::new(format!("sigma_D*S*b[{}]", b.label()), move |t, s, y| {
        lv.eval(t, s) * s * b_in.eval(y)
    });
    Ok(ModelSpec {
        b,
        alpha_s,
        alpha_y: cfg.alpha_y.to_func3()?,
        drift_s: Func3::zero(),
        drift_y: Func3::mean_reverting(cfg.kappa, cfg.theta),
        gamma: Func3::zero(),
        rho: convert_correlation(cfg.rho)?,
        r: cfg.r,
        s0: cfg.s0,
        y0: cfg.y0,
        eps: cfg.eps,
    })
}

#[derive(Serialize)]
struct Meta {
    started_unix: f64,
    elapsed_seconds: f64,
    threads: usize,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn snapshot_levels(levels: usize, every: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (0..levels).step_by(every).collect();
    if ks.last() != Some(&(levels - 1)) {
        ks.push(levels - 1);
    }
    ks
}

/// Runs the calibration described by `cfg` and writes its artifacts.
///
/// Input and configuration errors are returned before anything is written.
pub fn run_pipeline(cfg: &RunConfig, opts: &RunOptions) -> Result<PipelineOutcome> {
    let started = unix_now();
    let clock = Instant::now();
    let exec = opts.exec;
    let mode = opts.mode.unwrap_or(cfg.mode);
    let verify = opts.verify.unwrap_or(cfg.verify);
    let snapshot_every = opts.snapshot_every.unwrap_or(cfg.snapshot_every).max(1);
    let out_dir = opts.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let grid = cfg.grid;
    grid.validate()?;

    let quotes = load_quotes(&cfg.quotes)?;
    let surface = build_implied_surface(&quotes, cfg.s0, cfg.r)?;
    let times: Vec<f64> = (0..grid.n_t()).map(|k| grid.t(k)).collect();
    let lv_cfg = LocalVolConfig {
        floor: cfg.lv_floor,
        cap: cfg.lv_cap,
        ..LocalVolConfig::default()
    };
    let lv = Arc::new(dupire_local_vol(&surface, &times, &grid.s_nodes(), &lv_cfg)?);
    if lv.degenerate_fraction > 0.0 {
        warn!(
            "Dupire denominator degenerate on {:.2}% of nodes",
            100.0 * lv.degenerate_fraction
        );
    }
    let spec = build_model(cfg, lv.clone())?;
    let validation = validate_model(&spec, &grid)?;
    for w in &validation.warnings {
        warn!("{w}");
    }
    let floor = relative_floor(&grid, cfg.s0, cfg.y0, cfg.bandwidth_s, cfg.bandwidth_y, cfg.floor_rel);
    let initial = smoothed_dirac(cfg.s0, cfg.y0, cfg.bandwidth_s, cfg.bandwidth_y, floor, &grid)?;
    let eps_den = 1e-12 * validation.delta1.powi(2) * floor * (grid.y_max - grid.y_min);
    let fp_cfg = FixedPointConfig {
        mode,
        max_iter: cfg.max_iter,
        tol_rel: cfg.tol,
        x_star_factor: cfg.x_star_factor,
        max_halvings: cfg.max_halvings,
        monitor: true,
        eps_den,
        step: StepConfig {
            theta: cfg.scheme_theta,
            cross_iterations: cfg.cross_iterations,
            boundary: cfg.boundary,
            exec,
        },
    };
    let problem = Problem::new(&spec, &grid, &initial, exec)?;
    let params = x_set_params(&problem, &fp_cfg)?;
    info!(
        "X-set: x* = {:.4e}, p_lower0 = {:.4e}, p_upper0 = {:.4e}",
        params.x_star, params.p_lower0, params.p_upper0
    );

    let mut report = RunReport {
        status: RunStatus::HorizonExhausted,
        config: cfg.clone(),
        validation,
        local_vol_degenerate_fraction: lv.degenerate_fraction,
        eps_den,
        x_set: params,
        t_star: 0.0,
        steps: 0,
        halvings: 0,
        fixed_point: FixedPointReport::empty(mode, &params),
        verification: None,
    };
    report.config.mode = mode;
    report.config.verify = verify;
    report.config.snapshot_every = snapshot_every;

    let search = match shrink_horizon(&problem, &params, &fp_cfg) {
        Ok(s) => s,
        Err(Error::HorizonExhausted { halvings, report: fp }) => {
            warn!("fixed point failed on every horizon ({halvings} halvings)");
            report.halvings = halvings;
            report.fixed_point = *fp;
            write_json(&out_dir, "fixed_point.json", &report.fixed_point)?;
            write_json(&out_dir, "report.json", &report)?;
            write_meta(&out_dir, started, &clock)?;
            return Ok(PipelineOutcome {
                status: RunStatus::HorizonExhausted,
                output_dir: out_dir,
                report,
            });
        }
        Err(e) => return Err(e),
    };
    if search.halvings > 0 {
        warn!("horizon reduced to T* = {}", search.params.t_star);
    }

    let sub = grid.with_steps(search.steps);
    let levels = search.steps + 1;
    let lv_sub = truncate_local_vol(&lv, levels);
    let p = &search.density;
    let fields = calibrated_fields(p, &lv_sub, &spec, &sub, eps_den, exec)?;

    report.x_set = search.params;
    report.t_star = sub.t_end;
    report.steps = search.steps;
    report.halvings = search.halvings;
    report.fixed_point = search.report;
    report.verification = if verify {
        let ctx = VerifyContext {
            quotes: &quotes,
            s0: cfg.s0,
            r: cfg.r,
            eps_den,
            l1_tol: cfg.l1_tol,
            identity_tol: cfg.identity_tol,
            step: fp_cfg.step,
            report: &report.fixed_point,
        };
        Some(verify_calibration(p, &fields, &lv_sub, &spec, &sub, &ctx)?)
    } else {
        None
    };
    report.status = match &report.verification {
        Some(v) if !v.passed => RunStatus::VerificationFailed,
        _ => RunStatus::Success,
    };

    write_artifacts(&out_dir, p, &fields, &lv, &sub, snapshot_every, cfg.snapshot_format, &report)?;
    write_meta(&out_dir, started, &clock)?;
    info!("wrote artifacts to {}", out_dir.display());
    Ok(PipelineOutcome {
        status: report.status,
        output_dir: out_dir,
        report,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    dir: &Path,
    p: &Field3,
    fields: &CalibratedFields,
    lv: &LocalVolSurface,
    grid: &GridSpec,
    snapshot_every: usize,
    format: SnapshotFormat,
    report: &RunReport,
) -> Result<()> {
    write_atomic(dir, "leverage.csv", ts_csv("t,S,a", grid, &[&fields.leverage]).as_bytes())?;
    write_atomic(
        dir,
        "marginals.csv",
        ts_csv("t,S,q_p,q_D", grid, &[&fields.q_p, &fields.q_d]).as_bytes(),
    )?;
    write_atomic(dir, "ratio.csv", ts_csv("t,S,I", grid, &[&fields.ratio]).as_bytes())?;
    let mut lv_csv = Vec::new();
    lv.write_csv(&mut lv_csv)?;
    write_atomic(dir, "localvol.csv", &lv_csv)?;
    for k in snapshot_levels(p.nt, snapshot_every) {
        match format {
            SnapshotFormat::Csv => write_atomic(dir, &format!("density_{k}.csv"), snapshot_csv(p.slice(k), grid).as_bytes())?,
            SnapshotFormat::Bin => write_atomic(dir, &format!("density_{k}.bin"), &snapshot_bin(p.slice(k), grid.t(k), grid))?,
        }
    }
    write_json(dir, "fixed_point.json", &report.fixed_point)?;
    write_json(dir, "report.json", report)
}

fn write_meta(dir: &Path, started: f64, clock: &Instant) -> Result<()> {
    write_json(
        dir,
        "meta.json",
        &Meta {
            started_unix: started,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            threads: rayon_threads(),
        },
    )
}

#[cfg(feature = "parallel")]
fn rayon_threads() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn rayon_threads() -> usize {
    1
}
