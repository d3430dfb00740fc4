#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use lsv_core::grid::Field3;
use lsv_core::linpde::{solve_linear, CoefficientFields, CoefficientPoint, StepConfig};
use lsv_core::model::{convert_correlation, relative_floor, smoothed_dirac, Func1, Func3, InitialDensity, ModelSpec};
use lsv_core::GridSpec;

pub const MATURITIES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

pub fn flat_quotes(vol: f64) -> String {
    let mut out = String::from("maturity,strike,implied_vol\n");
    for t in MATURITIES {
        for k in (60..=160).step_by(10) {
            out.push_str(&format!("{t},{k},{vol}\n"));
        }
    }
    out
}

/// Base pipeline configuration: flat 20% quotes, b = 1, 200 x 100 x 200.
pub fn base_config() -> BTreeMap<&'static str, String> {
    let pairs = [
        ("quotes", "quotes.csv"),
        ("market.s0", "100"),
        ("market.r", "0.02"),
        ("model.b", "builtin:constant:1"),
        ("model.alpha_y", "builtin:constant:0.2"),
        ("model.kappa", "1"),
        ("model.rho", "-0.3"),
        ("grid.S_min", "20"),
        ("grid.S_max", "300"),
        ("grid.y_min", "-1"),
        ("grid.y_max", "1"),
        ("grid.NS", "200"),
        ("grid.Ny", "100"),
        ("grid.T", "1"),
        ("grid.Nt", "200"),
        ("init.bandwidth_S", "10"),
        ("init.bandwidth_y", "0.12"),
        ("init.floor_rel", "1e-9"),
    ];
    pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
}

/// Writes the quotes and the config into `dir` and returns the config path.
pub fn write_run(dir: &Path, cfg: &BTreeMap<&'static str, String>, quotes: &str) -> std::path::PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("quotes.csv"), quotes).unwrap();
    let text: String = cfg.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

pub fn lsv_grid(ns: usize, ny: usize, nt: usize) -> GridSpec {
    GridSpec {
        s_min: 20.0,
        s_max: 300.0,
        y_min: -1.0,
        y_max: 1.0,
        ns,
        ny,
        t_end: 1.0,
        nt,
        holder: 0.5,
    }
}

/// LSV model with flat local vol: `alpha_S = sigma S b(y)`, OU factor.
pub fn lsv_spec(b: Func1, sigma: f64, kappa: f64, rho: f64) -> ModelSpec {
    let bb = b.clone();
    ModelSpec {
        b,
        alpha_s: Func3::new("flat", move |_, s, y| sigma * s * bb.eval(y)),
        alpha_y: Func3::constant(0.2),
        drift_s: Func3::zero(),
        drift_y: Func3::mean_reverting(kappa, 0.0),
        gamma: Func3::zero(),
        rho: convert_correlation(rho).unwrap(),
        r: 0.0,
        s0: 100.0,
        y0: 0.0,
        eps: 1e-3,
    }
}

pub fn lsv_initial(g: &GridSpec, floor_rel: f64) -> InitialDensity {
    let floor = relative_floor(g, 100.0, 0.0, 10.0, 0.12, floor_rel);
    smoothed_dirac(100.0, 0.0, 10.0, 0.12, floor, g).unwrap()
}

/// Manufactured solution `u = g + tau(t) phi` on `[0.5, 1.5] x [-0.5, 0.5]`
/// with `phi` vanishing on the boundary, so the lateral data are constant
/// in time.
pub struct Manufactured;

impl Manufactured {
    pub fn grid(n: usize, nt: usize) -> GridSpec {
        GridSpec {
            s_min: 0.5,
            s_max: 1.5,
            y_min: -0.5,
            y_max: 0.5,
            ns: n,
            ny: n,
            t_end: 0.5,
            nt,
            holder: 0.5,
        }
    }

    pub fn coeffs(t: f64, x: f64, y: f64, with_c: bool) -> CoefficientPoint {
        CoefficientPoint {
            a_ss: (0.2 + 0.1 * x * x) * (1.0 + 0.3 * t),
            a_sy: 0.05 * x * y.cos(),
            a_yy: 0.15 + 0.05 * (2.0 * y).sin(),
            b_s: 0.3 * x - 0.1 * y,
            b_y: -0.2 * y + 0.1 * t,
            c: if with_c { 0.1 + 0.05 * x * y } else { 0.0 },
        }
    }

    fn tau(t: f64) -> (f64, f64) {
        (1.0 + (2.0 * t).sin(), 2.0 * (2.0 * t).cos())
    }

    /// `(u, u_t, u_x, u_y, u_xx, u_xy, u_yy)`.
    fn jet(t: f64, x: f64, y: f64) -> [f64; 7] {
        use std::f64::consts::PI;
        let (tau, dtau) = Self::tau(t);
        let (sx, cx) = (PI * (x - 0.5)).sin_cos();
        let (sy, cy) = (PI * (y + 0.5)).sin_cos();
        let phi = sx * sy;
        [
            1.0 + x * y + tau * phi,
            dtau * phi,
            y + tau * PI * cx * sy,
            x + tau * PI * sx * cy,
            -tau * PI * PI * phi,
            1.0 + tau * PI * PI * cx * cy,
            -tau * PI * PI * phi,
        ]
    }

    pub fn exact(t: f64, x: f64, y: f64) -> f64 {
        Self::jet(t, x, y)[0]
    }

    pub fn source(t: f64, x: f64, y: f64) -> f64 {
        let [u, ut, ux, uy, uxx, uxy, uyy] = Self::jet(t, x, y);
        let c = Self::coeffs(t, x, y, true);
        ut - (c.a_ss * uxx + 2.0 * c.a_sy * uxy + c.a_yy * uyy - c.b_s * ux - c.b_y * uy - c.c * u)
    }

    /// Max-norm error at the final time.
    pub fn error(n: usize, nt: usize, cfg: &StepConfig) -> f64 {
        let g = Self::grid(n, nt);
        let fields = CoefficientFields::from_fn(&g, |t, x, y| Self::coeffs(t, x, y, true));
        let psi: Vec<f64> = (0..g.n_s())
            .flat_map(|i| (0..g.n_y()).map(move |j| (i, j)))
            .map(|(i, j)| Self::exact(0.0, g.s(i), g.y(j)))
            .collect();
        let mut f = Field3::on_grid(&g);
        for k in 0..g.n_t() {
            let slice = f.slice_mut(k);
            for i in 0..g.n_s() {
                for j in 0..g.n_y() {
                    slice[g.idx(i, j)] = Self::source(g.t(k), g.s(i), g.y(j));
                }
            }
        }
        let (u, _) = solve_linear(&fields, &psi, Some(&f), cfg).unwrap();
        let last = u.slice(g.nt);
        let mut err: f64 = 0.0;
        for i in 0..g.n_s() {
            for j in 0..g.n_y() {
                err = err.max((last[g.idx(i, j)] - Self::exact(g.t_end, g.s(i), g.y(j))).abs());
            }
        }
        err
    }
}
