//! Run configuration: flat `key = value` text, `#` starts a comment.
//!
//! ```text
//! quotes            = quotes.csv           # required; relative to the config file
//! market.s0         = 100
//! market.r          = 0.0
//! model.b           = builtin:exp:0.5:2    # constant:<c> | exp[:lo:hi] | sin:<s> | csv:<path>
//! model.alpha_y     = builtin:constant:0.2 # constant:<v> | cir:<nu>:<floor> | csv:<path>
//! model.kappa       = 1.0                  # drift of y: kappa (theta - y)
//! model.theta       = 0.0
//! model.rho         = -0.3                 # market correlation in (-1, 1)
//! model.y0          = 0.0
//! model.eps         = 1e-3                 # floor required of both amplitudes
//! grid.S_min        = 20                   grid.S_max = 300
//! grid.y_min        = -1                   grid.y_max = 1
//! grid.NS           = 200                  grid.Ny    = 100
//! grid.T            = 1.0                  grid.Nt    = 200
//! grid.holder       = 0.5
//! init.bandwidth_S  = 5                    init.bandwidth_y = 0.12
//! init.floor_rel    = 1e-6                 # floor relative to the bump peak
//! solver.mode       = fixed-point          # or time-lagged
//! solver.max_iter   = 50                   solver.tol = 1e-8
//! solver.x_star_factor = 1.5               solver.max_halvings = 6
//! solver.theta      = 0.5                  solver.cross_iterations = 1
//! solver.boundary   = dirichlet            # or zero-flux
//! localvol.floor    = 0.01                 localvol.cap = 3.0
//! output.dir        = out
//! output.snapshot_every  = 20              # default Nt / 10
//! output.snapshot_format = csv             # or bin
//! verify.enabled    = true
//! verify.l1_tol     = 1e-2                 verify.identity_tol = 1e-8
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::Mode;
use crate::grid::GridSpec;
use crate::interp::Linear;
use crate::linpde::LateralBoundary;
use crate::model::{Func1, Func3};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FuncSpec {
    Constant(f64),
    Exp { clamp: Option<(f64, f64)> },
    SinPerturbed(f64),
    Cir { nu: f64, floor: f64 },
    Table(PathBuf),
}

impl FuncSpec {
    fn parse(raw: &str, base: &Path) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse function '{raw}'"));
        if let Some(path) = raw.strip_prefix("csv:") {
            return Ok(FuncSpec::Table(base.join(path.trim())));
        }
        let body = raw.strip_prefix("builtin:").ok_or_else(bad)?;
        let parts: Vec<&str> = body.split(':').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["constant", c] => Ok(FuncSpec::Constant(num(c)?)),
            ["exp"] => Ok(FuncSpec::Exp { clamp: None }),
            ["exp", lo, hi] => Ok(FuncSpec::Exp {
                clamp: Some((num(lo)?, num(hi)?)),
            }),
            ["sin", s] => Ok(FuncSpec::SinPerturbed(num(s)?)),
            ["cir", nu, floor] => Ok(FuncSpec::Cir {
                nu: num(nu)?,
                floor: num(floor)?,
            }),
            _ => Err(bad()),
        }
    }

    fn table(path: &Path) -> Result<Linear> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let get = |k: usize| -> Result<f64> {
                rec.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "expected two numeric columns".into(),
                })
            };
            xs.push(get(0)?);
            ys.push(get(1)?);
        }
        Linear::new(xs, ys)
    }

    pub fn to_func1(&self) -> Result<Func1> {
        Ok(match self {
            FuncSpec::Constant(c) => Func1::constant(*c),
            FuncSpec::Exp { clamp } => Func1::exp(*clamp),
            FuncSpec::SinPerturbed(s) => Func1::sin_perturbed(*s),
            FuncSpec::Table(p) => Func1::tabulated(p.display().to_string(), Self::table(p)?),
            FuncSpec::Cir { .. } => return Err(Error::Config("cir is not available for b".into())),
        })
    }

    pub fn to_func3(&self) -> Result<Func3> {
        Ok(match self {
            FuncSpec::Constant(c) => Func3::constant(*c),
            FuncSpec::Cir { nu, floor } => Func3::cir(*nu, *floor),
            FuncSpec::Table(p) => Func3::of_y(Func1::tabulated(p.display().to_string(), Self::table(p)?)),
            other => Func3::of_y(other.to_func1()?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub quotes: PathBuf,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub s0: f64,
    pub r: f64,
    pub b: FuncSpec,
    pub alpha_y: FuncSpec,
    pub kappa: f64,
    pub theta: f64,
    pub rho: f64,
    pub y0: f64,
    pub eps: f64,
    pub grid: GridSpec,
    pub bandwidth_s: f64,
    pub bandwidth_y: f64,
    pub floor_rel: f64,
    pub mode: Mode,
    pub max_iter: usize,
    pub tol: f64,
    pub x_star_factor: f64,
    pub max_halvings: usize,
    pub scheme_theta: f64,
    pub cross_iterations: usize,
    pub boundary: LateralBoundary,
    pub lv_floor: f64,
    pub lv_cap: f64,
    pub snapshot_every: usize,
    pub snapshot_format: SnapshotFormat,
    pub verify: bool,
    pub l1_tol: f64,
    pub identity_tol: f64,
}

const KEYS: &[&str] = &[
    "quotes",
    "market.s0",
    "market.r",
    "model.b",
    "model.alpha_y",
    "model.kappa",
    "model.theta",
    "model.rho",
    "model.y0",
    "model.eps",
    "grid.S_min",
    "grid.S_max",
    "grid.y_min",
    "grid.y_max",
    "grid.NS",
    "grid.Ny",
    "grid.T",
    "grid.Nt",
    "grid.holder",
    "init.bandwidth_S",
    "init.bandwidth_y",
    "init.floor_rel",
    "solver.mode",
    "solver.max_iter",
    "solver.tol",
    "solver.x_star_factor",
    "solver.max_halvings",
    "solver.theta",
    "solver.cross_iterations",
    "solver.boundary",
    "localvol.floor",
    "localvol.cap",
    "output.dir",
    "output.snapshot_every",
    "output.snapshot_format",
    "verify.enabled",
    "verify.l1_tol",
    "verify.identity_tol",
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    path: PathBuf,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(v, _)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T> {
        match self.map.get(key) {
            Some((v, line)) => v.parse().map_err(|_| Error::Parse {
                path: self.path.clone(),
                line: *line,
                message: format!("invalid value '{v}' for {key}"),
            }),
            None => default.ok_or_else(|| Error::Config(format!("missing required key {key}"))),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Parses `text`; relative paths are resolved against the directory of
    /// `path`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "expected key = value".into(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("unknown key {k}"),
                });
            }
            if map.insert(k.to_string(), (v.to_string(), line_no)).is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("duplicate key {k}"),
                });
            }
        }
        let e = Entries {
            map,
            path: path.to_path_buf(),
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let quotes = base.join(e.raw("quotes").ok_or_else(|| Error::Config("missing required key quotes".into()))?);
        let output_dir = base.join(e.raw("output.dir").unwrap_or("out"));
        let nt: usize = e.parsed("grid.Nt", None)?;
        let grid = GridSpec {
            s_min: e.parsed("grid.S_min", None)?,
            s_max: e.parsed("grid.S_max", None)?,
            y_min: e.parsed("grid.y_min", None)?,
            y_max: e.parsed("grid.y_max", None)?,
            ns: e.parsed("grid.NS", None)?,
            ny: e.parsed("grid.Ny", None)?,
            t_end: e.parsed("grid.T", None)?,
            nt,
            holder: e.parsed("grid.holder", Some(0.5))?,
        };
        let mode = match e.raw("solver.mode").unwrap_or("fixed-point") {
            "fixed-point" => Mode::FixedPoint,
            "time-lagged" => Mode::TimeLagged,
            other => return Err(Error::Config(format!("unknown solver.mode {other}"))),
        };
        let boundary = match e.raw("solver.boundary").unwrap_or("dirichlet") {
            "dirichlet" => LateralBoundary::Dirichlet,
            "zero-flux" => LateralBoundary::ZeroFlux,
            other => return Err(Error::Config(format!("unknown solver.boundary {other}"))),
        };
        let snapshot_format = match e.raw("output.snapshot_format").unwrap_or("csv") {
            "csv" => SnapshotFormat::Csv,
            "bin" => SnapshotFormat::Bin,
            other => return Err(Error::Config(format!("unknown output.snapshot_format {other}"))),
        };
        let cfg = RunConfig {
            quotes,
            output_dir,
            s0: e.parsed("market.s0", None)?,
            r: e.parsed("market.r", Some(0.0))?,
            b: FuncSpec::parse(e.raw("model.b").unwrap_or("builtin:constant:1"), base)?,
            alpha_y: FuncSpec::parse(e.raw("model.alpha_y").unwrap_or("builtin:constant:0.2"), base)?,
            kappa: e.parsed("model.kappa", Some(1.0))?,
            theta: e.parsed("model.theta", Some(0.0))?,
            rho: e.parsed("model.rho", Some(0.0))?,
            y0: e.parsed("model.y0", Some(0.0))?,
            eps: e.parsed("model.eps", Some(1e-3))?,
            grid,
            bandwidth_s: e.parsed("init.bandwidth_S", None)?,
            bandwidth_y: e.parsed("init.bandwidth_y", None)?,
            floor_rel: e.parsed("init.floor_rel", Some(1e-6))?,
            mode,
            max_iter: e.parsed("solver.max_iter", Some(50))?,
            tol: e.parsed("solver.tol", Some(1e-8))?,
            x_star_factor: e.parsed("solver.x_star_factor", Some(1.5))?,
            max_halvings: e.parsed("solver.max_halvings", Some(6))?,
            scheme_theta: e.parsed("solver.theta", Some(0.5))?,
            cross_iterations: e.parsed("solver.cross_iterations", Some(1))?,
            boundary,
            lv_floor: e.parsed("localvol.floor", Some(0.01))?,
            lv_cap: e.parsed("localvol.cap", Some(3.0))?,
            snapshot_every: e.parsed("output.snapshot_every", Some((nt / 10).max(1)))?,
            snapshot_format,
            verify: e.parsed("verify.enabled", Some(true))?,
            l1_tol: e.parsed("verify.l1_tol", Some(1e-2))?,
            identity_tol: e.parsed("verify.identity_tol", Some(1e-8))?,
        };
        cfg.grid.validate()?;
        if cfg.snapshot_every == 0 {
            return Err(Error::Config("output.snapshot_every must be positive".into()));
        }
        Ok(cfg)
    }
}
