//! Discrete estimates of the parabolic Hölder norms.
//!
//! Distance between space-time points is `d(P, Q) = (|x - x'|^2 + |t - t'|)^(1/2)`.
//! The Hölder quotient `|u(P) - u(Q)| / d(P, Q)^h` is maximised over pairs of
//! nearest and next-nearest grid neighbours, or over all pairs with
//! [`PairMode::Full`] (quadratic cost, meant for small test fields).
//!
//! `|u|_{k+h}` adds the `|.|_h` estimates of every spatial difference quotient
//! up to order `k`; for `k = 2` the time derivative is included as well,
//! following the parabolic weighting of one time derivative against two
//! spatial ones.

use serde::Serialize;

use crate::grid::Field3;
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Neighbor,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderNormEstimate {
    pub value: f64,
    /// `|u|_0`.
    pub sup: f64,
    /// `H_h(u)`.
    pub quotient: f64,
    /// `|D u|_h` for each included derivative, labelled `S`, `y`, `SS`, ...
    pub derivatives: Vec<(String, f64)>,
}

/// Index offsets `(dt, dx, dy)` of the neighbour pairs, one per pair.
const NEIGHBOR_OFFSETS: [(usize, isize, isize); 9] = [
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (1, 1, 0),
    (1, -1, 0),
    (1, 0, 1),
    (1, 0, -1),
    (0, 1, 1),
    (0, 1, -1),
];

/// `|u|_0 + H_h(u)` and its parts.
pub fn holder_seminorm_parts(u: &Field3, h: f64, mode: PairMode, exec: Exec) -> (f64, f64) {
    let sup = u.sup_norm();
    let quotient = match mode {
        PairMode::Neighbor => neighbor_quotient(u, h, exec),
        PairMode::Full => full_quotient(u, h),
    };
    (sup, quotient)
}

fn neighbor_quotient(u: &Field3, h: f64, exec: Exec) -> f64 {
    let (nt, nx, ny) = (u.nt, u.nx, u.ny);
    let weights: Vec<Option<f64>> = NEIGHBOR_OFFSETS
        .iter()
        .map(|&(a, b, c)| {
            let used = (a == 0 || nt > 1) && (b == 0 || nx > 1) && (c == 0 || ny > 1);
            used.then(|| {
                let dx = b as f64 * u.dx;
                let dy = c as f64 * u.dy;
                let d2 = dx * dx + dy * dy + a as f64 * u.dt;
                d2.powf(0.5 * h).recip()
            })
        })
        .collect();
    exec.max_range(nt, |k| {
        let mut best: f64 = 0.0;
        for (off, w) in NEIGHBOR_OFFSETS.iter().zip(&weights) {
            let Some(w) = *w else { continue };
            let (a, b, c) = *off;
            if k + a >= nt {
                continue;
            }
            let i_lo = if b < 0 { 1 } else { 0 };
            let i_hi = if b > 0 { nx - 1 } else { nx };
            let j_lo = if c < 0 { 1 } else { 0 };
            let j_hi = if c > 0 { ny - 1 } else { ny };
            for i in i_lo..i_hi {
                let i2 = (i as isize + b) as usize;
                let base = u.index(k, i, 0);
                let base2 = u.index(k + a, i2, 0);
                for j in j_lo..j_hi {
                    let j2 = (j as isize + c) as usize;
                    let diff = (u.data[base + j] - u.data[base2 + j2]).abs();
                    best = best.max(diff * w);
                }
            }
        }
        best
    })
}

fn full_quotient(u: &Field3, h: f64) -> f64 {
    let n = u.data.len();
    let coords: Vec<(f64, f64, f64)> = (0..n)
        .map(|q| {
            let j = q % u.ny;
            let i = (q / u.ny) % u.nx;
            let k = q / (u.nx * u.ny);
            (k as f64 * u.dt, i as f64 * u.dx, j as f64 * u.dy)
        })
        .collect();
    let mut best: f64 = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            let (tp, xp, yp) = coords[p];
            let (tq, xq, yq) = coords[q];
            let d2 = (xp - xq).powi(2) + (yp - yq).powi(2) + (tp - tq).abs();
            best = best.max((u.data[p] - u.data[q]).abs() / d2.powf(0.5 * h));
        }
    }
    best
}

/// Centred difference quotient along one spatial axis (`order` 1 or 2), or the
/// mixed one. Returns `None` when the axis is too short.
fn spatial_derivative(u: &Field3, which: &str) -> Option<Field3> {
    let (nt, nx, ny) = (u.nt, u.nx, u.ny);
    match which {
        "S" | "SS" if nx >= 3 => {
            let second = which == "SS";
            Some(Field3::from_fn(nt, nx - 2, ny, u.dt, u.dx, u.dy, |k, i, j| {
                let (m, c, p) = (u.get(k, i, j), u.get(k, i + 1, j), u.get(k, i + 2, j));
                if second {
                    (p - 2.0 * c + m) / (u.dx * u.dx)
                } else {
                    (p - m) / (2.0 * u.dx)
                }
            }))
        }
        "y" | "yy" if ny >= 3 => {
            let second = which == "yy";
            Some(Field3::from_fn(nt, nx, ny - 2, u.dt, u.dx, u.dy, |k, i, j| {
                let (m, c, p) = (u.get(k, i, j), u.get(k, i, j + 1), u.get(k, i, j + 2));
                if second {
                    (p - 2.0 * c + m) / (u.dy * u.dy)
                } else {
                    (p - m) / (2.0 * u.dy)
                }
            }))
        }
        "Sy" if nx >= 3 && ny >= 3 => Some(Field3::from_fn(
            nt,
            nx - 2,
            ny - 2,
            u.dt,
            u.dx,
            u.dy,
            |k, i, j| {
                (u.get(k, i + 2, j + 2) - u.get(k, i + 2, j) - u.get(k, i, j + 2) + u.get(k, i, j))
                    / (4.0 * u.dx * u.dy)
            },
        )),
        _ => None,
    }
}

fn time_derivative(u: &Field3) -> Option<Field3> {
    (u.nt >= 2).then(|| {
        Field3::from_fn(u.nt - 1, u.nx, u.ny, u.dt, u.dx, u.dy, |k, i, j| {
            (u.get(k + 1, i, j) - u.get(k, i, j)) / u.dt
        })
    })
}

/// Estimate of `|u|_{k+h}` with `k` in `{0, 1, 2}`.
pub fn holder_norm(u: &Field3, k: usize, h: f64, mode: PairMode, exec: Exec) -> HolderNormEstimate {
    assert!(k <= 2, "order {k} is not supported");
    let (sup, quotient) = holder_seminorm_parts(u, h, mode, exec);
    let mut value = sup + quotient;
    let mut derivatives = Vec::new();
    let mut labels: Vec<&str> = Vec::new();
    if k >= 1 {
        labels.extend(["S", "y"]);
    }
    if k >= 2 {
        labels.extend(["SS", "Sy", "yy"]);
    }
    for label in labels {
        if let Some(d) = spatial_derivative(u, label) {
            let (s, q) = holder_seminorm_parts(&d, h, mode, exec);
            derivatives.push((label.to_string(), s + q));
            value += s + q;
        }
    }
    if k == 2 {
        if let Some(d) = time_derivative(u) {
            let (s, q) = holder_seminorm_parts(&d, h, mode, exec);
            derivatives.push(("t".to_string(), s + q));
            value += s + q;
        }
    }
    HolderNormEstimate {
        value,
        sup,
        quotient,
        derivatives,
    }
}
