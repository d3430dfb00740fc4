//! Implied total-variance surface `w(T, y) = sigma_imp^2 T` in forward
//! log-moneyness `y = ln(K / (S0 e^{rT}))`.
//!
//! Each maturity carries a natural cubic spline in `y` (flat outside its
//! strikes). Across maturities `w` is a not-a-knot cubic in `T` through the
//! quoted maturities and `w(0) = 0`, replaced by a monotone Hermite cubic
//! wherever the former would decrease; beyond the last maturity the implied
//! volatility is held flat.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::interp::{CubicSpline, EndCondition};
use crate::market::quotes::OptionQuote;

#[derive(Debug, Clone)]
struct Smile {
    maturity: f64,
    y_min: f64,
    y_max: f64,
    w: CubicSpline,
}

impl Smile {
    fn total_variance(&self, y: f64) -> f64 {
        self.w.eval(y.clamp(self.y_min, self.y_max))
    }
}

#[derive(Debug, Clone)]
pub struct ImpliedSurface {
    pub s0: f64,
    pub r: f64,
    smiles: Vec<Smile>,
}

pub const MIN_MATURITIES: usize = 4;
pub const MIN_STRIKES: usize = 4;

pub fn build_implied_surface(quotes: &[OptionQuote], s0: f64, r: f64) -> Result<ImpliedSurface> {
    let mut by_t: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for q in quotes {
        let v = q.implied_vol(s0, r)?;
        let y = (q.strike / (s0 * (r * q.maturity).exp())).ln();
        by_t.entry(q.maturity.to_bits()).or_default().push((y, v * v * q.maturity));
    }
    if by_t.len() < MIN_MATURITIES {
        return Err(Error::InsufficientData(format!(
            "{} maturities quoted, at least {MIN_MATURITIES} required",
            by_t.len()
        )));
    }
    let mut smiles = Vec::with_capacity(by_t.len());
    for (bits, mut pts) in by_t {
        let maturity = f64::from_bits(bits);
        if pts.len() < MIN_STRIKES {
            return Err(Error::InsufficientData(format!(
                "maturity {maturity} has {} strikes, at least {MIN_STRIKES} required",
                pts.len()
            )));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (ys, ws): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        smiles.push(Smile {
            maturity,
            y_min: ys[0],
            y_max: ys[ys.len() - 1],
            w: CubicSpline::new(ys, ws, EndCondition::Natural)?,
        });
    }
    for pair in smiles.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for &y in a.w.nodes().iter().chain(b.w.nodes()) {
            if b.total_variance(y) < a.total_variance(y) - 1e-14 {
                return Err(Error::CalendarArbitrage {
                    t1: a.maturity,
                    t2: b.maturity,
                    k: y,
                });
            }
        }
    }
    Ok(ImpliedSurface { s0, r, smiles })
}

impl ImpliedSurface {
    pub fn last_maturity(&self) -> f64 {
        self.smiles[self.smiles.len() - 1].maturity
    }

    pub fn maturities(&self) -> Vec<f64> {
        self.smiles.iter().map(|s| s.maturity).collect()
    }

    /// Forward log-moneyness of strike `k` at maturity `t`.
    pub fn log_moneyness(&self, t: f64, k: f64) -> f64 {
        (k / (self.s0 * (self.r * t).exp())).ln()
    }

    /// Total implied variance at maturity `t` and forward log-moneyness `y`.
    pub fn total_variance(&self, t: f64, y: f64) -> f64 {
        let last = &self.smiles[self.smiles.len() - 1];
        if t <= 0.0 {
            return 0.0;
        }
        if t >= last.maturity {
            return last.total_variance(y) * t / last.maturity;
        }
        // w vanishes at T = 0 for every strike; that node anchors the short end
        let ts: Vec<f64> = std::iter::once(0.0).chain(self.smiles.iter().map(|s| s.maturity)).collect();
        let ws: Vec<f64> = std::iter::once(0.0).chain(self.smiles.iter().map(|s| s.total_variance(y))).collect();
        let cubic = CubicSpline::new(ts.clone(), ws.clone(), EndCondition::NotAKnot)
            .expect("maturities validated at construction");
        if cubic.min_derivative(8) >= 0.0 {
            cubic.eval(t)
        } else {
            CubicSpline::monotone(ts, ws)
                .expect("maturities validated at construction")
                .eval(t)
        }
    }

    pub fn implied_vol(&self, t: f64, k: f64) -> f64 {
        (self.total_variance(t, self.log_moneyness(t, k)) / t).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::quotes::QuoteValue;

    fn quotes(f: impl Fn(f64, f64) -> f64, ts: &[f64], ks: &[f64]) -> Vec<OptionQuote> {
        let mut out = Vec::new();
        for &t in ts {
            for &k in ks {
                out.push(OptionQuote {
                    maturity: t,
                    strike: k,
                    value: QuoteValue::ImpliedVol(f(t, k)),
                    line: 0,
                });
            }
        }
        out
    }

    const TS: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.0];
    const KS: [f64; 5] = [70.0, 85.0, 100.0, 115.0, 130.0];

    #[test]
    fn flat_quotes_give_flat_surface() {
        let s = build_implied_surface(&quotes(|_, _| 0.2, &TS, &KS), 100.0, 0.02).unwrap();
        for &t in &[0.1, 0.3, 0.77, 1.9, 3.0] {
            for &k in &[50.0, 99.0, 140.0] {
                assert!((s.implied_vol(t, k) - 0.2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn term_structure_is_matched_between_nodes() {
        let f = |t: f64, _| (0.04 + 0.01 * t).sqrt();
        let s = build_implied_surface(&quotes(f, &TS, &KS), 100.0, 0.0).unwrap();
        for w in TS.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            assert!((s.implied_vol(t, 100.0) - f(t, 0.0)).abs() < 1e-4);
        }
    }

    #[test]
    fn nodes_are_reproduced() {
        let f = |t: f64, k: f64| 0.2 + 0.1 * (k / 100.0 - 1.0).powi(2) + 0.02 * t;
        let s = build_implied_surface(&quotes(f, &TS, &KS), 100.0, 0.03).unwrap();
        for &t in &TS {
            for &k in &KS {
                assert!((s.implied_vol(t, k) - f(t, k)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn insufficient_and_arbitrage() {
        let one = quotes(|_, _| 0.2, &[1.0], &KS);
        assert!(matches!(build_implied_surface(&one, 100.0, 0.0), Err(Error::InsufficientData(_))));
        let bad = quotes(|t, _| if t > 1.2 { 0.1 } else { 0.3 }, &TS, &KS);
        assert!(matches!(build_implied_surface(&bad, 100.0, 0.0), Err(Error::CalendarArbitrage { .. })));
    }
}
