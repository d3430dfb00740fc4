//! Quote files: CSV with header `maturity,strike,implied_vol` or
//! `maturity,strike,price`, one quote per line.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::market::bs::implied_vol;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuoteValue {
    ImpliedVol(f64),
    Price(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionQuote {
    pub maturity: f64,
    pub strike: f64,
    pub value: QuoteValue,
    /// Line in the source file (1-based, header is line 1).
    pub line: usize,
}

impl OptionQuote {
    /// Implied volatility, inverting the price when necessary.
    pub fn implied_vol(&self, s0: f64, r: f64) -> Result<f64> {
        match self.value {
            QuoteValue::ImpliedVol(v) => Ok(v),
            QuoteValue::Price(c) => implied_vol(c, s0, self.strike, self.maturity, r).ok_or_else(|| Error::Parse {
                path: "<quotes>".into(),
                line: self.line,
                message: format!("price {c} violates the no-arbitrage bounds"),
            }),
        }
    }
}

pub fn load_quotes(path: &Path) -> Result<Vec<OptionQuote>> {
    let text = std::fs::read_to_string(path)?;
    parse_quotes(&text, path)
}

pub fn parse_quotes(text: &str, path: &Path) -> Result<Vec<OptionQuote>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let is_price = match cols.as_slice() {
        ["maturity", "strike", "implied_vol"] => false,
        ["maturity", "strike", "price"] => true,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header maturity,strike,implied_vol|price, found {}", cols.join(",")),
            ))
        }
    };
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize, name: &str| -> Result<f64> {
            let raw = rec.get(k).ok_or_else(|| parse_err(line, format!("missing {name}")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("{name} '{raw}' is not a number")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(parse_err(line, format!("{name} must be positive, got {v}")));
            }
            Ok(v)
        };
        let maturity = field(0, "maturity")?;
        let strike = field(1, "strike")?;
        let v = field(2, if is_price { "price" } else { "implied_vol" })?;
        if !seen.insert((maturity.to_bits(), strike.to_bits())) {
            return Err(Error::DuplicateQuote {
                maturity,
                strike,
                line,
            });
        }
        out.push(OptionQuote {
            maturity,
            strike,
            value: if is_price {
                QuoteValue::Price(v)
            } else {
                QuoteValue::ImpliedVol(v)
            },
            line,
        });
    }
    warn_calendar(&out);
    Ok(out)
}

/// Logs strikes whose total implied variance decreases with maturity.
fn warn_calendar(quotes: &[OptionQuote]) {
    let mut by_strike: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for q in quotes {
        if let QuoteValue::ImpliedVol(v) = q.value {
            by_strike
                .entry(q.strike.to_bits())
                .or_default()
                .push((q.maturity, v * v * q.maturity));
        }
    }
    for (k, mut tw) in by_strike {
        tw.sort_by(|a, b| a.0.total_cmp(&b.0));
        if tw.windows(2).any(|w| w[1].1 < w[0].1) {
            warn!(
                "total implied variance is not increasing in maturity at strike {}",
                f64::from_bits(k)
            );
        }
    }
}
