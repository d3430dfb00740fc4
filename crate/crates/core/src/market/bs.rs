//! Black–Scholes call prices and implied-volatility inversion.

use statrs::function::erf::erfc;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Undiscounted-spot call price `S N(d1) - K e^{-rT} N(d2)`.
pub fn call_price(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> f64 {
    let df = (-r * t).exp();
    if t <= 0.0 || sigma <= 0.0 {
        return (s - k * df).max(0.0);
    }
    let sd = sigma * t.sqrt();
    let d1 = ((s / k).ln() + r * t) / sd + 0.5 * sd;
    let d2 = d1 - sd;
    s * norm_cdf(d1) - k * df * norm_cdf(d2)
}

/// Volatility reproducing `price`, by bisection on `[1e-4, 5]`.
///
/// Returns `None` when the price lies outside the no-arbitrage band
/// `(max(S - K e^{-rT}, 0), S)` or no volatility in range matches it.
pub fn implied_vol(price: f64, s: f64, k: f64, t: f64, r: f64) -> Option<f64> {
    let lower = (s - k * (-r * t).exp()).max(0.0);
    if !(price > lower && price < s) {
        return None;
    }
    let (mut lo, mut hi) = (1e-4, 5.0);
    if call_price(s, k, t, r, hi) < price || call_price(s, k, t, r, lo) > price {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if call_price(s, k, t, r, mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_price() {
        // S = K = 100, T = 1, r = 0.05, sigma = 0.2
        let c = call_price(100.0, 100.0, 1.0, 0.05, 0.2);
        assert!((c - 10.450583572185565).abs() < 1e-9, "{c}");
    }

    #[test]
    fn put_call_parity_and_inversion() {
        for &(k, t, r, v) in &[(80.0, 0.5, 0.0, 0.3), (120.0, 2.0, 0.03, 0.15), (100.0, 0.1, 0.01, 0.6)] {
            let c = call_price(100.0, k, t, r, v);
            let iv = implied_vol(c, 100.0, k, t, r).unwrap();
            assert!((iv - v).abs() < 1e-9);
        }
        assert!(implied_vol(0.0, 100.0, 120.0, 1.0, 0.0).is_none());
        assert!(implied_vol(101.0, 100.0, 120.0, 1.0, 0.0).is_none());
    }
}
