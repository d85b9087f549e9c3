//! Pointwise check of the stationary pricing equation.

use thiserror::Error;

use crate::model::MarketParams;
use crate::value::PiecewiseValue;

pub const MIN_SCAN_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("region [{lo}, {hi}] is empty or not strictly positive")]
    BadRegion { lo: f64, hi: f64 },
    #[error("region [{lo}, {hi}] contains the branch boundary {at}")]
    CrossesBreakpoint { lo: f64, hi: f64, at: f64 },
    #[error("value function failed at x = {x}")]
    Evaluation { x: f64 },
}

/// Largest scaled residual of
/// `-(rho + lambda) w + mu x w' + (sigma^2 x^2 / 2) w'' + inflow(x)` over
/// `n` log-spaced points strictly inside `(lo, hi)`.
///
/// Each residual is divided by the sum of the absolute values of its four
/// terms, so the result is a relative cancellation error.
pub fn ode_residual_scan<V, F>(
    value: &V,
    market: &MarketParams<f64>,
    killed_rate: f64,
    inflow: F,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<f64, ScanError>
where
    V: PiecewiseValue<f64>,
    F: Fn(f64) -> f64,
{
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(ScanError::BadRegion { lo, hi });
    }
    if let Some(&at) = value.breakpoints().iter().find(|&&b| b > lo && b < hi) {
        return Err(ScanError::CrossesBreakpoint { lo, hi, at });
    }
    let n = n.max(MIN_SCAN_POINTS);
    let (a, b) = (lo.ln(), hi.ln());
    let rate = market.rho + killed_rate;
    let half_var = 0.5 * market.sigma * market.sigma;
    let mut worst = 0.0f64;
    for i in 1..=n {
        let x = (a + (b - a) * i as f64 / (n + 1) as f64).exp();
        let d = value.derivs(x).map_err(|_| ScanError::Evaluation { x })?;
        let terms = [
            -rate * d.value,
            market.mu * x * d.first,
            half_var * x * x * d.second,
            inflow(x),
        ];
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        let residual: f64 = terms.iter().sum();
        if scale > 0.0 {
            worst = worst.max(residual.abs() / scale);
        }
    }
    Ok(worst)
}
