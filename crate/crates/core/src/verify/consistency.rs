//! Pasting and ODE-residual audit of a full solution.

use serde::{Deserialize, Serialize};

use crate::entry::EntrySolution;
use crate::model::{cost_incubation, profit_post, profit_pre, ModelParams};
use crate::value::PiecewiseValue;

use super::ode::{ode_residual_scan, ScanError};

/// Upper branches are scanned up to this multiple of their last boundary.
const UPPER_SPAN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Largest relative jump in value or slope across any free boundary.
    pub max_pasting_gap: f64,
    /// Largest relative ODE residual over every branch.
    pub max_ode_residual: f64,
}

fn pasting_gap<V: PiecewiseValue<f64> + ?Sized>(v: &V, x: f64) -> Result<f64, ScanError> {
    let l = v.derivs(x).map_err(|_| ScanError::Evaluation { x })?;
    let r = v.right_derivs(x).map_err(|_| ScanError::Evaluation { x })?;
    let value_gap = (l.value - r.value).abs() / 1f64.max(l.value.abs());
    let slope_gap = (l.first - r.first).abs() / 1f64.max(l.first.abs());
    Ok(value_gap.max(slope_gap))
}

/// Checks value matching and smooth pasting at every free boundary, and the
/// stationary equation on `n` points per branch, for all three stages.
pub fn consistency_check(
    params: &ModelParams<f64>,
    sol: &EntrySolution<f64>,
    n: usize,
) -> Result<ConsistencyReport, ScanError> {
    let m = params.market;
    let prof = params.profit;
    let cost = params.cost;
    let lam2 = params.hazards.lambda2;
    let pre = &sol.pre_exit;
    let post = *pre.post();
    let at = post.a_tilde_star;

    let mut gap = 0.0f64;
    if at.is_finite() {
        gap = gap.max(pasting_gap(&post, at)?);
    }
    for b in pre.breakpoints() {
        gap = gap.max(pasting_gap(pre, b)?);
    }
    gap = gap.max(pasting_gap(sol, sol.c_star)?);
    gap = gap.max(pasting_gap(sol, sol.e_star)?);

    let mut ode = 0.0f64;
    if at.is_finite() {
        ode = ode.max(ode_residual_scan(
            &post,
            &m,
            0.0,
            |x| profit_post(x, &prof),
            at,
            UPPER_SPAN * at,
            n,
        )?);
    }
    let pre_inflow = |x: f64| profit_pre(x, &prof) + lam2 * post.value(x).unwrap_or(f64::NAN);
    let mut edges = pre.breakpoints();
    edges.push(UPPER_SPAN * edges.last().copied().unwrap_or(pre.a_star));
    for w in edges.windows(2) {
        ode = ode.max(ode_residual_scan(pre, &m, lam2, pre_inflow, w[0], w[1], n)?);
    }
    ode = ode.max(ode_residual_scan(
        sol,
        &m,
        params.hazards.lambda1,
        |x| -cost_incubation(x, &cost),
        sol.c_star,
        sol.e_star,
        n,
    )?);
    Ok(ConsistencyReport {
        max_pasting_gap: gap,
        max_ode_residual: ode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve_all;

    #[test]
    fn reference_solutions_are_consistent() {
        for alpha in [0.6, 0.3] {
            let p = ModelParams::reference(alpha);
            let sol = solve_all(&p).unwrap();
            let r = consistency_check(&p, &sol, 1000).unwrap();
            assert!(r.max_pasting_gap < 1e-8, "{r:?}");
            assert!(r.max_ode_residual < 1e-8, "{r:?}");
        }
    }
}
