//! Incubation-period problem: when to launch and when to cancel.
//!
//! While incubating the firm pays `c(x)` and faces termination at rate
//! `lambda1`, so on the continuation region `(c*, e*)` the value is
//! `J(x) = D1 x^q1 + D2 x^q2 - cost_slope x / (rho + lambda1 - mu) - cost_intercept / (rho + lambda1)`.
//! Value matching and smooth pasting hold at both ends: `J = J' = 0` at `c*`
//! and `J = V`, `J' = V'` at `e*`, where `V` is the post-entry value.
//!
//! For fixed thresholds the two value-matching conditions are linear in the
//! coefficients. Writing `D1 = d1 (c*)^-q1` and `D2 = d2 (e*)^-q2` keeps that
//! 2x2 system well scaled; the remaining two pasting conditions are solved by
//! damped Newton in `(ln c*, ln e*)`.

use crate::error::SolveError;
use crate::exit_pre::PreExitSolution;
use crate::model::{char_roots, cost_incubation, validate, CostParams, MarketParams, ModelParams};
use crate::rootfind::damped_newton_2d;
use crate::scalar::{pow, Scalar};
use crate::value::{check_price, PiecewiseValue, ValueDerivs};

/// Relative distance below which two converged threshold pairs are the same root.
const DEDUPE_RTOL: f64 = 1e-6;
const MAX_NEWTON_ITER: usize = 200;
/// Grid points per region in the optimality check.
const OPTIMALITY_POINTS: usize = 64;
/// The entry region is checked up to this multiple of the largest threshold.
const OPTIMALITY_SPAN: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EntrySolution<T> {
    pub c_star: T,
    pub e_star: T,
    /// Coefficient of `x^q1`; can overflow for extreme roots, see `d1_scaled`.
    pub d1: T,
    /// Coefficient of `x^q2`.
    pub d2: T,
    /// `D1 (c*)^q1`.
    pub d1_scaled: T,
    /// `D2 (e*)^q2`.
    pub d2_scaled: T,
    pub q1: T,
    pub q2: T,
    /// `cost_slope / (rho + lambda1 - mu)`.
    pub cost_pv_slope: T,
    /// `cost_intercept / (rho + lambda1)`.
    pub cost_pv_intercept: T,
    pub pre_exit: PreExitSolution<T>,
    /// Scaled residuals of the four boundary conditions, in the order
    /// `J(c) = 0`, `J'(c) = 0`, `J(e) = V(e)`, `J'(e) = V'(e)`.
    pub residuals: [T; 4],
    /// Every distinct ordered root found, selected one first. Roots that
    /// fail the optimality check are kept here but never selected while an
    /// admissible one exists.
    pub candidates: Vec<(T, T)>,
    pub warnings: Vec<String>,
}

/// Constants of `J` that do not depend on the thresholds.
#[derive(Debug, Clone, Copy)]
struct Incubation<T> {
    q1: T,
    q2: T,
    /// `cost_slope / (rho + lambda1 - mu)`.
    cost_pv_slope: T,
    /// `cost_intercept / (rho + lambda1)`.
    cost_pv_intercept: T,
    market: MarketParams<T>,
    cost: CostParams<T>,
    /// `rho + lambda1`.
    killed_rate: T,
}

impl<T: Scalar> Incubation<T> {
    fn new(params: &ModelParams<T>) -> Self {
        let m = &params.market;
        let lam = params.hazards.lambda1;
        let roots = char_roots(m, lam);
        Incubation {
            q1: roots.h1,
            q2: roots.h2,
            cost_pv_slope: params.cost.cost_slope / (m.rho + lam - m.mu),
            cost_pv_intercept: params.cost.cost_intercept / (m.rho + lam),
            market: *m,
            cost: params.cost,
            killed_rate: m.rho + lam,
        }
    }

    fn particular(&self, x: T) -> ValueDerivs<T> {
        ValueDerivs::affine(-self.cost_pv_slope, -self.cost_pv_intercept, x)
    }

    fn j(&self, c: T, e: T, d1s: T, d2s: T, x: T) -> ValueDerivs<T> {
        ValueDerivs::power(d1s, self.q1, x / c).rescale(c)
            + ValueDerivs::power(d2s, self.q2, x / e).rescale(e)
            + self.particular(x)
    }

    /// Scaled coefficients from value matching at both ends.
    fn coefficients(&self, c: T, e: T, v_e: T) -> (T, T) {
        let r = pow(c / e, self.q2);
        let u = pow(e / c, self.q1);
        let lo = -self.particular(c).value;
        let hi = v_e - self.particular(e).value;
        let det = T::one() - r * u;
        ((lo - r * hi) / det, (hi - u * lo) / det)
    }
}

/// Evaluates all four scaled residuals at `(c, e)`.
fn residuals<T: Scalar>(
    inc: &Incubation<T>,
    pre: &PreExitSolution<T>,
    c: T,
    e: T,
) -> Option<([T; 4], T, T)> {
    let v = pre.right_derivs(e).ok()?;
    let (d1s, d2s) = inc.coefficients(c, e, v.value);
    let at_c = inc.j(c, e, d1s, d2s, c);
    let at_e = inc.j(c, e, d1s, d2s, e);
    let one = T::one();
    let value_scale = one.max(v.value.abs());
    let slope_scale = one.max(v.first.abs());
    let res = [
        at_c.value / value_scale,
        at_c.first / slope_scale,
        (at_e.value - v.value) / value_scale,
        (at_e.first - v.first) / slope_scale,
    ];
    if res.iter().all(|r| r.is_finite()) {
        Some((res, d1s, d2s))
    } else {
        None
    }
}

fn geomspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * T::lit(i as f64 / (n - 1) as f64)).exp())
        .collect()
}

/// Worst relative violation of the conditions that make a pasting root the
/// optimal policy: waiting beats both entering and cancelling on `(c, e)`,
/// and waiting one more instant does not beat entering above `e`.
/// Zero when both hold.
fn optimality_violation<T: Scalar>(
    inc: &Incubation<T>,
    pre: &PreExitSolution<T>,
    c: T,
    e: T,
    d1s: T,
    d2s: T,
) -> T {
    let n = OPTIMALITY_POINTS;
    let one = T::one();
    let mut worst = T::zero();
    let inner = geomspace(c, e, n + 2);
    for &x in &inner[1..=n] {
        let Ok(v) = pre.value(x) else {
            return T::infinity();
        };
        let wait = inc.j(c, e, d1s, d2s, x).value;
        worst = worst.max((v.max(T::zero()) - wait) / one.max(v.abs()));
    }
    let top = [e, pre.a_star, pre.a_tilde_star()]
        .into_iter()
        .filter(|x| x.is_finite())
        .fold(e, T::max);
    let m = &inc.market;
    let half = T::lit(0.5);
    let outer = geomspace(e, T::lit(OPTIMALITY_SPAN) * top, n + 1);
    for &x in &outer[1..] {
        let Ok(d) = pre.derivs(x) else {
            return T::infinity();
        };
        let terms = [
            half * m.sigma * m.sigma * x * x * d.second,
            m.mu * x * d.first,
            -inc.killed_rate * d.value,
            -cost_incubation(x, &inc.cost),
        ];
        let sum = terms.iter().fold(T::zero(), |a, &t| a + t);
        let scale = terms.iter().fold(T::zero(), |a, &t| a + t.abs());
        if scale > T::zero() {
            worst = worst.max(sum / scale);
        }
    }
    worst
}

/// Starting points: the default guess first, then a fixed grid.
fn initial_guesses<T: Scalar>(a_star: T) -> Vec<(T, T)> {
    let mut out = vec![(T::lit(0.5) * a_star, T::lit(2.0) * a_star)];
    let cancels = geomspace(T::lit(0.05), T::lit(0.95), 6);
    let enters = geomspace(T::lit(1.05), T::lit(20.0), 6);
    for &c in &cancels {
        for &e in &enters {
            out.push((c * a_star, e * a_star));
        }
    }
    out
}

/// Solves for the cancellation and entry thresholds.
pub fn solve_entry<T: Scalar>(
    params: &ModelParams<T>,
    pre: &PreExitSolution<T>,
) -> Result<EntrySolution<T>, SolveError> {
    let report = validate(params);
    if !report.is_ok() {
        return Err(SolveError::Invalid(report));
    }
    let inc = Incubation::new(params);
    let guesses = initial_guesses(pre.a_star);
    let tol = T::system_tol();
    let dedupe = T::lit(DEDUPE_RTOL);

    let mut found: Vec<(T, T, [T; 4], T, T)> = Vec::new();
    for &(c0, e0) in &guesses {
        let f = |z: [T; 2]| {
            let (c, e) = (z[0].exp(), z[1].exp());
            residuals(&inc, pre, c, e).map(|(r, _, _)| [r[1], r[3]])
        };
        let feasible = |z: [T; 2]| z[0] < z[1] && z[0].exp() > T::zero() && z[1].exp().is_finite();
        let Some(sol) = damped_newton_2d(
            f,
            [c0.ln(), e0.ln()],
            feasible,
            T::newton_step_tol(),
            MAX_NEWTON_ITER,
        ) else {
            continue;
        };
        let (c, e) = (sol.z[0].exp(), sol.z[1].exp());
        if !(c < e) {
            continue;
        }
        let Some((res, d1s, d2s)) = residuals(&inc, pre, c, e) else {
            continue;
        };
        if res.iter().any(|r| !(r.abs() < tol)) {
            continue;
        }
        let same = |&(c2, e2, ..): &(T, T, [T; 4], T, T)| {
            (c2 - c).abs() <= dedupe * c.abs() && (e2 - e).abs() <= dedupe * e.abs()
        };
        if !found.iter().any(same) {
            found.push((c, e, res, d1s, d2s));
        }
    }

    if found.is_empty() {
        return Err(SolveError::NoInteriorSolution {
            attempts: guesses.len(),
        });
    }

    let mut warnings = Vec::new();
    let vtol = tol.sqrt();
    let violations: Vec<T> = found
        .iter()
        .map(|&(c, e, _, d1s, d2s)| optimality_violation(&inc, pre, c, e, d1s, d2s))
        .collect();
    let admissible: Vec<usize> = (0..found.len())
        .filter(|&k| violations[k] <= vtol)
        .collect();
    let pool: Vec<usize> = if admissible.is_empty() {
        (0..found.len()).collect()
    } else {
        admissible.clone()
    };
    let mut chosen = pool[0];
    if pool.len() > 1 {
        // Compare candidates at a common point inside the first one's region.
        let probe = (found[pool[0]].0 + found[pool[0]].1) * T::lit(0.5);
        let psi_at = |k: usize| {
            let (c, e, _, d1s, d2s) = found[k];
            if probe <= c {
                T::zero()
            } else if probe < e {
                inc.j(c, e, d1s, d2s, probe).value
            } else {
                pre.value(probe).unwrap_or(T::neg_infinity())
            }
        };
        for &k in &pool[1..] {
            if psi_at(k) > psi_at(chosen) {
                chosen = k;
            }
        }
        let list: Vec<String> = pool
            .iter()
            .map(|&k| format!("({}, {})", found[k].0, found[k].1))
            .collect();
        warnings.push(format!(
            "{} distinct (c*, e*) roots found: {}; kept the one with larger value at x = {}",
            pool.len(),
            list.join(", "),
            probe
        ));
    }
    if admissible.is_empty() {
        warnings.push(format!(
            "no (c*, e*) root satisfies the optimality conditions (worst violation {} at the kept root); \
             the optimal policy is not a single cancel/entry pair for these parameters",
            violations[chosen]
        ));
    }
    let (c, e, residuals, d1s, d2s) = found[chosen];
    let mut candidates: Vec<(T, T)> = vec![(c, e)];
    candidates.extend(
        found
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != chosen)
            .map(|(_, f)| (f.0, f.1)),
    );

    Ok(EntrySolution {
        c_star: c,
        e_star: e,
        d1: d1s * pow(c, -inc.q1),
        d2: d2s * pow(e, -inc.q2),
        d1_scaled: d1s,
        d2_scaled: d2s,
        q1: inc.q1,
        q2: inc.q2,
        cost_pv_slope: inc.cost_pv_slope,
        cost_pv_intercept: inc.cost_pv_intercept,
        pre_exit: *pre,
        residuals,
        candidates,
        warnings,
    })
}

impl<T: Scalar> EntrySolution<T> {
    fn j(&self, x: T) -> ValueDerivs<T> {
        let (c, e) = (self.c_star, self.e_star);
        ValueDerivs::power(self.d1_scaled, self.q1, x / c).rescale(c)
            + ValueDerivs::power(self.d2_scaled, self.q2, x / e).rescale(e)
            + ValueDerivs::affine(-self.cost_pv_slope, -self.cost_pv_intercept, x)
    }

    pub fn max_residual(&self) -> T {
        self.residuals.iter().fold(T::zero(), |m, r| m.max(r.abs()))
    }
}

impl<T: Scalar> PiecewiseValue<T> for EntrySolution<T> {
    fn derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError> {
        check_price(x)?;
        if x <= self.c_star {
            Ok(ValueDerivs::zero())
        } else if x <= self.e_star {
            Ok(self.j(x))
        } else {
            self.pre_exit.derivs(x)
        }
    }

    fn right_derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError> {
        check_price(x)?;
        if x < self.c_star {
            Ok(ValueDerivs::zero())
        } else if x < self.e_star {
            Ok(self.j(x))
        } else {
            self.pre_exit.right_derivs(x)
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        let mut out = vec![self.c_star, self.e_star];
        out.extend(
            self.pre_exit
                .breakpoints()
                .into_iter()
                .filter(|&b| b > self.e_star),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exit_pre::solve_pre_exit;

    fn solve(alpha: f64) -> EntrySolution<f64> {
        let p = ModelParams::reference(alpha);
        let pre = solve_pre_exit(&p).unwrap();
        solve_entry(&p, &pre).unwrap()
    }

    #[test]
    fn reference_thresholds() {
        let left = solve(0.6);
        assert!((left.c_star - 1.21).abs() < 0.005, "{}", left.c_star);
        assert!((left.e_star - 6.66).abs() < 0.005, "{}", left.e_star);
        let right = solve(0.3);
        assert!((right.c_star - 2.55).abs() < 0.005, "{}", right.c_star);
        assert!((right.e_star - 10.81).abs() < 0.005, "{}", right.e_star);
    }

    #[test]
    fn residuals_below_tolerance() {
        for alpha in [0.3, 0.6] {
            let s = solve(alpha);
            assert!(s.max_residual() < 1e-9, "{:?}", s.residuals);
            assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        }
    }

    #[test]
    fn boundary_values() {
        let s = solve(0.6);
        assert_eq!(s.value(s.c_star).unwrap(), 0.0);
        let at_e = s.value(s.e_star).unwrap();
        let v = s.pre_exit.value(s.e_star).unwrap();
        assert!((at_e - v).abs() < 1e-9 * v.abs().max(1.0));
        let x = 2.0 * s.e_star;
        assert_eq!(s.value(x).unwrap(), s.pre_exit.value(x).unwrap());
    }

    #[test]
    fn scaled_and_raw_coefficients_agree() {
        let s = solve(0.3);
        assert!(
            (s.d1 * s.c_star.powf(s.q1) - s.d1_scaled).abs() < 1e-12 * s.d1_scaled.abs().max(1.0)
        );
        assert!(
            (s.d2 * s.e_star.powf(s.q2) - s.d2_scaled).abs() < 1e-12 * s.d2_scaled.abs().max(1.0)
        );
    }

    #[test]
    fn rejects_non_positive_price() {
        let s = solve(0.6);
        assert_eq!(s.value(0.0).unwrap_err().code(), "E_PRICE");
    }

    #[test]
    fn f32_close_to_f64() {
        let p = ModelParams::reference(0.6).cast::<f32>();
        let pre = solve_pre_exit(&p).unwrap();
        let s = solve_entry(&p, &pre).unwrap();
        let s64 = solve(0.6);
        assert!((s.c_star as f64 - s64.c_star).abs() < 1e-3);
        assert!((s.e_star as f64 - s64.e_star).abs() < 1e-3);
    }
}
