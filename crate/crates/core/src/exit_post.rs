//! Abandonment after the competitor has arrived.
//!
//! The firm earns `g(x) = alpha x - beta` until it abandons at the first
//! passage below `a_tilde_star`. On the continuation region the value is
//! `B1 x^k1 + alpha x / (rho - mu) - beta / rho` with `k1 = h1(0) < 0`.

use crate::error::SolveError;
use crate::model::{char_roots, validate, ModelParams};
use crate::scalar::Scalar;
use crate::value::{check_price, PiecewiseValue, ValueDerivs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostExitSolution<T> {
    /// Abandonment threshold; `+inf` when `alpha == 0`.
    pub a_tilde_star: T,
    pub k1: T,
    /// Coefficient of `x^k1` on the continuation region.
    pub coeff_b1: T,
    /// Slope `alpha / (rho - mu)` of the never-abandon value.
    pub slope: T,
    /// Discounted fixed cost `beta / rho`.
    pub intercept: T,
}

/// Optimal post-competition threshold and value function.
pub fn solve_post_exit<T: Scalar>(
    params: &ModelParams<T>,
) -> Result<PostExitSolution<T>, SolveError> {
    let report = validate(params);
    if !report.is_ok() {
        return Err(SolveError::Invalid(report));
    }
    let threshold = optimal_threshold(params);
    Ok(PostExitSolution::with_threshold(params, threshold))
}

/// `((rho - mu) / rho) (k1 / (k1 - 1)) (beta / alpha)`.
pub fn optimal_threshold<T: Scalar>(params: &ModelParams<T>) -> T {
    let m = &params.market;
    let k1 = char_roots(m, T::zero()).h1;
    if params.profit.alpha == T::zero() {
        return T::infinity();
    }
    (m.rho - m.mu) / m.rho * (k1 / (k1 - T::one())) * (params.profit.beta / params.profit.alpha)
}

impl<T: Scalar> PostExitSolution<T> {
    /// Value of abandoning at an arbitrary level `threshold`, fixed by value
    /// matching alone. Only the optimal level also pastes smoothly.
    pub fn with_threshold(params: &ModelParams<T>, threshold: T) -> Self {
        let m = &params.market;
        let k1 = char_roots(m, T::zero()).h1;
        let slope = params.profit.alpha / (m.rho - m.mu);
        let intercept = params.profit.beta / m.rho;
        let coeff_b1 = if threshold.is_finite() {
            let g0 = slope * threshold - intercept;
            -g0 * crate::scalar::pow(threshold, -k1)
        } else {
            T::zero()
        };
        PostExitSolution {
            a_tilde_star: threshold,
            k1,
            coeff_b1,
            slope,
            intercept,
        }
    }

    /// Closed-form coefficient `-alpha (a~*)^(1-k1) / (k1 (rho - mu))`,
    /// kept separately from the value-matching route as a cross-check.
    pub fn closed_form_b1(&self) -> T {
        -self.slope * crate::scalar::pow(self.a_tilde_star, T::one() - self.k1) / self.k1
    }

    /// `B1 x^k1` written as `B1 (a~*)^k1 (x / a~*)^k1` so that neither factor
    /// overflows.
    pub(crate) fn power_term(&self, x: T) -> ValueDerivs<T> {
        if !self.a_tilde_star.is_finite() {
            return ValueDerivs::zero();
        }
        let scaled = -(self.slope * self.a_tilde_star - self.intercept);
        ValueDerivs::power(scaled, self.k1, x / self.a_tilde_star).rescale(self.a_tilde_star)
    }

    fn continuation(&self, x: T) -> ValueDerivs<T> {
        self.power_term(x) + ValueDerivs::affine(self.slope, -self.intercept, x)
    }
}

impl<T: Scalar> PiecewiseValue<T> for PostExitSolution<T> {
    fn derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError> {
        check_price(x)?;
        if x <= self.a_tilde_star {
            Ok(ValueDerivs::zero())
        } else {
            Ok(self.continuation(x))
        }
    }

    fn right_derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError> {
        check_price(x)?;
        if x < self.a_tilde_star {
            Ok(ValueDerivs::zero())
        } else {
            Ok(self.continuation(x))
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        if self.a_tilde_star.is_finite() {
            vec![self.a_tilde_star]
        } else {
            Vec::new()
        }
    }
}
