//! Shared shape of the piecewise value functions.

use crate::error::SolveError;
use crate::scalar::Scalar;

/// Value and its first two derivatives in the price.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValueDerivs<T> {
    pub value: T,
    pub first: T,
    pub second: T,
}

impl<T: Scalar> ValueDerivs<T> {
    pub fn zero() -> Self {
        ValueDerivs {
            value: T::zero(),
            first: T::zero(),
            second: T::zero(),
        }
    }

    /// `c x^p` and its derivatives.
    pub fn power(c: T, p: T, x: T) -> Self {
        if c == T::zero() {
            return Self::zero();
        }
        let v = c * crate::scalar::pow(x, p);
        ValueDerivs {
            value: v,
            first: v * p / x,
            second: v * p * (p - T::one()) / (x * x),
        }
    }

    /// Converts derivatives taken in `u = x / scale` to derivatives in `x`.
    pub fn rescale(self, scale: T) -> Self {
        ValueDerivs {
            value: self.value,
            first: self.first / scale,
            second: self.second / (scale * scale),
        }
    }

    /// `slope x + intercept`.
    pub fn affine(slope: T, intercept: T, x: T) -> Self {
        ValueDerivs {
            value: slope * x + intercept,
            first: slope,
            second: T::zero(),
        }
    }
}

impl<T: Scalar> std::ops::Add for ValueDerivs<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ValueDerivs {
            value: self.value + o.value,
            first: self.first + o.first,
            second: self.second + o.second,
        }
    }
}

/// A value function that is smooth between finitely many breakpoints.
///
/// At a breakpoint `derivs` reports the branch to its left, matching the
/// closed stopping regions `x <= threshold`.
pub trait PiecewiseValue<T: Scalar> {
    fn derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError>;

    /// Ascending branch boundaries.
    fn breakpoints(&self) -> Vec<T>;

    fn value(&self, x: T) -> Result<T, SolveError> {
        self.derivs(x).map(|d| d.value)
    }

    /// Derivatives of the branch that is active just to the right of `x`.
    fn right_derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError>;
}

pub(crate) fn check_price<T: Scalar>(x: T) -> Result<(), SolveError> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(SolveError::NonPositivePrice { x: x.as_f64() })
    }
}
