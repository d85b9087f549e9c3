//! Floating-point abstraction shared by the analytic solvers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the closed-form solvers are written against: `f32` or `f64`.
///
/// The tolerances are per type because the solvers push root-finding down
/// to the precision the type can actually resolve.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Relative bracket width at which scalar root refinement stops.
    fn root_xtol() -> Self;

    /// Relative step size at which the 2D Newton iteration is converged.
    fn newton_step_tol() -> Self;

    /// Scaled residual below which a free-boundary system counts as solved.
    fn system_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the conversion is not
    /// representable, which cannot happen for the finite literals used here.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn root_xtol() -> Self {
        1e-6
    }
    fn newton_step_tol() -> Self {
        1e-6
    }
    fn system_tol() -> Self {
        1e-3
    }
}

impl Scalar for f64 {
    fn root_xtol() -> Self {
        1e-14
    }
    fn newton_step_tol() -> Self {
        1e-12
    }
    fn system_tol() -> Self {
        1e-9
    }
}

/// `x^p` evaluated as `exp(p ln x)`, which stays finite for large `x` and
/// negative `p`.
#[inline]
pub fn pow<T: Scalar>(x: T, p: T) -> T {
    (p * x.ln()).exp()
}
