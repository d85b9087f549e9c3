//! Real-options model of when to launch, cancel and abandon a startup under
//! early termination of the incubation phase and competitor arrival.
//!
//! The analytic solvers are generic over [`Scalar`] (`f32` or `f64`); the
//! Monte Carlo oracle in [`verify`] works in `f64`. The aliases below fix the
//! scalar type for the common case.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entry;
pub mod error;
pub mod exit_post;
pub mod exit_pre;
pub mod model;
pub mod rootfind;
pub mod scalar;
pub mod value;
pub mod verify;

pub use entry::{solve_entry, EntrySolution};
pub use error::SolveError;
pub use exit_post::{solve_post_exit, PostExitSolution};
pub use exit_pre::{
    classify, critical_alpha, critical_alpha_limit, solve_pre_exit, CaseTag, PreExitSolution,
};
pub use model::{validate, ModelParams, RootSet, ValidationReport};
pub use scalar::Scalar;
pub use value::{PiecewiseValue, ValueDerivs};

pub type Params = ModelParams<f64>;
pub type PostExit = PostExitSolution<f64>;
pub type PreExit = PreExitSolution<f64>;
pub type Entry = EntrySolution<f64>;

pub type Params32 = ModelParams<f32>;
pub type PostExit32 = PostExitSolution<f32>;
pub type PreExit32 = PreExitSolution<f32>;
pub type Entry32 = EntrySolution<f32>;

/// Solves the whole chain: post-competition, pre-competition, then entry.
pub fn solve_all<T: Scalar>(params: &ModelParams<T>) -> Result<EntrySolution<T>, SolveError> {
    let pre = solve_pre_exit(params)?;
    solve_entry(params, &pre)
}
