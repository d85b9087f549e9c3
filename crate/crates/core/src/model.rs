//! Model parameters, cash-flow streams and characteristic roots.
//!
//! All rates (`mu`, `rho`, `lambda1`, `lambda2`) must be expressed in the
//! same time unit; the library never assumes one. The customary symbol
//! `a` for the incubation-cost slope is spelled `cost_slope` here so that it
//! cannot be confused with the abandonment thresholds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Price dynamics and time preference: `dX = mu X dt + sigma X dB`,
/// discounted at `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams<T> {
    pub mu: T,
    pub sigma: T,
    pub rho: T,
}

/// Profit streams before (`f(x) = x - cap_k`) and after
/// (`g(x) = alpha x - beta`) the competitor arrives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitParams<T> {
    pub alpha: T,
    pub beta: T,
    pub cap_k: T,
}

/// Incubation cost `c(x) = cost_slope x + cost_intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams<T> {
    pub cost_slope: T,
    pub cost_intercept: T,
}

/// Intensities of the two exponential clocks: early termination during
/// incubation (`lambda1`) and competitor arrival after entry (`lambda2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardRates<T> {
    pub lambda1: T,
    pub lambda2: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub market: MarketParams<T>,
    pub profit: ProfitParams<T>,
    pub cost: CostParams<T>,
    pub hazards: HazardRates<T>,
}

/// Post-competition profit `g(x) = alpha x - beta`.
#[inline]
pub fn profit_post<T: Scalar>(x: T, profit: &ProfitParams<T>) -> T {
    profit.alpha * x - profit.beta
}

/// Pre-competition profit `f(x) = x - K`.
#[inline]
pub fn profit_pre<T: Scalar>(x: T, profit: &ProfitParams<T>) -> T {
    x - profit.cap_k
}

/// Incubation cost `c(x) = cost_slope x + cost_intercept`.
#[inline]
pub fn cost_incubation<T: Scalar>(x: T, cost: &CostParams<T>) -> T {
    cost.cost_slope * x + cost.cost_intercept
}

/// One violated standing assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `rho <= mu`: never abandoning has infinite expected value.
    InfiniteValue {
        rho: f64,
        mu: f64,
    },
    /// A field outside its admissible range.
    OutOfRange {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
    NonFinite {
        field: &'static str,
    },
}

impl Violation {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::InfiniteValue { .. } => "E_INFINITE_VALUE",
            Violation::OutOfRange { .. } => "E_OUT_OF_RANGE",
            Violation::NonFinite { .. } => "E_NON_FINITE",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InfiniteValue { rho, mu } => write!(
                f,
                "infinite-value regime: rho = {rho} must exceed mu = {mu}"
            ),
            Violation::OutOfRange {
                field,
                value,
                constraint,
            } => write!(f, "{field} = {value} violates {constraint}"),
            Violation::NonFinite { field } => write!(f, "{field} is not finite"),
        }
    }
}

/// Outcome of [`validate`]. Warnings never make a report fail.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_infinite_value(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::InfiniteValue { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks every standing assumption and reports all violations at once.
///
/// `alpha == 0` is accepted with a warning: the post-competition stream is
/// then a pure loss and the firm abandons as soon as the competitor arrives.
pub fn validate<T: Scalar>(params: &ModelParams<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let fields: [(&'static str, T); 10] = [
        ("mu", params.market.mu),
        ("sigma", params.market.sigma),
        ("rho", params.market.rho),
        ("alpha", params.profit.alpha),
        ("beta", params.profit.beta),
        ("cap_k", params.profit.cap_k),
        ("cost_slope", params.cost.cost_slope),
        ("cost_intercept", params.cost.cost_intercept),
        ("lambda1", params.hazards.lambda1),
        ("lambda2", params.hazards.lambda2),
    ];
    for (field, value) in fields {
        if !value.is_finite() {
            report.violations.push(Violation::NonFinite { field });
        }
    }
    if !report.violations.is_empty() {
        return report;
    }

    let zero = T::zero();
    let mut positive = |field: &'static str, v: T| {
        if v <= zero {
            report.violations.push(Violation::OutOfRange {
                field,
                value: v.as_f64(),
                constraint: "> 0",
            });
        }
    };
    positive("mu", params.market.mu);
    positive("sigma", params.market.sigma);
    positive("rho", params.market.rho);
    positive("beta", params.profit.beta);
    positive("cap_k", params.profit.cap_k);
    positive("cost_slope", params.cost.cost_slope);
    positive("cost_intercept", params.cost.cost_intercept);

    let alpha = params.profit.alpha;
    if alpha < zero || alpha > T::one() {
        report.violations.push(Violation::OutOfRange {
            field: "alpha",
            value: alpha.as_f64(),
            constraint: "0 < alpha <= 1",
        });
    } else if alpha == zero {
        report
            .warnings
            .push("alpha = 0: post-competition abandonment threshold is infinite".into());
    }

    for (field, v) in [
        ("lambda1", params.hazards.lambda1),
        ("lambda2", params.hazards.lambda2),
    ] {
        if v < zero {
            report.violations.push(Violation::OutOfRange {
                field,
                value: v.as_f64(),
                constraint: ">= 0",
            });
        }
    }

    if params.market.rho <= params.market.mu {
        report.violations.push(Violation::InfiniteValue {
            rho: params.market.rho.as_f64(),
            mu: params.market.mu.as_f64(),
        });
    }
    report
}

/// Roots of `(sigma^2/2) h (h - 1) + mu h - (rho + lambda) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRoots<T> {
    pub lambda: T,
    /// Negative root.
    pub h1: T,
    /// Positive root.
    pub h2: T,
}

/// Closed-form characteristic roots for hazard shift `lambda`.
///
/// The root whose formula has no cancellation is evaluated directly and the
/// other one follows from the product `h1 h2 = -2 (rho + lambda) / sigma^2`.
pub fn char_roots<T: Scalar>(market: &MarketParams<T>, lambda: T) -> CharRoots<T> {
    let two = T::lit(2.0);
    let s2 = market.sigma * market.sigma;
    let b = s2 / two - market.mu;
    let r = market.rho + lambda;
    let disc = (b * b + two * s2 * r).sqrt();
    let (h1, h2) = if b >= T::zero() {
        let h2 = (b + disc) / s2;
        (-two * r / (b + disc), h2)
    } else {
        let h1 = (b - disc) / s2;
        (h1, two * r / (disc - b))
    };
    CharRoots { lambda, h1, h2 }
}

/// The five roots the solvers use: `k1 = h1(0)`, `p_i = h_i(lambda2)`,
/// `q_i = h_i(lambda1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSet<T> {
    pub k1: T,
    pub p1: T,
    pub p2: T,
    pub q1: T,
    pub q2: T,
}

impl<T: Scalar> RootSet<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let k = char_roots(&params.market, T::zero());
        let p = char_roots(&params.market, params.hazards.lambda2);
        let q = char_roots(&params.market, params.hazards.lambda1);
        RootSet {
            k1: k.h1,
            p1: p.h1,
            p2: p.h2,
            q1: q.h1,
            q2: q.h2,
        }
    }
}

impl ModelParams<f64> {
    /// Common parameters of the reference worked examples with the given
    /// `alpha` (0.6 lands in case I, 0.3 in case II).
    pub fn reference(alpha: f64) -> Self {
        ModelParams {
            market: MarketParams {
                mu: 0.03,
                sigma: 0.2,
                rho: 0.05,
            },
            profit: ProfitParams {
                alpha,
                beta: 7.0,
                cap_k: 10.0,
            },
            cost: CostParams {
                cost_slope: 0.1,
                cost_intercept: 0.1,
            },
            hazards: HazardRates {
                lambda1: 0.1,
                lambda2: 0.2,
            },
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Converts between scalar types field by field.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c = |v: T| U::lit(v.as_f64());
        ModelParams {
            market: MarketParams {
                mu: c(self.market.mu),
                sigma: c(self.market.sigma),
                rho: c(self.market.rho),
            },
            profit: ProfitParams {
                alpha: c(self.profit.alpha),
                beta: c(self.profit.beta),
                cap_k: c(self.profit.cap_k),
            },
            cost: CostParams {
                cost_slope: c(self.cost.cost_slope),
                cost_intercept: c(self.cost.cost_intercept),
            },
            hazards: HazardRates {
                lambda1: c(self.hazards.lambda1),
                lambda2: c(self.hazards.lambda2),
            },
        }
    }
}
