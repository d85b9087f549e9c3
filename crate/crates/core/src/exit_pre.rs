//! Abandonment before the competitor arrives.
//!
//! The competitor clock (rate `lambda2`) is folded into the discount rate,
//! so the firm earns `f(x) + lambda2 V~(x)` discounted at `rho + lambda2`.
//! Two regimes are separated by the critical revenue fraction `alpha0`:
//!
//! * case I (`K >= beta`, `alpha >= alpha0`): `a* >= a~*`, one continuation
//!   branch, `a*` is the root of `H` on `[a~*, inf)`;
//! * case II (`K < beta`, or `alpha < alpha0`): `a* < a~*`, continuation
//!   splits at `a~*`, `a*` is the root of `M` on `(0, a~*)`.
//!
//! Powers are evaluated relative to the branch endpoints (`(x / a*)^p`,
//! `(x / a~*)^p`) and the coefficients `C_i` are stored in that scaled form.

use crate::error::SolveError;
use crate::exit_post::{solve_post_exit, PostExitSolution};
use crate::model::{char_roots, validate, ModelParams};
use crate::rootfind::{brent, RootError};
use crate::scalar::{pow, Scalar};
use crate::value::{check_price, PiecewiseValue, ValueDerivs};

/// Half-width of the band around `alpha0` classified as [`CaseTag::Boundary`].
pub const CLASSIFICATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    CaseI,
    CaseII,
    /// `K >= beta` and `alpha == alpha0` within tolerance: `a* = a~*`.
    Boundary,
}

impl CaseTag {
    pub fn label(self) -> &'static str {
        match self {
            CaseTag::CaseI => "I",
            CaseTag::CaseII => "II",
            CaseTag::Boundary => "boundary",
        }
    }
}

/// Continuation-region coefficients in endpoint-scaled form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreExitCoefficients<T> {
    /// `V = c1_scaled (x / a*)^p1 + v1(x)` on `x > a*`, i.e. `C1 = c1_scaled (a*)^-p1`.
    Single { c1_scaled: T },
    /// Upper branch `c2_scaled (x / a~*)^p1 + v1(x)` on `x > a~*`; middle
    /// branch `c3_scaled (x / a*)^p1 + c4_scaled (x / a~*)^p2 + v2(x)` on
    /// `a* < x <= a~*`.
    Split {
        c2_scaled: T,
        c3_scaled: T,
        c4_scaled: T,
    },
}

/// Constants of `H`, `M` and the particular solutions `v1`, `v2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbandonmentEquations<T> {
    pub post: PostExitSolution<T>,
    pub alpha: T,
    pub k1: T,
    pub p1: T,
    pub p2: T,
    /// Slope of `v1`: `(rho + alpha lambda2 - mu) / ((rho + lambda2 - mu)(rho - mu))`.
    pub v1_slope: T,
    /// Constant of `v1`: `(beta lambda2 + rho K) / (rho (rho + lambda2))`.
    pub v1_intercept: T,
    /// Slope of `v2`: `1 / (rho + lambda2 - mu)`.
    pub v2_slope: T,
    /// Constant of `v2`: `K / (rho + lambda2)`.
    pub v2_intercept: T,
    /// Coefficient of `(x / a~*)^p2` in `M`.
    pub m_power_coeff: T,
    /// Coefficient of `(x / a~*)^k1` in `H`, times `a~*`.
    pub h_power_coeff: T,
}

impl<T: Scalar> AbandonmentEquations<T> {
    pub fn new(params: &ModelParams<T>, post: PostExitSolution<T>) -> Self {
        let m = &params.market;
        let (rho, mu, lam) = (m.rho, m.mu, params.hazards.lambda2);
        let (alpha, beta, cap_k) = (params.profit.alpha, params.profit.beta, params.profit.cap_k);
        let one = T::one();
        let k1 = post.k1;
        let roots = char_roots(m, lam);
        let (p1, p2) = (roots.h1, roots.h2);
        let v1_slope = (rho + alpha * lam - mu) / ((rho + lam - mu) * (rho - mu));
        let v1_intercept = (beta * lam + rho * cap_k) / (rho * (rho + lam));
        let m_power_coeff = ((p1 - k1) * rho * (rho + lam - mu) + k1 * mu * lam * (one - p1))
            / ((one - k1) * rho * (rho + lam) * (rho + lam - mu))
            * beta;
        let h_power_coeff = if post.a_tilde_star.is_finite() {
            alpha * (k1 - p1) / (k1 * (rho - mu)) * post.a_tilde_star
        } else {
            T::zero()
        };
        AbandonmentEquations {
            post,
            alpha,
            k1,
            p1,
            p2,
            v1_slope,
            v1_intercept,
            v2_slope: one / (rho + lam - mu),
            v2_intercept: cap_k / (rho + lam),
            m_power_coeff,
            h_power_coeff,
        }
    }

    fn a_tilde(&self) -> T {
        self.post.a_tilde_star
    }

    /// Unimodal function whose root on `[a~*, inf)` is the case-I threshold.
    pub fn h(&self, x: T) -> T {
        self.h_power_coeff * pow(x / self.a_tilde(), self.k1)
            + self.v1_slope * (self.p1 - T::one()) * x
            - self.p1 * self.v1_intercept
    }

    pub fn h_prime(&self, x: T) -> T {
        self.h_power_coeff * self.k1 * pow(x / self.a_tilde(), self.k1) / x
            + self.v1_slope * (self.p1 - T::one())
    }

    /// Maximiser of `H`, always below `a~*`.
    pub fn h_peak(&self) -> T {
        // v1_slope * alpha / slope = (rho + alpha lambda2 - mu) / (rho + lambda2 - mu)
        let ratio = (T::one() - self.p1) / (self.alpha * (self.k1 - self.p1))
            * (self.v1_slope * self.alpha / self.post.slope);
        self.a_tilde() * pow(ratio, (self.k1 - T::one()).recip())
    }

    /// Strictly decreasing function whose root on `(0, a~*)` is the case-II
    /// threshold.
    pub fn m(&self, x: T) -> T {
        self.m_power(x) + (self.p1 - T::one()) * self.v2_slope * x - self.p1 * self.v2_intercept
    }

    pub fn m_prime(&self, x: T) -> T {
        self.m_power(x) * self.p2 / x + (self.p1 - T::one()) * self.v2_slope
    }

    /// `M(0+) = -p1 K / (rho + lambda2)`.
    pub fn m_at_zero(&self) -> T {
        -self.p1 * self.v2_intercept
    }

    fn m_power(&self, x: T) -> T {
        if self.a_tilde().is_finite() {
            self.m_power_coeff * pow(x / self.a_tilde(), self.p2)
        } else {
            T::zero()
        }
    }

    /// `v1` with derivatives: particular solution on `x > a~*`.
    pub fn v1(&self, x: T) -> ValueDerivs<T> {
        self.post.power_term(x) + ValueDerivs::affine(self.v1_slope, -self.v1_intercept, x)
    }

    /// `v2` with derivatives: particular solution on `a* < x <= a~*`.
    pub fn v2(&self, x: T) -> ValueDerivs<T> {
        ValueDerivs::affine(self.v2_slope, -self.v2_intercept, x)
    }
}

/// `H(x)` for the given parameters.
pub fn h_fn<T: Scalar>(x: T, params: &ModelParams<T>) -> Result<T, SolveError> {
    check_price(x)?;
    let post = solve_post_exit(params)?;
    Ok(AbandonmentEquations::new(params, post).h(x))
}

/// `M(x)` for the given parameters.
pub fn m_fn<T: Scalar>(x: T, params: &ModelParams<T>) -> Result<T, SolveError> {
    check_price(x)?;
    let post = solve_post_exit(params)?;
    Ok(AbandonmentEquations::new(params, post).m(x))
}

fn alpha0_from_roots<T: Scalar>(params: &ModelParams<T>, k1: T, p1: T) -> T {
    let m = &params.market;
    let (rho, mu, lam) = (m.rho, m.mu, params.hazards.lambda2);
    let one = T::one();
    let ratio =
        rho * p1 * (k1 - one) * (rho + lam - mu) / (k1 * (p1 - one) * (rho - mu) * (rho + lam));
    (one - ratio * (one - params.profit.cap_k / params.profit.beta)).recip()
}

/// Critical revenue fraction separating case I from case II.
pub fn critical_alpha<T: Scalar>(params: &ModelParams<T>) -> T {
    let k1 = char_roots(&params.market, T::zero()).h1;
    let p1 = char_roots(&params.market, params.hazards.lambda2).h1;
    alpha0_from_roots(params, k1, p1)
}

/// Limit of [`critical_alpha`] as `lambda2 -> inf`.
pub fn critical_alpha_limit<T: Scalar>(params: &ModelParams<T>) -> T {
    let m = &params.market;
    let k1 = char_roots(m, T::zero()).h1;
    let one = T::one();
    (one + m.rho * (one - k1) / (k1 * (m.rho - m.mu))
        * (one - params.profit.cap_k / params.profit.beta))
        .recip()
}

/// Regime of the pre-competition problem.
pub fn classify<T: Scalar>(params: &ModelParams<T>, tol: T) -> CaseTag {
    classify_with(params, critical_alpha(params), tol)
}

fn classify_with<T: Scalar>(params: &ModelParams<T>, alpha0: T, tol: T) -> CaseTag {
    let (alpha, beta, cap_k) = (params.profit.alpha, params.profit.beta, params.profit.cap_k);
    if cap_k < beta {
        CaseTag::CaseII
    } else if alpha >= alpha0 + tol {
        CaseTag::CaseI
    } else if alpha < alpha0 - tol {
        CaseTag::CaseII
    } else {
        CaseTag::Boundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreExitSolution<T> {
    pub case: CaseTag,
    pub a_star: T,
    pub alpha0: T,
    pub p1: T,
    pub p2: T,
    pub coefficients: PreExitCoefficients<T>,
    pub equations: AbandonmentEquations<T>,
    /// Largest scaled residual of the value-matching / pasting system.
    pub system_residual: T,
}

/// Solves the pre-competition abandonment problem.
pub fn solve_pre_exit<T: Scalar>(
    params: &ModelParams<T>,
) -> Result<PreExitSolution<T>, SolveError> {
    let report = validate(params);
    if !report.is_ok() {
        return Err(SolveError::Invalid(report));
    }
    let post = solve_post_exit(params)?;
    let eq = AbandonmentEquations::new(params, post);
    let alpha0 = alpha0_from_roots(params, eq.k1, eq.p1);
    let case = classify_with(params, alpha0, T::lit(CLASSIFICATION_TOL));
    let a_tilde = post.a_tilde_star;

    let (a_star, coefficients) = match case {
        CaseTag::Boundary => (a_tilde, single_branch(&eq, a_tilde)),
        CaseTag::CaseI => {
            let a = case_one_root(&eq)?;
            (a, single_branch(&eq, a))
        }
        CaseTag::CaseII => {
            let a = case_two_root(&eq)?;
            (a, split_branches(&eq, a))
        }
    };

    let mut sol = PreExitSolution {
        case,
        a_star,
        alpha0,
        p1: eq.p1,
        p2: eq.p2,
        coefficients,
        equations: eq,
        system_residual: T::zero(),
    };
    sol.system_residual = sol.pasting_residuals().into_iter().fold(T::zero(), T::max);
    let tol = T::system_tol();
    if !(sol.system_residual <= tol) {
        return Err(SolveError::Inconsistent {
            what: "pre-competition pasting system",
            residual: sol.system_residual.as_f64(),
        });
    }
    Ok(sol)
}

fn single_branch<T: Scalar>(eq: &AbandonmentEquations<T>, a: T) -> PreExitCoefficients<T> {
    PreExitCoefficients::Single {
        c1_scaled: -eq.v1(a).value,
    }
}

fn split_branches<T: Scalar>(eq: &AbandonmentEquations<T>, a: T) -> PreExitCoefficients<T> {
    let (p1, p2) = (eq.p1, eq.p2);
    let a_tilde = eq.post.a_tilde_star;
    if !a_tilde.is_finite() {
        // No upper branch; the x^p2 term must vanish for growth at infinity.
        return PreExitCoefficients::Split {
            c2_scaled: T::zero(),
            c3_scaled: -eq.v2(a).value,
            c4_scaled: T::zero(),
        };
    }
    // Continuity of value and slope at a~* fixes C4 and C3 - C2 without
    // reference to a*. Anchoring the x^p2 term at a~* keeps (x / a~*)^p2 <= 1
    // on the middle branch, so large p2 cannot amplify rounding in a*.
    let jump = eq.v1(a_tilde) + ValueDerivs::affine(-eq.v2_slope, eq.v2_intercept, a_tilde);
    let c4_scaled = (a_tilde * jump.first - p1 * jump.value) / (p2 - p1);
    let diff_scaled = jump.value - c4_scaled; // (C3 - C2) a~*^p1
                                              // Value matching at a*.
    let c3_scaled = -eq.v2(a).value - c4_scaled * pow(a / a_tilde, p2);
    let c2_scaled = c3_scaled * pow(a_tilde / a, p1) - diff_scaled;
    PreExitCoefficients::Split {
        c2_scaled,
        c3_scaled,
        c4_scaled,
    }
}

fn bracket_err(context: &'static str) -> impl Fn(RootError) -> SolveError {
    move |source| SolveError::Bracket { context, source }
}

fn case_one_root<T: Scalar>(eq: &AbandonmentEquations<T>) -> Result<T, SolveError> {
    let a_tilde = eq.post.a_tilde_star;
    let h_lo = eq.h(a_tilde);
    let peak = eq.h_peak();
    if !(h_lo >= T::zero()) || !(peak < a_tilde) || !(eq.h_prime(a_tilde) < T::zero()) {
        return Err(SolveError::Bracket {
            context: "case I: H must be non-negative and decreasing at a~*",
            source: RootError::NoSignChange {
                lo: a_tilde.as_f64(),
                hi: a_tilde.as_f64(),
                flo: h_lo.as_f64(),
                fhi: h_lo.as_f64(),
            },
        });
    }
    if h_lo == T::zero() {
        return Ok(a_tilde);
    }
    let two = T::lit(2.0);
    let mut hi = two * a_tilde.max(peak);
    let mut expansions = 0;
    while eq.h(hi) >= T::zero() {
        hi = hi * two;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(SolveError::Bracket {
                context: "case I: H never turns negative",
                source: RootError::MaxIter {
                    iterations: expansions,
                },
            });
        }
    }
    brent(|x| eq.h(x), a_tilde, hi, T::root_xtol(), 200)
        .map(|r| r.x)
        .map_err(bracket_err("case I root of H"))
}

fn case_two_root<T: Scalar>(eq: &AbandonmentEquations<T>) -> Result<T, SolveError> {
    let a_tilde = eq.post.a_tilde_star;
    if !a_tilde.is_finite() {
        // No post-competition value: M is affine.
        return Ok(eq.p1 * eq.v2_intercept / ((eq.p1 - T::one()) * eq.v2_slope));
    }
    let m_hi = eq.m(a_tilde);
    if !(m_hi < T::zero()) || !(eq.m_at_zero() > T::zero()) {
        return Err(SolveError::Bracket {
            context: "case II: M must change sign on (0, a~*)",
            source: RootError::NoSignChange {
                lo: 0.0,
                hi: a_tilde.as_f64(),
                flo: eq.m_at_zero().as_f64(),
                fhi: m_hi.as_f64(),
            },
        });
    }
    let half = T::lit(0.5);
    let mut lo = a_tilde * half;
    let mut shrinks = 0;
    while eq.m(lo) <= T::zero() {
        lo = lo * half;
        shrinks += 1;
        if shrinks > 1000 || lo == T::zero() {
            return Err(SolveError::Bracket {
                context: "case II: M never turns positive near 0",
                source: RootError::MaxIter {
                    iterations: shrinks,
                },
            });
        }
    }
    brent(|x| eq.m(x), lo, a_tilde, T::root_xtol(), 200)
        .map(|r| r.x)
        .map_err(bracket_err("case II root of M"))
}

impl<T: Scalar> PreExitSolution<T> {
    pub fn post(&self) -> &PostExitSolution<T> {
        &self.equations.post
    }

    pub fn a_tilde_star(&self) -> T {
        self.equations.post.a_tilde_star
    }

    /// Unscaled coefficients `(C1, C2, C3, C4)`; entries not used by the
    /// case are `None`. May overflow for extreme roots.
    pub fn raw_coefficients(&self) -> [Option<T>; 4] {
        match self.coefficients {
            PreExitCoefficients::Single { c1_scaled } => [
                Some(c1_scaled * pow(self.a_star, -self.p1)),
                None,
                None,
                None,
            ],
            PreExitCoefficients::Split {
                c2_scaled,
                c3_scaled,
                c4_scaled,
            } => [
                None,
                Some(c2_scaled * pow(self.a_tilde_star(), -self.p1)),
                Some(c3_scaled * pow(self.a_star, -self.p1)),
                Some(c4_scaled * pow(self.a_tilde_star(), -self.p2)),
            ],
        }
    }

    /// Summands of the branch above `a~*` (or above `a*` in case I).
    fn upper_parts(&self, x: T) -> [ValueDerivs<T>; 3] {
        let eq = &self.equations;
        let (coeff, anchor) = match self.coefficients {
            PreExitCoefficients::Single { c1_scaled } => (c1_scaled, self.a_star),
            PreExitCoefficients::Split { c2_scaled, .. } => (c2_scaled, self.a_tilde_star()),
        };
        [
            ValueDerivs::power(coeff, self.p1, x / anchor).rescale(anchor),
            eq.post.power_term(x),
            ValueDerivs::affine(eq.v1_slope, -eq.v1_intercept, x),
        ]
    }

    /// Summands of the case-II branch on `(a*, a~*]`.
    fn middle_parts(&self, x: T) -> [ValueDerivs<T>; 3] {
        match self.coefficients {
            PreExitCoefficients::Split {
                c3_scaled,
                c4_scaled,
                ..
            } => {
                let (a, at) = (self.a_star, self.a_tilde_star());
                [
                    ValueDerivs::power(c3_scaled, self.p1, x / a).rescale(a),
                    ValueDerivs::power(c4_scaled, self.p2, x / at).rescale(at),
                    self.equations.v2(x),
                ]
            }
            PreExitCoefficients::Single { .. } => self.upper_parts(x),
        }
    }

    fn upper(&self, x: T) -> ValueDerivs<T> {
        let [a, b, c] = self.upper_parts(x);
        a + b + c
    }

    fn middle(&self, x: T) -> ValueDerivs<T> {
        let [a, b, c] = self.middle_parts(x);
        a + b + c
    }

    fn split_point(&self) -> Option<T> {
        match self.coefficients {
            PreExitCoefficients::Split { .. } if self.a_tilde_star().is_finite() => {
                Some(self.a_tilde_star())
            }
            PreExitCoefficients::Split { .. } => Some(T::infinity()),
            PreExitCoefficients::Single { .. } => None,
        }
    }

    /// Scaled residuals of value matching / smooth pasting at `a*` and, in
    /// case II, continuity of value and slope at `a~*`.
    ///
    /// Each gap is divided by the largest summand involved (at least 1), so
    /// cancellation between large power terms does not count as an error.
    pub fn pasting_residuals(&self) -> Vec<T> {
        let a = self.a_star;
        let gaps = |lhs: [ValueDerivs<T>; 3], rhs: Option<[ValueDerivs<T>; 3]>| {
            let rhs = rhs.unwrap_or([ValueDerivs::zero(); 3]);
            let sum = |p: &[ValueDerivs<T>; 3]| p[0] + p[1] + p[2];
            let (l, r) = (sum(&lhs), sum(&rhs));
            let mut value_scale = T::one();
            let mut slope_scale = T::one();
            for part in lhs.iter().chain(rhs.iter()) {
                value_scale = value_scale.max(part.value.abs());
                slope_scale = slope_scale.max(part.first.abs());
            }
            [
                (l.value - r.value).abs() / value_scale,
                (l.first - r.first).abs() / slope_scale,
            ]
        };
        let mut out = Vec::with_capacity(4);
        match self.split_point() {
            None => out.extend(gaps(self.upper_parts(a), None)),
            Some(at) => {
                out.extend(gaps(self.middle_parts(a), None));
                if at.is_finite() {
                    out.extend(gaps(self.middle_parts(at), Some(self.upper_parts(at))));
                }
            }
        }
        out
    }
}

impl<T: Scalar> PiecewiseValue<T> for PreExitSolution<T> {
    fn derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError> {
        check_price(x)?;
        if x <= self.a_star {
            return Ok(ValueDerivs::zero());
        }
        Ok(match self.split_point() {
            Some(at) if x <= at => self.middle(x),
            _ => self.upper(x),
        })
    }

    fn right_derivs(&self, x: T) -> Result<ValueDerivs<T>, SolveError> {
        check_price(x)?;
        if x < self.a_star {
            return Ok(ValueDerivs::zero());
        }
        Ok(match self.split_point() {
            Some(at) if x < at => self.middle(x),
            _ => self.upper(x),
        })
    }

    fn breakpoints(&self) -> Vec<T> {
        match self.split_point() {
            Some(at) if at.is_finite() => vec![self.a_star, at],
            _ => vec![self.a_star],
        }
    }
}
