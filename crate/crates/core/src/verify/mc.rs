//! Path simulation of threshold strategies under GBM with two exponential
//! clocks.
//!
//! Log-prices move by exact Gaussian increments. Crossings are checked at
//! the end of each step and flows are integrated with the trapezoid rule
//! against `exp(-rho t)`. Every step length is a whole multiple of `dt`:
//! near a barrier it is `dt` itself, and further away it grows as long as
//! an `8 sigma` move cannot reach the barrier within the step (capped at
//! `max_step`). A step is cut short to land exactly on a clock ring or on
//! the horizon.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entry::EntrySolution;
use crate::exit_post::PostExitSolution;
use crate::model::{validate, ModelParams};
use crate::value::PiecewiseValue;

use super::rng::{pairwise_sum, path_rng, CLOCK_STREAM, NORMAL_STREAM};

/// How far (in standard deviations of a step) a coarse step must stay from
/// every barrier.
const SAFETY_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid strategy: {0}")]
    Strategy(String),
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),
    #[error("starting price must be positive and finite, got {0}")]
    Price(f64),
}

/// Fixed-level stopping rule for every decision of the firm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStrategy {
    /// Cancel the project the first time the price is at or below this level.
    pub cancel_at: f64,
    /// Enter the market the first time the price is at or above this level.
    pub enter_at: f64,
    /// Abandon before the competitor arrives.
    pub abandon_pre_at: f64,
    /// Abandon after the competitor arrives.
    pub abandon_post_at: f64,
}

impl ThresholdStrategy {
    /// The analytic optimum.
    pub fn optimal(sol: &EntrySolution<f64>) -> Self {
        ThresholdStrategy {
            cancel_at: sol.c_star,
            enter_at: sol.e_star,
            abandon_pre_at: sol.pre_exit.a_star,
            abandon_post_at: sol.pre_exit.a_tilde_star(),
        }
    }

    pub fn check(&self) -> Result<(), McError> {
        for (name, v) in [
            ("cancel_at", self.cancel_at),
            ("enter_at", self.enter_at),
            ("abandon_pre_at", self.abandon_pre_at),
            ("abandon_post_at", self.abandon_post_at),
        ] {
            // An infinite abandonment level (alpha = 0) is admissible.
            if !(v > 0.0) || v.is_nan() {
                return Err(McError::Strategy(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.cancel_at <= self.enter_at) || self.enter_at.is_infinite() {
            return Err(McError::Strategy(format!(
                "cancel_at = {} must not exceed a finite enter_at = {}",
                self.cancel_at, self.enter_at
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: u64,
    /// Monitoring step, in the rate time unit.
    pub dt: f64,
    /// Paths are cut off at this time.
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
    /// Longest step taken far from every barrier.
    pub max_step: f64,
}

/// Time at which `exp(-(rho - mu) t)` falls below `1e-4`, capped at 500.
pub fn default_horizon(params: &ModelParams<f64>) -> f64 {
    let gap = params.market.rho - params.market.mu;
    if gap > 0.0 {
        (1e4f64.ln() / gap).min(500.0)
    } else {
        500.0
    }
}

impl McConfig {
    pub fn for_params(params: &ModelParams<f64>) -> Self {
        McConfig {
            n_paths: 100_000,
            dt: 1e-3,
            horizon: default_horizon(params),
            seed: 0x5eed,
            antithetic: true,
            max_step: 1.0,
        }
    }

    pub fn check(&self) -> Result<(), McError> {
        if self.n_paths == 0 {
            return Err(McError::Config("n_paths must be at least 1".into()));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("horizon", self.horizon),
            ("max_step", self.max_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(McError::Config(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// Which value function a simulation estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Competitor already present; only `abandon_post_at` matters.
    PostCompetition,
    /// In the market, competitor not yet arrived.
    PostEntry,
    /// Incubating, before entry.
    PreEntry,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::PostCompetition => "post_competition",
            Stage::PostEntry => "post_entry",
            Stage::PreEntry => "pre_entry",
        }
    }
}

/// How the competitor's arrival is represented in the post-entry stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PostEntryForm {
    /// Draw the arrival time and switch profit streams when it rings.
    TwoClock,
    /// Discount at `rho + lambda2` and add `lambda2` times the analytic
    /// post-competition value of `abandon_post_at` to the flow.
    Killed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_paths: u64,
    /// Upper bound on the expected discounted flow after the horizon:
    /// `exp(-(rho - mu) T) (s x0 / (rho - mu) + b / rho)`, where `s x + b`
    /// dominates the absolute flow of every phase.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Incubation,
    Operating,
    Killed,
    Competing,
}

/// Everything a path needs, in log-price form.
struct Simulator {
    nu: f64,
    sigma: f64,
    rho: f64,
    lambda1: f64,
    lambda2: f64,
    /// Admissible step lengths, shortest first.
    levels: Vec<StepLevel>,
    horizon: f64,
    log_cancel: f64,
    log_enter: f64,
    log_abandon_pre: f64,
    log_abandon_post: f64,
    params: ModelParams<f64>,
    post_value: PostExitSolution<f64>,
    operating: Phase,
}

impl Simulator {
    fn new(
        params: &ModelParams<f64>,
        strategy: &ThresholdStrategy,
        form: PostEntryForm,
        cfg: &McConfig,
    ) -> Self {
        let m = &params.market;
        Simulator {
            nu: m.mu - 0.5 * m.sigma * m.sigma,
            sigma: m.sigma,
            rho: m.rho,
            lambda1: params.hazards.lambda1,
            lambda2: params.hazards.lambda2,
            levels: step_levels(
                m.mu - 0.5 * m.sigma * m.sigma,
                m.sigma,
                m.rho,
                params.hazards.lambda2,
                cfg,
            ),
            horizon: cfg.horizon,
            log_cancel: strategy.cancel_at.ln(),
            log_enter: strategy.enter_at.ln(),
            log_abandon_pre: strategy.abandon_pre_at.ln(),
            log_abandon_post: strategy.abandon_post_at.ln(),
            params: *params,
            post_value: PostExitSolution::with_threshold(params, strategy.abandon_post_at),
            operating: match form {
                PostEntryForm::TwoClock => Phase::Operating,
                PostEntryForm::Killed => Phase::Killed,
            },
        }
    }

    fn lower(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Incubation => self.log_cancel,
            Phase::Operating | Phase::Killed => self.log_abandon_pre,
            Phase::Competing => self.log_abandon_post,
        }
    }

    fn upper(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Incubation => self.log_enter,
            _ => f64::INFINITY,
        }
    }

    fn discount_rate(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Killed => self.rho + self.lambda2,
            _ => self.rho,
        }
    }

    fn flow(&self, phase: Phase, x: f64) -> f64 {
        let p = &self.params;
        match phase {
            Phase::Incubation => -(p.cost.cost_slope * x + p.cost.cost_intercept),
            Phase::Operating => x - p.profit.cap_k,
            Phase::Killed => {
                let w = self.post_value.value(x).unwrap_or(0.0);
                x - p.profit.cap_k + self.lambda2 * w
            }
            Phase::Competing => p.profit.alpha * x - p.profit.beta,
        }
    }

    /// Longest step that keeps an `8 sigma` move away from the nearest
    /// barrier; the shortest step when none does.
    fn level(&self, distance: f64) -> &StepLevel {
        self.levels
            .iter()
            .rev()
            .find(|l| l.reach <= distance)
            .unwrap_or(&self.levels[0])
    }

    fn clock(&self, rate: f64, from: f64, rng: &mut ChaCha8Rng) -> f64 {
        if rate > 0.0 {
            let e: f64 = rng.sample(Exp1);
            from + e / rate
        } else {
            f64::INFINITY
        }
    }

    /// Discounted payoff of one path. `sign` flips every Brownian increment.
    fn run(
        &self,
        stage: Stage,
        x0: f64,
        normals: &mut ChaCha8Rng,
        clocks: &mut ChaCha8Rng,
        sign: f64,
    ) -> f64 {
        let mut phase = match stage {
            Stage::PreEntry => Phase::Incubation,
            Stage::PostEntry => self.operating,
            Stage::PostCompetition => Phase::Competing,
        };
        let mut t = 0.0f64;
        let mut y = x0.ln();
        let mut disc = 1.0f64;
        let mut total = 0.0f64;
        let mut ring = match phase {
            Phase::Incubation => self.clock(self.lambda1, 0.0, clocks),
            Phase::Operating => self.clock(self.lambda2, 0.0, clocks),
            _ => f64::INFINITY,
        };

        'phases: loop {
            // Stopping and switching are checked on arrival in a phase.
            loop {
                if y <= self.lower(phase) {
                    return total;
                }
                if y >= self.upper(phase) {
                    phase = self.operating;
                    if phase == Phase::Operating {
                        ring = self.clock(self.lambda2, t, clocks);
                    } else {
                        ring = f64::INFINITY;
                    }
                    continue;
                }
                break;
            }
            let lower = self.lower(phase);
            let upper = self.upper(phase);
            let rate = self.discount_rate(phase);
            let killed = phase == Phase::Killed;
            let mut flow_now = self.flow(phase, y.exp()) * disc;
            loop {
                let stop_at = ring.min(self.horizon);
                let remaining = stop_at - t;
                let distance = (y - lower).min(upper - y);
                let level = self.level(distance);
                let event = level.h >= remaining;
                let (h, root_h) = if event {
                    (remaining, remaining.sqrt())
                } else {
                    (level.h, level.root_h)
                };
                let z: f64 = normals.sample(StandardNormal);
                y += self.nu * h + self.sigma * root_h * (sign * z);
                disc *= if event {
                    (-rate * h).exp()
                } else if killed {
                    level.disc_killed
                } else {
                    level.disc
                };
                t = if event { stop_at } else { t + h };
                let flow_next = self.flow(phase, y.exp()) * disc;
                total += 0.5 * h * (flow_now + flow_next);
                flow_now = flow_next;

                if y <= lower {
                    return total;
                }
                if y >= upper {
                    continue 'phases;
                }
                if event {
                    if t >= self.horizon {
                        return total;
                    }
                    match phase {
                        Phase::Incubation => return total,
                        Phase::Operating => {
                            phase = Phase::Competing;
                            ring = f64::INFINITY;
                            continue 'phases;
                        }
                        _ => unreachable!("only incubation and operating phases carry a clock"),
                    }
                }
            }
        }
    }
}

/// One admissible step length and its precomputed constants.
#[derive(Debug, Clone, Copy)]
struct StepLevel {
    h: f64,
    root_h: f64,
    /// `8 sigma sqrt(h) + |nu| h`: log-distance the step may not reach.
    reach: f64,
    /// `exp(-rho h)`.
    disc: f64,
    /// `exp(-(rho + lambda2) h)`.
    disc_killed: f64,
}

/// `dt` times 1, 2, 4, ... up to the largest multiple of `dt` within `max_step`.
fn step_levels(nu: f64, sigma: f64, rho: f64, lambda2: f64, cfg: &McConfig) -> Vec<StepLevel> {
    let max_n = ((cfg.max_step / cfg.dt).floor() as u64).max(1);
    let mut ns = Vec::new();
    let mut n = 1u64;
    while n < max_n {
        ns.push(n);
        n *= 2;
    }
    ns.push(max_n);
    ns.into_iter()
        .map(|n| {
            let h = n as f64 * cfg.dt;
            let root_h = h.sqrt();
            StepLevel {
                h,
                root_h,
                reach: SAFETY_SIGMAS * sigma * root_h + nu.abs() * h,
                disc: (-rho * h).exp(),
                disc_killed: (-(rho + lambda2) * h).exp(),
            }
        })
        .collect()
}

fn check_inputs(
    params: &ModelParams<f64>,
    strategy: &ThresholdStrategy,
    x0: f64,
    cfg: &McConfig,
) -> Result<(), McError> {
    let report = validate(params);
    if !report.is_ok() {
        return Err(McError::Params(report.to_string()));
    }
    strategy.check()?;
    cfg.check()?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(McError::Price(x0));
    }
    Ok(())
}

fn truncation_bound(params: &ModelParams<f64>, form: PostEntryForm, x0: f64, horizon: f64) -> f64 {
    let (m, p, c) = (&params.market, &params.profit, &params.cost);
    let gap = m.rho - m.mu;
    let mut slope = 1f64.max(p.alpha).max(c.cost_slope);
    if form == PostEntryForm::Killed {
        slope += params.hazards.lambda2 * p.alpha / gap;
    }
    let intercept = p.cap_k.max(p.beta).max(c.cost_intercept);
    (-gap * horizon).exp() * (slope * x0 / gap + intercept / m.rho)
}

/// Estimates the stage value of `strategy` at `x0`.
pub fn simulate_npv(
    params: &ModelParams<f64>,
    strategy: &ThresholdStrategy,
    stage: Stage,
    x0: f64,
    cfg: &McConfig,
) -> Result<McEstimate, McError> {
    simulate(params, strategy, stage, PostEntryForm::TwoClock, x0, cfg)
}

/// Post-entry value of `strategy` at `x0` with the competitor represented
/// as `form`.
pub fn simulate_post_entry(
    params: &ModelParams<f64>,
    strategy: &ThresholdStrategy,
    form: PostEntryForm,
    x0: f64,
    cfg: &McConfig,
) -> Result<McEstimate, McError> {
    simulate(params, strategy, Stage::PostEntry, form, x0, cfg)
}

fn simulate(
    params: &ModelParams<f64>,
    strategy: &ThresholdStrategy,
    stage: Stage,
    form: PostEntryForm,
    x0: f64,
    cfg: &McConfig,
) -> Result<McEstimate, McError> {
    check_inputs(params, strategy, x0, cfg)?;
    let sim = Simulator::new(params, strategy, form, cfg);
    let seed = cfg.seed;
    let (samples, n_paths): (Vec<f64>, u64) = if cfg.antithetic {
        let pairs = cfg.n_paths.div_ceil(2);
        let v = (0..pairs)
            .into_par_iter()
            .map(|j| {
                let normals = path_rng(seed, j, NORMAL_STREAM);
                let clocks = path_rng(seed, j, CLOCK_STREAM);
                let up = sim.run(stage, x0, &mut normals.clone(), &mut clocks.clone(), 1.0);
                let down = sim.run(stage, x0, &mut normals.clone(), &mut clocks.clone(), -1.0);
                0.5 * (up + down)
            })
            .collect();
        (v, pairs * 2)
    } else {
        let v = (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut normals = path_rng(seed, i, NORMAL_STREAM);
                let mut clocks = path_rng(seed, i, CLOCK_STREAM);
                sim.run(stage, x0, &mut normals, &mut clocks, 1.0)
            })
            .collect();
        (v, cfg.n_paths)
    };

    let n = samples.len() as f64;
    let mean = pairwise_sum(&samples) / n;
    let std_err = if samples.len() > 1 {
        let deviations: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
        (pairwise_sum(&deviations) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_err,
        n_paths,
        truncation_bound: truncation_bound(params, form, x0, cfg.horizon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_rule_respects_safety_margin() {
        let p = ModelParams::reference(0.6);
        let strategy = ThresholdStrategy {
            cancel_at: 1.0,
            enter_at: 6.0,
            abandon_pre_at: 3.0,
            abandon_post_at: 3.0,
        };
        let cfg = McConfig::for_params(&p);
        let sim = Simulator::new(&p, &strategy, PostEntryForm::TwoClock, &cfg);
        assert_eq!(sim.level(0.0).h, cfg.dt);
        assert!((sim.level(f64::INFINITY).h - cfg.max_step).abs() < 1e-12);
        let mut last = 0.0;
        for d in [0.05, 0.2, 0.5, 0.8, 1.5, 3.0] {
            let l = sim.level(d);
            assert!(l.h >= last);
            last = l.h;
            if l.h > cfg.dt {
                assert!(SAFETY_SIGMAS * sim.sigma * l.h.sqrt() + sim.nu.abs() * l.h <= d);
            }
            let steps = l.h / cfg.dt;
            assert!((steps - steps.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn default_horizon_hits_target_discount() {
        let p = ModelParams::reference(0.6);
        let t = default_horizon(&p);
        assert!((-(0.05 - 0.03) * t).exp() <= 1e-4 * (1.0 + 1e-12));
        assert!(t <= 500.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::reference(0.6);
        let s = ThresholdStrategy {
            cancel_at: 2.0,
            enter_at: 1.0,
            abandon_pre_at: 3.0,
            abandon_post_at: 3.0,
        };
        let cfg = McConfig::for_params(&p);
        assert!(matches!(
            simulate_npv(&p, &s, Stage::PreEntry, 1.5, &cfg),
            Err(McError::Strategy(_))
        ));
        let ok = ThresholdStrategy { enter_at: 6.0, ..s };
        assert!(matches!(
            simulate_npv(&p, &ok, Stage::PreEntry, -1.0, &cfg),
            Err(McError::Price(_))
        ));
        let zero = McConfig { n_paths: 0, ..cfg };
        assert!(matches!(
            simulate_npv(&p, &ok, Stage::PreEntry, 1.5, &zero),
            Err(McError::Config(_))
        ));
    }
}
