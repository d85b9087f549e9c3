//! Monte Carlo cross-checks of the analytic solution.

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

use super::mc::{
    simulate_npv, simulate_post_entry, McConfig, McError, McEstimate, PostEntryForm, Stage,
    ThresholdStrategy,
};

/// Seed offset for the second, independent estimator of a pair.
const INDEPENDENT_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillingReport {
    pub two_clock: McEstimate,
    pub killed: McEstimate,
    /// `(two_clock - killed) / sqrt(se_1^2 + se_2^2)`; zero when both errors vanish.
    pub z: f64,
}

/// Estimates the post-entry value both with an explicit competitor clock
/// and in killed-discount form, on independent random streams.
pub fn killing_identity_check(
    params: &ModelParams<f64>,
    strategy: &ThresholdStrategy,
    x0: f64,
    cfg: &McConfig,
) -> Result<KillingReport, McError> {
    let two_clock = simulate_post_entry(params, strategy, PostEntryForm::TwoClock, x0, cfg)?;
    let other = McConfig {
        seed: cfg.seed.wrapping_add(INDEPENDENT_SEED_OFFSET),
        ..*cfg
    };
    let killed = simulate_post_entry(params, strategy, PostEntryForm::Killed, x0, &other)?;
    Ok(KillingReport {
        two_clock,
        killed,
        z: z_score(&two_clock, &killed),
    })
}

pub fn combined_std_err(a: &McEstimate, b: &McEstimate) -> f64 {
    a.std_err.hypot(b.std_err)
}

pub fn z_score(a: &McEstimate, b: &McEstimate) -> f64 {
    let diff = a.mean - b.mean;
    let se = combined_std_err(a, b);
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// One of the four levels of a [`ThresholdStrategy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdKind {
    Cancel,
    Enter,
    AbandonPre,
    AbandonPost,
}

impl ThresholdKind {
    pub const ALL: [ThresholdKind; 4] = [
        ThresholdKind::Cancel,
        ThresholdKind::Enter,
        ThresholdKind::AbandonPre,
        ThresholdKind::AbandonPost,
    ];

    /// Earliest stage whose value depends on this level and no earlier one.
    pub fn stage(self) -> Stage {
        match self {
            ThresholdKind::Cancel | ThresholdKind::Enter => Stage::PreEntry,
            ThresholdKind::AbandonPre => Stage::PostEntry,
            ThresholdKind::AbandonPost => Stage::PostCompetition,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ThresholdKind::Cancel => "cancel_at",
            ThresholdKind::Enter => "enter_at",
            ThresholdKind::AbandonPre => "abandon_pre_at",
            ThresholdKind::AbandonPost => "abandon_post_at",
        }
    }

    pub fn get(self, s: &ThresholdStrategy) -> f64 {
        match self {
            ThresholdKind::Cancel => s.cancel_at,
            ThresholdKind::Enter => s.enter_at,
            ThresholdKind::AbandonPre => s.abandon_pre_at,
            ThresholdKind::AbandonPost => s.abandon_post_at,
        }
    }

    pub fn with(self, s: &ThresholdStrategy, value: f64) -> ThresholdStrategy {
        let mut out = *s;
        match self {
            ThresholdKind::Cancel => out.cancel_at = value,
            ThresholdKind::Enter => out.enter_at = value,
            ThresholdKind::AbandonPre => out.abandon_pre_at = value,
            ThresholdKind::AbandonPost => out.abandon_post_at = value,
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub delta: f64,
    pub threshold: f64,
    pub estimate: McEstimate,
    /// Perturbed mean minus base mean.
    pub diff: f64,
    pub combined_std_err: f64,
    /// Perturbed value above base by more than three combined errors.
    pub improved: bool,
    /// Perturbed value below base by more than three combined errors.
    pub worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub which: ThresholdKind,
    pub stage: Stage,
    pub base: McEstimate,
    pub rows: Vec<PerturbationRow>,
}

impl PerturbationReport {
    pub fn any_improvement(&self) -> bool {
        self.rows.iter().any(|r| r.improved)
    }
}

/// Re-prices the strategy with one level scaled by `1 + delta` for each
/// delta. Base and perturbed runs share the seed.
pub fn perturbation_optimality(
    params: &ModelParams<f64>,
    base: &ThresholdStrategy,
    which: ThresholdKind,
    deltas: &[f64],
    x0: f64,
    cfg: &McConfig,
) -> Result<PerturbationReport, McError> {
    let stage = which.stage();
    let base_est = simulate_npv(params, base, stage, x0, cfg)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let level = which.get(base) * (1.0 + delta);
        let strategy = which.with(base, level);
        let estimate = if delta == 0.0 {
            base_est
        } else {
            simulate_npv(params, &strategy, stage, x0, cfg)?
        };
        let diff = estimate.mean - base_est.mean;
        let se = combined_std_err(&estimate, &base_est);
        rows.push(PerturbationRow {
            delta,
            threshold: level,
            estimate,
            diff,
            combined_std_err: se,
            improved: diff > 3.0 * se,
            worse: -diff > 3.0 * se,
        });
    }
    Ok(PerturbationReport {
        which,
        stage,
        base: base_est,
        rows,
    })
}
