//! Scenario files: flat model keys plus optional `[sweep]`, `[mc]` and
//! `[strategy]` tables, with `--set key=value` overrides.

use std::path::Path;

use serde::Deserialize;
use startup_timing::model::{CostParams, HazardRates, MarketParams, ProfitParams};
use startup_timing::verify::{McConfig, ThresholdStrategy};
use startup_timing::{ModelParams, Params};

use crate::CliError;

/// Names accepted for model parameters, in output order.
pub const PARAM_NAMES: [&str; 10] = [
    "mu",
    "sigma",
    "rho",
    "alpha",
    "beta",
    "cap_k",
    "cost_slope",
    "cost_intercept",
    "lambda1",
    "lambda2",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Free-form label; not used by any command.
    #[serde(default)]
    #[allow(dead_code)]
    pub name: Option<String>,
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(alias = "K")]
    pub cap_k: f64,
    pub cost_slope: f64,
    pub cost_intercept: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub mc: Option<McBlock>,
    #[serde(default)]
    pub strategy: StrategyOverrides,
}

/// Either an explicit list of `values` or `n` points from `min` to `max`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub param: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub n_paths: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub antithetic: Option<bool>,
    pub max_step: Option<f64>,
}

/// Replacement levels for the analytic thresholds in `verify`.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyOverrides {
    pub cancel_at: Option<f64>,
    pub enter_at: Option<f64>,
    pub abandon_pre_at: Option<f64>,
    pub abandon_post_at: Option<f64>,
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Validation {
        code: "E_SCENARIO",
        message: message.into(),
    }
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        invalid(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) || path.len() > 2 {
        return Err(invalid(format!(
            "override key `{key}` must be `name` or `section.name`"
        )));
    }
    let value = parse_value(raw.trim());
    let target = if path.len() == 2 {
        let entry = table
            .entry(path[0].to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("`{}` is not a section", path[0])))?
    } else {
        table
    };
    target.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

impl ScenarioFile {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        // Integers are accepted wherever a float is expected.
        coerce_floats(&mut table);
        let scenario: ScenarioFile = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        if let Some(s) = &scenario.sweep {
            if !PARAM_NAMES.contains(&s.param.as_str()) {
                return Err(invalid(format!(
                    "sweep parameter `{}` is not one of {}",
                    s.param,
                    PARAM_NAMES.join(", ")
                )));
            }
        }
        Ok(scenario)
    }

    pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read scenario {}: {e}", path.display())))?;
        Ok(Self::parse(&text, overrides)?)
    }

    pub fn params(&self) -> Params {
        ModelParams {
            market: MarketParams {
                mu: self.mu,
                sigma: self.sigma,
                rho: self.rho,
            },
            profit: ProfitParams {
                alpha: self.alpha,
                beta: self.beta,
                cap_k: self.cap_k,
            },
            cost: CostParams {
                cost_slope: self.cost_slope,
                cost_intercept: self.cost_intercept,
            },
            hazards: HazardRates {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
            },
        }
    }

    pub fn mc_config(&self, params: &Params) -> McConfig {
        let mut cfg = McConfig::for_params(params);
        if let Some(m) = &self.mc {
            cfg.n_paths = m.n_paths.unwrap_or(cfg.n_paths);
            cfg.dt = m.dt.unwrap_or(cfg.dt);
            cfg.horizon = m.horizon.unwrap_or(cfg.horizon);
            cfg.seed = m.seed.unwrap_or(cfg.seed);
            cfg.antithetic = m.antithetic.unwrap_or(cfg.antithetic);
            cfg.max_step = m.max_step.unwrap_or(cfg.max_step);
        }
        cfg
    }

    pub fn strategy(&self, optimal: ThresholdStrategy) -> ThresholdStrategy {
        let o = &self.strategy;
        ThresholdStrategy {
            cancel_at: o.cancel_at.unwrap_or(optimal.cancel_at),
            enter_at: o.enter_at.unwrap_or(optimal.enter_at),
            abandon_pre_at: o.abandon_pre_at.unwrap_or(optimal.abandon_pre_at),
            abandon_post_at: o.abandon_post_at.unwrap_or(optimal.abandon_post_at),
        }
    }
}

/// Non-parameter keys whose values are floats.
const FLOAT_KEYS: [&str; 9] = [
    "min",
    "max",
    "dt",
    "horizon",
    "max_step",
    "cancel_at",
    "enter_at",
    "abandon_pre_at",
    "abandon_post_at",
];

fn coerce_floats(table: &mut toml::Table) {
    for (k, v) in table.iter_mut() {
        match v {
            toml::Value::Integer(i)
                if PARAM_NAMES.contains(&k.as_str())
                    || k == "K"
                    || FLOAT_KEYS.contains(&k.as_str()) =>
            {
                *v = toml::Value::Float(*i as f64);
            }
            toml::Value::Array(items) if k == "values" => {
                for item in items.iter_mut() {
                    if let toml::Value::Integer(i) = item {
                        *item = toml::Value::Float(*i as f64);
                    }
                }
            }
            toml::Value::Table(t) => coerce_floats(t),
            _ => {}
        }
    }
}

impl SweepBlock {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if let Some(v) = &self.values {
            if self.min.is_some() || self.max.is_some() || self.n.is_some() {
                return Err(invalid(
                    "sweep takes either `values` or `min`/`max`/`n`, not both",
                ));
            }
            return Ok(v.clone());
        }
        let n = self
            .n
            .ok_or_else(|| invalid("sweep needs `values` or `n`"))?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let (lo, hi) = match (self.min, self.max) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(invalid("sweep with `n` needs both `min` and `max`")),
        };
        if !(lo.is_finite() && hi.is_finite())
            || (self.spacing == Spacing::Log && !(lo > 0.0 && hi > 0.0))
        {
            return Err(invalid(format!(
                "sweep range [{lo}, {hi}] is not valid for {:?} spacing",
                self.spacing
            )));
        }
        Ok(spaced(lo, hi, n, self.spacing))
    }
}

pub fn spaced(lo: f64, hi: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    match spacing {
        Spacing::Linear => (0..n).map(|i| lo + (hi - lo) * t(i)).collect(),
        Spacing::Log => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * t(i)).exp()).collect()
        }
    }
}

/// Sets the parameter `name` (one of [`PARAM_NAMES`]) on `p`.
pub fn set_param(p: &mut Params, name: &str, v: f64) {
    match name {
        "mu" => p.market.mu = v,
        "sigma" => p.market.sigma = v,
        "rho" => p.market.rho = v,
        "alpha" => p.profit.alpha = v,
        "beta" => p.profit.beta = v,
        "cap_k" => p.profit.cap_k = v,
        "cost_slope" => p.cost.cost_slope = v,
        "cost_intercept" => p.cost.cost_intercept = v,
        "lambda1" => p.hazards.lambda1 = v,
        "lambda2" => p.hazards.lambda2 = v,
        _ => unreachable!("parameter names are checked at load time"),
    }
}
