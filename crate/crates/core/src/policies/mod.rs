//! Pricing policies.
//!
//! Every policy is a single-owner state machine: [`Policy::choose`] picks an
//! arm for round `t` using only internal state and the injected random
//! source, and [`Policy::observe`] folds the outcome back in.

mod acidp;
mod baselines;

use std::sync::Arc;

use rand::RngCore;

pub use acidp::{Acidp, AcidpConfig, Phase, Selector, Variant};
pub use baselines::{
    EpsilonGreedy, EpsilonGreedyConfig, Thompson, Ucb, UcbConfig, UcbTuned, Ucbpi,
};

use crate::environments::{oracle_profit, Environment};
use crate::error::{Error, Result};
use crate::pricing::{Observation, PriceGrid};
use crate::trace::Alert;

pub trait Policy: Send {
    /// Registry key of the policy family.
    fn name(&self) -> &str;

    /// Compact `key=value` description of the hyperparameters.
    fn hyperparameters(&self) -> String;

    /// Arm (0-based) to offer in round `t` (1-based).
    fn choose(&mut self, t: usize, rng: &mut dyn RngCore) -> Result<usize>;

    fn observe(&mut self, obs: &Observation) -> Result<()>;

    /// Alert raised by the most recent [`Policy::observe`].
    fn last_alert(&self) -> Alert {
        Alert::None
    }

    /// Audit log lines accumulated since the last call.
    fn drain_audit_log(&mut self) -> Vec<String> {
        Vec::new()
    }
}

/// Per-arm pull counts and profit moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    counts: Vec<u64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl ArmStats {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![0; k],
            sum: vec![0.0; k],
            sum_sq: vec![0.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn record(&mut self, arm: usize, profit: f64) {
        self.counts[arm] += 1;
        self.sum[arm] += profit;
        self.sum_sq[arm] += profit * profit;
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    /// Mean profit; `NaN` before the first pull.
    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            f64::NAN
        } else {
            self.sum[arm] / self.counts[arm] as f64
        }
    }

    /// Mean squared profit; `NaN` before the first pull.
    pub fn mean_square(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            f64::NAN
        } else {
            self.sum_sq[arm] / self.counts[arm] as f64
        }
    }
}

/// Always offers the same arm.
#[derive(Debug, Clone)]
pub struct FixedArm {
    arm: usize,
}

impl FixedArm {
    pub fn new(arm: usize, grid: &PriceGrid) -> Result<Self> {
        if arm >= grid.len() {
            return Err(Error::config(format!(
                "arm {} outside a {}-price grid",
                arm + 1,
                grid.len()
            )));
        }
        Ok(Self { arm })
    }
}

impl Policy for FixedArm {
    fn name(&self) -> &str {
        "fixed"
    }

    fn hyperparameters(&self) -> String {
        format!("arm={}", self.arm + 1)
    }

    fn choose(&mut self, _t: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        Ok(self.arm)
    }

    fn observe(&mut self, _obs: &Observation) -> Result<()> {
        Ok(())
    }
}

/// Plays the true per-round optimum; the zero-regret reference.
#[derive(Debug, Clone)]
pub struct Clairvoyant {
    env: Arc<dyn Environment>,
    grid: PriceGrid,
    /// Round and arm of the last oracle evaluation.
    last: Option<(usize, usize)>,
}

impl Clairvoyant {
    pub fn new(env: Arc<dyn Environment>, grid: PriceGrid) -> Self {
        Self {
            env,
            grid,
            last: None,
        }
    }
}

impl Policy for Clairvoyant {
    fn name(&self) -> &str {
        "clairvoyant"
    }

    fn hyperparameters(&self) -> String {
        String::new()
    }

    fn choose(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        let arm = match self.last {
            Some((s, arm)) if self.env.same_market(s, t) => arm,
            _ => oracle_profit(self.env.as_ref(), t, &self.grid)?.0,
        };
        self.last = Some((t, arm));
        Ok(arm)
    }

    fn observe(&mut self, _obs: &Observation) -> Result<()> {
        Ok(())
    }
}

/// Registry keys accepted by [`build_policy`].
pub const POLICY_KEYS: [&str; 9] = [
    "acidp",
    "acidp-theta",
    "acidp-window",
    "acidp-noaudit",
    "eg",
    "ucb",
    "ucb-tuned",
    "ucbpi",
    "ts",
];

fn parse_params<T: serde::de::DeserializeOwned + Default>(
    key: &str,
    params: &toml::Table,
) -> Result<T> {
    if params.is_empty() {
        return Ok(T::default());
    }
    toml::Value::Table(params.clone())
        .try_into()
        .map_err(|e| Error::config(format!("parameters for '{key}': {e}")))
}

fn no_params(key: &str, params: &toml::Table) -> Result<()> {
    if let Some(name) = params.keys().next() {
        return Err(Error::config(format!(
            "policy '{key}' takes no parameters, got '{name}'"
        )));
    }
    Ok(())
}

/// Builds a registered policy from its key and TOML parameters.
pub fn build_policy(key: &str, grid: &PriceGrid, params: &toml::Table) -> Result<Box<dyn Policy>> {
    let grid = grid.clone();
    let acidp = |variant: Variant| -> Result<Box<dyn Policy>> {
        let mut cfg: AcidpConfig = parse_params(key, params)?;
        cfg.variant = variant;
        Ok(Box::new(Acidp::new(grid.clone(), cfg)?))
    };
    match key {
        "acidp" => acidp(Variant::Standard),
        "acidp-theta" => acidp(Variant::Theta),
        "acidp-window" => acidp(Variant::Window),
        "acidp-noaudit" => acidp(Variant::NoAudit),
        "eg" => Ok(Box::new(EpsilonGreedy::new(grid, parse_params(key, params)?)?)),
        "ucb" => Ok(Box::new(Ucb::new(grid, parse_params(key, params)?)?)),
        "ucb-tuned" => {
            no_params(key, params)?;
            Ok(Box::new(UcbTuned::new(grid)))
        }
        "ucbpi" => {
            no_params(key, params)?;
            Ok(Box::new(Ucbpi::new(grid)))
        }
        "ts" => {
            no_params(key, params)?;
            Ok(Box::new(Thompson::new(grid)))
        }
        other => Err(Error::config(format!(
            "unknown policy '{other}'; expected one of {}",
            POLICY_KEYS.join(", ")
        ))),
    }
}
