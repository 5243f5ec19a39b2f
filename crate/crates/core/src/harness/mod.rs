//! Trials, experiment grids, summaries and the command-line front end.
//!
//! Every random stream is derived from the experiment's base seed: trial
//! `i` uses seed `base_seed + i`, the market population and customer draws
//! hang off that trial seed, and each policy gets its own stream keyed by
//! its label. Trials therefore run in any order on any number of workers
//! and still replay bit for bit.

pub mod cli;
mod config;
mod experiment;

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{
    EnvironmentSpec, ExperimentConfig, GridSpec, PolicySpec, CASE_GRID, TABLE_BATCH,
};
pub use experiment::{
    audit_path, read_summary, run_experiment, simulate, summarize, trace_path, write_summary,
    ExperimentReport, PolicyRuns, SummaryRow, SUMMARY_HEADER,
};

use crate::environments::{oracle_profit, Environment};
use crate::error::{Error, Result};
use crate::policies::{build_policy, Clairvoyant, FixedArm, Policy};
use crate::pricing::{Observation, PriceGrid};
use crate::trace::TrialTrace;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream named `tag` under `seed`; distinct tags give
/// unrelated streams.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(splitmix64(seed), |h, b| splitmix64(h ^ u64::from(b)))
}

pub fn seeded_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Seed of trial `index` (0-based).
pub fn trial_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add(index as u64)
}

/// Per-round oracle profits `max_a a·N·D_t(a)` for rounds `1..=horizon`.
pub fn oracle_series(env: &dyn Environment, grid: &PriceGrid, horizon: usize) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let profit = match out.last() {
            Some(&prev) if env.same_market(t - 1, t) => prev,
            _ => oracle_profit(env, t, grid)?.1,
        };
        out.push(profit);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub trace: TrialTrace,
    pub audit_log: Vec<String>,
}

/// Plays `policy` against `env` for `horizon` rounds. `oracle`, when given,
/// must hold the per-round oracle profits; otherwise they are computed on
/// the fly.
pub fn run_trial(
    policy: &mut dyn Policy,
    env: &dyn Environment,
    grid: &PriceGrid,
    horizon: usize,
    policy_rng: &mut dyn RngCore,
    env_rng: &mut dyn RngCore,
    oracle: Option<&[f64]>,
) -> Result<TrialOutput> {
    if let Some(o) = oracle {
        if o.len() < horizon {
            return Err(Error::Runtime(format!(
                "oracle series covers {} of {horizon} rounds",
                o.len()
            )));
        }
    }
    let name = policy.name().to_string();
    let abort = |t: usize, e: Error| match e {
        Error::Runtime(m) => Error::Runtime(format!("{name} round {t}: {m}")),
        other => Error::Runtime(format!("{name} round {t}: {other}")),
    };
    let mut trace = TrialTrace::with_capacity(horizon);
    let mut audit_log = Vec::new();
    let mut last_best: Option<(usize, f64)> = None;
    for t in 1..=horizon {
        let arm = policy.choose(t, policy_rng).map_err(|e| abort(t, e))?;
        if arm >= grid.len() {
            return Err(abort(t, Error::Runtime(format!("arm {} off the grid", arm + 1))));
        }
        let price = grid.price(arm);
        let demand = env
            .sample_batch(t, price, grid.batch_size(), env_rng)
            .map_err(|e| abort(t, e))?;
        policy
            .observe(&Observation::new(t, arm, demand))
            .map_err(|e| abort(t, e))?;
        let best = match (oracle, last_best) {
            (Some(o), _) => o[t - 1],
            (None, Some((s, b))) if env.same_market(s, t) => b,
            (None, _) => oracle_profit(env, t, grid).map_err(|e| abort(t, e))?.1,
        };
        last_best = Some((t, best));
        trace.record(t, arm, price, demand, best, policy.last_alert());
        audit_log.extend(policy.drain_audit_log());
    }
    Ok(TrialOutput { trace, audit_log })
}

/// [`run_trial`] with both streams derived from one seed.
pub fn run_seeded(
    policy: &mut dyn Policy,
    env: &dyn Environment,
    grid: &PriceGrid,
    horizon: usize,
    seed: u64,
) -> Result<TrialOutput> {
    let mut prng = seeded_rng(seed, policy.name());
    let mut erng = seeded_rng(seed, "environment");
    run_trial(policy, env, grid, horizon, &mut prng, &mut erng, None)
}

/// Registry policies plus the two references the harness can build:
/// `clairvoyant` (needs the market) and `fixed` (`arm`, 1-based).
pub fn build_harness_policy(
    spec: &PolicySpec,
    grid: &PriceGrid,
    env: &Arc<dyn Environment>,
) -> Result<Box<dyn Policy>> {
    match spec.key.as_str() {
        "clairvoyant" => {
            if let Some(name) = spec.params.keys().next() {
                return Err(Error::config(format!(
                    "policy 'clairvoyant' takes no parameters, got '{name}'"
                )));
            }
            Ok(Box::new(Clairvoyant::new(Arc::clone(env), grid.clone())))
        }
        "fixed" => {
            let arm = match spec.params.get("arm") {
                Some(toml::Value::Integer(a)) if *a >= 1 && spec.params.len() == 1 => *a as usize,
                _ => return Err(Error::config("policy 'fixed' needs exactly 'arm' (1-based)")),
            };
            Ok(Box::new(FixedArm::new(arm - 1, grid)?))
        }
        key => build_policy(key, grid, &spec.params),
    }
}
