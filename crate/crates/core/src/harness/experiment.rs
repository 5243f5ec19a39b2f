use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{build_harness_policy, oracle_series, run_trial, seeded_rng, trial_seed, TrialOutput};
use crate::error::{Error, Result};
use crate::stats::mean_std;

/// Columns of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 7] = [
    "policy",
    "hyperparameters",
    "mean_regret",
    "standard_error",
    "max",
    "min",
    "trials",
];

/// Regret at the horizon aggregated over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub hyperparameters: String,
    pub mean_regret: f64,
    pub standard_error: f64,
    pub max: f64,
    pub min: f64,
    pub trials: usize,
}

/// Mean, standard error of the mean (sample standard deviation over
/// `√trials`, 0 for one trial), max and min of `regrets`.
pub fn summarize(policy: &str, hyperparameters: &str, regrets: &[f64]) -> SummaryRow {
    let (mean, sd) = mean_std(regrets);
    SummaryRow {
        policy: policy.into(),
        hyperparameters: hyperparameters.into(),
        mean_regret: mean,
        standard_error: sd / (regrets.len() as f64).sqrt(),
        max: regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: regrets.iter().copied().fold(f64::INFINITY, f64::min),
        trials: regrets.len(),
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// All trials of one policy entry.
#[derive(Debug, Clone)]
pub struct PolicyRuns {
    pub label: String,
    pub key: String,
    pub hyperparameters: String,
    /// Indexed by trial.
    pub trials: Vec<TrialOutput>,
}

impl PolicyRuns {
    pub fn final_regrets(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.trace.final_regret()).collect()
    }

    pub fn summary(&self) -> SummaryRow {
        summarize(&self.label, &self.hyperparameters, &self.final_regrets())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<PolicyRuns>,
    pub summary: Vec<SummaryRow>,
    pub out: PathBuf,
}

struct Cell {
    policy: usize,
    hyperparameters: String,
    output: TrialOutput,
}

/// Runs every (trial, policy) pair in memory. Trials run in parallel;
/// results do not depend on scheduling.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<PolicyRuns>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let per_trial: Vec<Vec<Cell>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<Vec<Cell>> {
            let seed = trial_seed(cfg.base_seed, i);
            let env = cfg.environment.build(super::derive_seed(seed, "population"))?;
            let oracle = oracle_series(env.as_ref(), &grid, cfg.horizon)?;
            cfg.policies
                .par_iter()
                .enumerate()
                .map(|(p, spec)| -> Result<Cell> {
                    let mut policy = build_harness_policy(spec, &grid, &env)?;
                    let mut prng = seeded_rng(seed, &format!("policy/{}", spec.label()));
                    let mut erng = if cfg.common_random_numbers {
                        seeded_rng(seed, "environment")
                    } else {
                        seeded_rng(seed, &format!("environment/{}", spec.label()))
                    };
                    let output = run_trial(
                        policy.as_mut(),
                        env.as_ref(),
                        &grid,
                        cfg.horizon,
                        &mut prng,
                        &mut erng,
                        Some(&oracle),
                    )
                    .map_err(|e| match e {
                        Error::Runtime(m) => {
                            Error::Runtime(format!("{} trial {}: {m}", spec.label(), i + 1))
                        }
                        other => other,
                    })?;
                    Ok(Cell {
                        policy: p,
                        hyperparameters: policy.hyperparameters(),
                        output,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut runs: Vec<PolicyRuns> = cfg
        .policies
        .iter()
        .map(|s| PolicyRuns {
            label: s.label().to_string(),
            key: s.key.clone(),
            hyperparameters: String::new(),
            trials: Vec::with_capacity(cfg.trials),
        })
        .collect();
    for cells in per_trial {
        for c in cells {
            let run = &mut runs[c.policy];
            run.hyperparameters = c.hyperparameters;
            run.trials.push(c.output);
        }
    }
    Ok(runs)
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".acidp-write-probe");
    fs::File::create(&probe)?.write_all(b"ok")?;
    fs::remove_file(&probe)?;
    Ok(())
}

/// Trace file of policy `label`, trial `trial` (1-based).
pub fn trace_path(dir: &Path, label: &str, trial: usize) -> PathBuf {
    dir.join(format!("trace_{label}_{trial}.csv"))
}

pub fn audit_path(dir: &Path, label: &str, trial: usize) -> PathBuf {
    dir.join(format!("audit_{label}_{trial}.log"))
}

/// Runs the experiment and writes `trace_<policy>_<trial>.csv`, any
/// non-empty `audit_<policy>_<trial>.log`, and `summary.csv` into the
/// configured output directory. The directory is checked before anything
/// is simulated.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    ensure_writable(&cfg.out)?;
    let runs = simulate(cfg)?;
    for run in &runs {
        for (i, trial) in run.trials.iter().enumerate() {
            trial.trace.save(&trace_path(&cfg.out, &run.label, i + 1))?;
            if !trial.audit_log.is_empty() {
                let mut text = trial.audit_log.join("\n");
                text.push('\n');
                fs::write(audit_path(&cfg.out, &run.label, i + 1), text)?;
            }
        }
    }
    let summary: Vec<SummaryRow> = runs.iter().map(PolicyRuns::summary).collect();
    write_summary(&cfg.out.join("summary.csv"), &summary)?;
    Ok(ExperimentReport {
        runs,
        summary,
        out: cfg.out.clone(),
    })
}
