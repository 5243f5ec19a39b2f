//! Market-shift auditing.
//!
//! Every round the demand just observed is compared with earlier demands at
//! the same price inside a rolling window through a time-uniform confidence
//! sequence; a crossing raises a yellow card. While yellow, an ε-auditor may
//! schedule a sweep of sparse price points whose demands are then checked
//! against the model's predictive demand by exact binomial tests, and a
//! Bonferroni-corrected rejection raises a red card.

mod redcard;
mod sequence;
mod window;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use redcard::{auditor_schedule, binomial_pvalue, red_card_check, AuditSample, RedReport};
pub use sequence::{
    confidence_bounds, confidence_radius, sequence_statistic, yellow_test, SequenceStat,
    TimeRule, YellowReport,
};
pub use window::{repair_monotone, window_variant_update, WindowFit};

use crate::error::{Error, Result};
use crate::pricing::Observation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub epsilon_init: f64,
    pub r_decay: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Rolling window length `w`.
    pub window: usize,
    /// Recent-block size in the sequence statistic.
    pub n_recent: usize,
    /// Number of sparse arms in an audit sweep.
    pub auditor_count: usize,
    /// The auditor arms once the top belief exceeds this ...
    pub converge_threshold: f64,
    /// ... for this many consecutive rounds.
    pub converge_rounds: usize,
    pub time: TimeRule,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            epsilon_init: 0.1,
            r_decay: 0.1,
            alpha1: 0.05,
            alpha2: 0.01,
            window: 300,
            n_recent: 5,
            auditor_count: 5,
            converge_threshold: 0.9,
            converge_rounds: 10,
            time: TimeRule::SampleCount,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.epsilon_init) || !unit(self.r_decay) {
            return Err(Error::config("epsilon and r_decay must lie in [0, 1]"));
        }
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) || !(self.alpha2 > 0.0 && self.alpha2 < 1.0) {
            return Err(Error::config("significance levels must lie in (0, 1)"));
        }
        if self.window == 0 || self.n_recent == 0 || self.auditor_count == 0 {
            return Err(Error::config(
                "window, recent-block size and auditor count must be positive",
            ));
        }
        Ok(())
    }
}

/// Mutable auditing state owned by one policy instance.
#[derive(Debug, Clone)]
pub struct AuditState {
    cfg: AuditConfig,
    window: VecDeque<Observation>,
    epsilon: f64,
    queue: VecDeque<usize>,
    samples: Vec<AuditSample>,
    converged_streak: usize,
}

impl AuditState {
    pub fn new(cfg: AuditConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            epsilon: cfg.epsilon_init,
            window: VecDeque::with_capacity(cfg.window + 1),
            queue: VecDeque::new(),
            samples: Vec::new(),
            converged_streak: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AuditConfig {
        &self.cfg
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Clears window, queue, samples and convergence tracking, and restores
    /// ε.
    pub fn reset(&mut self) {
        self.window.clear();
        self.queue.clear();
        self.samples.clear();
        self.converged_streak = 0;
        self.epsilon = self.cfg.epsilon_init;
    }

    pub fn push(&mut self, obs: Observation) {
        self.window.push_back(obs);
        while self.window.len() > self.cfg.window {
            self.window.pop_front();
        }
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &Observation> {
        self.window.iter()
    }

    pub fn window_vec(&self) -> Vec<Observation> {
        self.window.iter().copied().collect()
    }

    /// Sequence test at `obs.arm` on the current window (which should
    /// already contain `obs`).
    pub fn yellow_check(&self, obs: &Observation, n: u32) -> Option<YellowReport> {
        let demands: Vec<u32> = self
            .window
            .iter()
            .filter(|o| o.arm == obs.arm)
            .map(|o| o.demand)
            .collect();
        yellow_test(
            &demands,
            obs.round,
            obs.arm,
            n,
            self.cfg.n_recent,
            self.cfg.alpha1,
            self.cfg.time,
        )
    }

    /// Feeds the current top belief; true once the auditor is armed.
    pub fn track_convergence(&mut self, max_belief: f64) -> bool {
        if max_belief > self.cfg.converge_threshold {
            self.converged_streak += 1;
        } else {
            self.converged_streak = 0;
        }
        self.is_converged()
    }

    pub fn is_converged(&self) -> bool {
        self.converged_streak >= self.cfg.converge_rounds
    }

    pub fn on_yellow(&mut self) {
        self.epsilon = self.cfg.epsilon_init;
    }

    /// An audit that did not reject.
    pub fn on_pass(&mut self) {
        self.epsilon *= self.cfg.r_decay;
    }

    /// Loads a sweep over the auditor arms unless one is already running.
    /// Returns whether a new sweep was loaded.
    pub fn schedule_sweep(&mut self, k: usize) -> bool {
        if !self.is_idle() {
            return false;
        }
        self.queue
            .extend(auditor_schedule(k, self.cfg.auditor_count));
        true
    }

    /// No sweep queued or awaiting its test.
    pub fn is_idle(&self) -> bool {
        self.queue.is_empty() && self.samples.is_empty()
    }

    pub fn next_audit_arm(&mut self) -> Option<usize> {
        self.queue.pop_front()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn record_sample(&mut self, sample: AuditSample) {
        self.samples.push(sample);
    }

    /// When the queue has drained, tests and clears the collected samples.
    pub fn finish_sweep(&mut self, n: u32) -> Option<RedReport> {
        if !self.queue.is_empty() || self.samples.is_empty() {
            return None;
        }
        let report = red_card_check(&self.samples, n, self.cfg.alpha2);
        self.samples.clear();
        report
    }
}
