use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{ArmStats, Policy};
use crate::error::{Error, Result};
use crate::pricing::{Observation, PriceGrid};

fn first_unvisited(stats: &ArmStats, active: impl Fn(usize) -> bool) -> Option<usize> {
    (0..stats.len()).find(|&k| active(k) && stats.count(k) == 0)
}

/// Index of the largest score, lowest index on ties.
fn argmax(scores: impl IntoIterator<Item = (usize, f64)>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    best.map_or(0, |(k, _)| k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsilonGreedyConfig {
    pub epsilon: f64,
}

impl Default for EpsilonGreedyConfig {
    fn default() -> Self {
        Self { epsilon: 0.1 }
    }
}

/// ε-greedy on mean profit: with probability `ε` a uniformly random arm,
/// otherwise the best empirical arm (unvisited arms first).
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    cfg: EpsilonGreedyConfig,
    grid: PriceGrid,
    stats: ArmStats,
}

impl EpsilonGreedy {
    pub fn new(grid: PriceGrid, cfg: EpsilonGreedyConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.epsilon) {
            return Err(Error::config("epsilon must lie in [0, 1]"));
        }
        Ok(Self {
            stats: ArmStats::new(grid.len()),
            grid,
            cfg,
        })
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }
}

impl Policy for EpsilonGreedy {
    fn name(&self) -> &str {
        "eg"
    }

    fn hyperparameters(&self) -> String {
        format!("epsilon={}", self.cfg.epsilon)
    }

    fn choose(&mut self, _t: usize, rng: &mut dyn RngCore) -> Result<usize> {
        let k = self.grid.len();
        if self.cfg.epsilon > 0.0 && rng.random::<f64>() < self.cfg.epsilon {
            return Ok(rng.random_range(0..k));
        }
        if let Some(a) = first_unvisited(&self.stats, |_| true) {
            return Ok(a);
        }
        Ok(argmax((0..k).map(|a| (a, self.stats.mean(a)))))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.stats
            .record(obs.arm, self.grid.price(obs.arm) * f64::from(obs.demand));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcbConfig {
    pub c: f64,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

/// `argmax r̄_a + c √(ln t / n_a)` after one pull of every arm.
#[derive(Debug, Clone)]
pub struct Ucb {
    cfg: UcbConfig,
    grid: PriceGrid,
    stats: ArmStats,
}

impl Ucb {
    pub fn new(grid: PriceGrid, cfg: UcbConfig) -> Result<Self> {
        if !(cfg.c >= 0.0) {
            return Err(Error::config("UCB exploration constant must be non-negative"));
        }
        Ok(Self {
            stats: ArmStats::new(grid.len()),
            grid,
            cfg,
        })
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }

    /// Upper index of `arm` at round `t`.
    pub fn index(&self, arm: usize, t: usize) -> f64 {
        let n = self.stats.count(arm) as f64;
        self.stats.mean(arm) + self.cfg.c * ((t as f64).ln() / n).sqrt()
    }
}

impl Policy for Ucb {
    fn name(&self) -> &str {
        "ucb"
    }

    fn hyperparameters(&self) -> String {
        format!("c={}", self.cfg.c)
    }

    fn choose(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        if let Some(a) = first_unvisited(&self.stats, |_| true) {
            return Ok(a);
        }
        Ok(argmax((0..self.grid.len()).map(|a| (a, self.index(a, t)))))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.stats
            .record(obs.arm, self.grid.price(obs.arm) * f64::from(obs.demand));
        Ok(())
    }
}

/// UCB with a variance-aware width:
/// `r̄_a + √((ln t / n_a) · min(1/4, V_a))`,
/// `V_a = mean(r²) − r̄² + √(2 ln t / n_a)`.
#[derive(Debug, Clone)]
pub struct UcbTuned {
    grid: PriceGrid,
    stats: ArmStats,
}

impl UcbTuned {
    pub fn new(grid: PriceGrid) -> Self {
        Self {
            stats: ArmStats::new(grid.len()),
            grid,
        }
    }

    /// `min(1/4, V_a)` at round `t`.
    pub fn width(&self, arm: usize, t: usize) -> f64 {
        let n = self.stats.count(arm) as f64;
        let lt = (t as f64).ln();
        let mean = self.stats.mean(arm);
        let v = self.stats.mean_square(arm) - mean * mean + (2.0 * lt / n).sqrt();
        v.min(0.25)
    }

    pub fn index(&self, arm: usize, t: usize) -> f64 {
        let n = self.stats.count(arm) as f64;
        self.stats.mean(arm) + ((t as f64).ln() / n * self.width(arm, t)).sqrt()
    }
}

impl Policy for UcbTuned {
    fn name(&self) -> &str {
        "ucb-tuned"
    }

    fn hyperparameters(&self) -> String {
        String::new()
    }

    fn choose(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        if let Some(a) = first_unvisited(&self.stats, |_| true) {
            return Ok(a);
        }
        Ok(argmax((0..self.grid.len()).map(|a| (a, self.index(a, t)))))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.stats
            .record(obs.arm, self.grid.price(obs.arm) * f64::from(obs.demand));
        Ok(())
    }
}

/// Price-scaled UCB, `r̄_a + a_k √(ln t / n_a)`, restricted to arms not yet
/// ruled out by demand-fraction confidence bounds.
///
/// Bounds are Hoeffding intervals at confidence `1/t²` on each arm's
/// purchase fraction, tightened with monotone demand (the upper bound at a
/// price is capped by every cheaper price's, the lower bound lifted by every
/// dearer price's). Arm `j` is dropped for good when some arm's profit lower
/// bound exceeds `j`'s profit upper bound.
#[derive(Debug, Clone)]
pub struct Ucbpi {
    grid: PriceGrid,
    stats: ArmStats,
    buyers: Vec<f64>,
    active: Vec<bool>,
}

impl Ucbpi {
    pub fn new(grid: PriceGrid) -> Self {
        let k = grid.len();
        Self {
            stats: ArmStats::new(k),
            buyers: vec![0.0; k],
            active: vec![true; k],
            grid,
        }
    }

    pub fn is_active(&self, arm: usize) -> bool {
        self.active[arm]
    }

    /// Demand-fraction bounds after monotone tightening.
    pub fn demand_bounds(&self, t: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.grid.len();
        let n = f64::from(self.grid.batch_size());
        let log_term = (2.0 * (t.max(1) as f64).powi(2)).ln();
        let mut lo = vec![0.0; k];
        let mut hi = vec![1.0; k];
        for a in 0..k {
            let pulls = self.stats.count(a);
            if pulls > 0 {
                let m = pulls as f64 * n;
                let frac = self.buyers[a] / m;
                let r = (log_term / (2.0 * m)).sqrt();
                lo[a] = (frac - r).max(0.0);
                hi[a] = (frac + r).min(1.0);
            }
        }
        for a in 1..k {
            hi[a] = hi[a].min(hi[a - 1]);
        }
        for a in (0..k - 1).rev() {
            lo[a] = lo[a].max(lo[a + 1]);
        }
        (lo, hi)
    }

    fn eliminate(&mut self, t: usize) {
        let (lo, hi) = self.demand_bounds(t);
        let p = self.grid.prices();
        let best_lower = (0..p.len())
            .filter(|&a| self.active[a])
            .map(|a| p[a] * lo[a])
            .fold(f64::NEG_INFINITY, f64::max);
        for a in 0..p.len() {
            if self.active[a] && p[a] * hi[a] < best_lower {
                self.active[a] = false;
            }
        }
    }

    pub fn index(&self, arm: usize, t: usize) -> f64 {
        let n = self.stats.count(arm) as f64;
        self.stats.mean(arm) + self.grid.price(arm) * ((t as f64).ln() / n).sqrt()
    }
}

impl Policy for Ucbpi {
    fn name(&self) -> &str {
        "ucbpi"
    }

    fn hyperparameters(&self) -> String {
        String::new()
    }

    fn choose(&mut self, t: usize, _rng: &mut dyn RngCore) -> Result<usize> {
        self.eliminate(t);
        if let Some(a) = first_unvisited(&self.stats, |a| self.active[a]) {
            return Ok(a);
        }
        Ok(argmax(
            (0..self.grid.len())
                .filter(|&a| self.active[a])
                .map(|a| (a, self.index(a, t))),
        ))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        self.stats
            .record(obs.arm, self.grid.price(obs.arm) * f64::from(obs.demand));
        self.buyers[obs.arm] += f64::from(obs.demand);
        Ok(())
    }
}

/// Beta–Bernoulli Thompson sampling on each arm's purchase fraction,
/// choosing `argmax a_k θ_k`.
#[derive(Debug, Clone)]
pub struct Thompson {
    grid: PriceGrid,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Thompson {
    pub fn new(grid: PriceGrid) -> Self {
        let k = grid.len();
        Self {
            grid,
            alpha: vec![1.0; k],
            beta: vec![1.0; k],
        }
    }

    /// Posterior parameters `(α, β)` of every arm.
    pub fn posterior(&self) -> (&[f64], &[f64]) {
        (&self.alpha, &self.beta)
    }

    /// Replaces the posterior of `arm`.
    pub fn set_posterior(&mut self, arm: usize, alpha: f64, beta: f64) -> Result<()> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::config("Beta parameters must be positive"));
        }
        self.alpha[arm] = alpha;
        self.beta[arm] = beta;
        Ok(())
    }
}

impl Policy for Thompson {
    fn name(&self) -> &str {
        "ts"
    }

    fn hyperparameters(&self) -> String {
        String::new()
    }

    fn choose(&mut self, _t: usize, rng: &mut dyn RngCore) -> Result<usize> {
        let mut scores = Vec::with_capacity(self.grid.len());
        for a in 0..self.grid.len() {
            let dist = Beta::new(self.alpha[a], self.beta[a])
                .map_err(|e| Error::Runtime(format!("beta posterior: {e}")))?;
            let theta: f64 = dist.sample(rng);
            scores.push((a, self.grid.price(a) * theta));
        }
        Ok(argmax(scores))
    }

    fn observe(&mut self, obs: &Observation) -> Result<()> {
        let d = f64::from(obs.demand);
        self.alpha[obs.arm] += d;
        self.beta[obs.arm] += f64::from(self.grid.batch_size()) - d;
        Ok(())
    }
}
