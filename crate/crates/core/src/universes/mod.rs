//! The multi-universe: candidate demand environments and the belief over
//! them.
//!
//! A [`Universe`] is a full likelihood table `q[k][d] = P(demand = d | arm k)`
//! for `d = 0..=N`. A [`MultiUniverse`] holds several of them with a
//! posterior belief vector that is kept normalised and floored after every
//! operation.

mod generator;
mod io;
mod likelihood;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use generator::{
    counterfactual_demand, generate, shift_grid, valuation_from_demand, GeneratorConfig,
    LikelihoodMode, NoiseRule, ValuationPmf,
};
pub use io::{load_universes, load_vintage, read_universes, save_universes, write_universes};
pub use likelihood::{empirical_likelihood, initiator, initiator_schedule, InitiatorRun};

use crate::error::{Error, Result};
use crate::pricing::PriceGrid;
use crate::stats::{binomial_row, normalize_with_floor};

/// Default per-cell smoothing floor for likelihood rows.
pub const LIKELIHOOD_FLOOR: f64 = 1e-6;
/// Default belief floor; each universe keeps at least `BELIEF_FLOOR / L`.
pub const BELIEF_FLOOR: f64 = 1e-4;
/// Tolerance for a likelihood row to count as normalised.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Where a universe came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniverseTag {
    Perceived,
    Vintage,
    Counterfactual,
    Window,
}

impl fmt::Display for UniverseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UniverseTag::Perceived => "perceived",
            UniverseTag::Vintage => "vintage",
            UniverseTag::Counterfactual => "counterfactual",
            UniverseTag::Window => "window",
        })
    }
}

impl FromStr for UniverseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perceived" => Ok(UniverseTag::Perceived),
            "vintage" => Ok(UniverseTag::Vintage),
            "counterfactual" => Ok(UniverseTag::Counterfactual),
            "window" => Ok(UniverseTag::Window),
            other => Err(Error::Runtime(format!("unknown universe tag '{other}'"))),
        }
    }
}

/// One hypothesised market: `K` likelihood rows over `0..=N` demand counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    id: u64,
    tag: UniverseTag,
    k: usize,
    n: u32,
    /// Row-major `K × (N+1)`.
    q: Vec<f64>,
    /// Expected demand count per arm.
    means: Vec<f64>,
    /// `Σ_d q ln q` per arm (negative entropy).
    neg_entropy: Vec<f64>,
}

impl Universe {
    /// Builds a universe from `K` rows of length `N+1`. Each row is
    /// normalised and every cell lifted to at least `floor`.
    pub fn from_rows(tag: UniverseTag, rows: Vec<Vec<f64>>, n: u32, floor: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Construction("universe needs at least one row".into()));
        }
        let width = n as usize + 1;
        if floor < 0.0 || floor * width as f64 > 1.0 {
            return Err(Error::Construction(format!(
                "smoothing floor {floor} is infeasible for {width} cells"
            )));
        }
        let k = rows.len();
        let mut q = Vec::with_capacity(k * width);
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Construction(format!(
                    "row {} has {} cells, expected {width}",
                    i + 1,
                    row.len()
                )));
            }
            normalize_with_floor(&mut row, floor);
            q.extend_from_slice(&row);
        }
        Ok(Self::from_flat(tag, k, n, q))
    }

    /// Binomial rows with success probability `demand[k]` at arm `k`.
    pub fn binomial(tag: UniverseTag, demand: &[f64], n: u32, floor: f64) -> Result<Self> {
        let rows = demand
            .iter()
            .map(|&p| binomial_row(n, p.clamp(0.0, 1.0)))
            .collect();
        Self::from_rows(tag, rows, n, floor)
    }

    /// Assumes rows are already valid pmfs.
    fn from_flat(tag: UniverseTag, k: usize, n: u32, q: Vec<f64>) -> Self {
        let width = n as usize + 1;
        let mut means = Vec::with_capacity(k);
        let mut neg_entropy = Vec::with_capacity(k);
        for row in q.chunks_exact(width) {
            means.push(row.iter().enumerate().map(|(d, p)| d as f64 * p).sum());
            neg_entropy.push(
                row.iter()
                    .filter(|p| **p > 0.0)
                    .map(|p| p * p.ln())
                    .sum(),
            );
        }
        Self {
            id: 0,
            tag,
            k,
            n,
            q,
            means,
            neg_entropy,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn tag(&self) -> UniverseTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: UniverseTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn batch_size(&self) -> u32 {
        self.n
    }

    pub fn row(&self, arm: usize) -> &[f64] {
        let w = self.n as usize + 1;
        &self.q[arm * w..(arm + 1) * w]
    }

    pub fn likelihood(&self, arm: usize, demand: u32) -> f64 {
        self.q[arm * (self.n as usize + 1) + demand as usize]
    }

    /// Expected demand count at `arm`.
    pub fn mean_demand(&self, arm: usize) -> f64 {
        self.means[arm]
    }

    /// `Σ_d q ln q` at `arm`.
    pub fn neg_entropy(&self, arm: usize) -> f64 {
        self.neg_entropy[arm]
    }

    /// Expected profit `Σ_d q[k][d] · a_k · d` at every arm.
    pub fn expected_profits(&self, grid: &PriceGrid) -> Vec<f64> {
        self.means
            .iter()
            .zip(grid.prices())
            .map(|(m, a)| m * a)
            .collect()
    }

    /// Every row sums to one within [`ROW_TOLERANCE`] and has no negative
    /// or non-finite cells.
    pub fn is_valid(&self) -> bool {
        self.q
            .chunks_exact(self.n as usize + 1)
            .all(|row| {
                row.iter().all(|p| p.is_finite() && *p >= 0.0)
                    && (row.iter().sum::<f64>() - 1.0).abs() <= ROW_TOLERANCE
            })
    }

    fn check_shape(&self, k: usize, n: u32) -> Result<()> {
        if self.k != k || self.n != n {
            return Err(Error::Construction(format!(
                "universe shape {}x{} does not match {}x{}",
                self.k,
                self.n + 1,
                k,
                n + 1
            )));
        }
        Ok(())
    }
}

/// How injected universes are weighted against the existing belief.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// Yellow: new weight = current max belief. Red: new weight = `L` times
    /// the mean existing belief.
    #[default]
    Relative,
    /// Yellow: new weight = 1. Red: new weight = `L`. Both before
    /// renormalising against an existing belief that sums to one.
    Literal,
}

/// Which alert an injection answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectKind {
    Yellow,
    Red,
}

/// A set of universes with a posterior belief.
#[derive(Debug, Clone)]
pub struct MultiUniverse {
    universes: Vec<Universe>,
    belief: Vec<f64>,
    belief_floor: f64,
    k: usize,
    n: u32,
    next_id: u64,
}

impl MultiUniverse {
    /// Empty collection for a `K`-arm grid with batch size `N`.
    pub fn empty(k: usize, n: u32) -> Self {
        Self {
            universes: Vec::new(),
            belief: Vec::new(),
            belief_floor: BELIEF_FLOOR,
            k,
            n,
            next_id: 1,
        }
    }

    /// Universes with a uniform belief.
    pub fn uniform(universes: Vec<Universe>) -> Result<Self> {
        let w = vec![1.0; universes.len()];
        Self::with_weights(universes, w)
    }

    /// Universes with the given (unnormalised) weights.
    pub fn with_weights(universes: Vec<Universe>, weights: Vec<f64>) -> Result<Self> {
        let first = universes
            .first()
            .ok_or_else(|| Error::Construction("multi-universe needs a universe".into()))?;
        if weights.len() != universes.len() {
            return Err(Error::Construction("one weight per universe".into()));
        }
        let mut mu = Self::empty(first.k, first.n);
        for (u, w) in universes.into_iter().zip(weights) {
            u.check_shape(mu.k, mu.n)?;
            mu.push_raw(u, w);
        }
        mu.renormalize();
        Ok(mu)
    }

    pub fn set_belief_floor(&mut self, floor: f64) {
        self.belief_floor = floor.max(0.0);
        self.renormalize();
    }

    pub fn belief_floor(&self) -> f64 {
        self.belief_floor
    }

    pub fn len(&self) -> usize {
        self.universes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universes.is_empty()
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn batch_size(&self) -> u32 {
        self.n
    }

    pub fn universes(&self) -> &[Universe] {
        &self.universes
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn max_belief(&self) -> f64 {
        self.belief.iter().copied().fold(0.0, f64::max)
    }

    /// Overwrites the belief (renormalised and floored).
    pub fn set_belief(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::Construction("one weight per universe".into()));
        }
        self.belief.copy_from_slice(weights);
        self.renormalize();
        Ok(())
    }

    fn push_raw(&mut self, mut u: Universe, weight: f64) {
        u.id = self.next_id;
        self.next_id += 1;
        self.universes.push(u);
        self.belief.push(weight);
    }

    fn renormalize(&mut self) {
        let l = self.belief.len();
        if l > 0 {
            normalize_with_floor(&mut self.belief, self.belief_floor / l as f64);
        }
    }

    /// `p'(θ) ∝ p(θ) q_θ[arm][demand]`, then renormalise and floor.
    pub fn bayes_update(&mut self, arm: usize, demand: u32) -> Result<()> {
        if arm >= self.k || demand > self.n {
            return Err(Error::Runtime(format!(
                "observation (arm {arm}, demand {demand}) outside {}x{}",
                self.k,
                self.n + 1
            )));
        }
        for (p, u) in self.belief.iter_mut().zip(&self.universes) {
            *p *= u.likelihood(arm, demand);
        }
        self.renormalize();
        Ok(())
    }

    /// Adds universes, weighting them according to `kind` and `rule`.
    pub fn inject(&mut self, new: Vec<Universe>, kind: InjectKind, rule: WeightRule) -> Result<()> {
        if new.is_empty() {
            return Ok(());
        }
        for u in &new {
            u.check_shape(self.k, self.n)?;
        }
        let old = self.len();
        let total = old + new.len();
        let weight = if old == 0 {
            1.0
        } else {
            match (kind, rule) {
                (InjectKind::Yellow, WeightRule::Relative) => self.max_belief(),
                (InjectKind::Yellow, WeightRule::Literal) => 1.0,
                (InjectKind::Red, WeightRule::Relative) => {
                    total as f64 * self.belief.iter().sum::<f64>() / old as f64
                }
                (InjectKind::Red, WeightRule::Literal) => total as f64,
            }
        };
        for u in new {
            self.push_raw(u, weight);
        }
        self.renormalize();
        Ok(())
    }

    /// Adds one universe with an explicit pre-normalisation weight.
    pub fn insert(&mut self, u: Universe, weight: f64) -> Result<u64> {
        u.check_shape(self.k, self.n)?;
        self.push_raw(u, weight.max(0.0));
        self.renormalize();
        Ok(self.next_id - 1)
    }

    /// Replaces the likelihood of the universe with `id`, keeping its belief.
    pub fn replace(&mut self, id: u64, mut u: Universe) -> Result<()> {
        u.check_shape(self.k, self.n)?;
        let slot = self
            .universes
            .iter_mut()
            .find(|x| x.id == id)
            .ok_or_else(|| Error::Runtime(format!("no universe with id {id}")))?;
        u.id = id;
        *slot = u;
        Ok(())
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.universes.iter().position(|u| u.id == id)
    }

    /// Drops the lowest-belief universes until at most `cap` remain.
    /// Universes whose id is in `keep` are never dropped.
    pub fn prune(&mut self, cap: usize, keep: &[u64]) {
        while self.len() > cap.max(1) {
            let victim = self
                .belief
                .iter()
                .enumerate()
                .filter(|(i, _)| !keep.contains(&self.universes[*i].id))
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i);
            match victim {
                Some(i) => {
                    self.universes.remove(i);
                    self.belief.remove(i);
                }
                None => break,
            }
        }
        self.renormalize();
    }

    /// Mixture row `Σ_θ p(θ) q_θ[arm]`.
    pub fn mixture_row(&self, arm: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n as usize + 1];
        for (u, p) in self.universes.iter().zip(&self.belief) {
            for (r, q) in row.iter_mut().zip(u.row(arm)) {
                *r += p * q;
            }
        }
        row
    }

    /// Posterior-predictive demand fraction `D(a_k) = Σ_θ p(θ) E_θ[d | a_k] / N`.
    pub fn predictive_demand(&self) -> Vec<f64> {
        let n = f64::from(self.n);
        (0..self.k)
            .map(|k| {
                self.universes
                    .iter()
                    .zip(&self.belief)
                    .map(|(u, p)| p * u.mean_demand(k))
                    .sum::<f64>()
                    / n
            })
            .collect()
    }

    /// Sum of the belief vector minus one.
    pub fn normalization_error(&self) -> f64 {
        (self.belief.iter().sum::<f64>() - 1.0).abs()
    }

    /// Belief sums to one, respects the floor, and every row is a pmf.
    pub fn is_valid(&self) -> bool {
        let l = self.len();
        if l == 0 {
            return true;
        }
        let min = self.belief_floor / l as f64;
        self.normalization_error() <= ROW_TOLERANCE
            && self.belief.iter().all(|p| *p >= min - 1e-15)
            && self.universes.iter().all(Universe::is_valid)
    }
}
