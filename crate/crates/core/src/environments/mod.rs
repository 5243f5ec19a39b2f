//! True market simulators.
//!
//! Two families are provided: [`SegmentPopulation`] (customers drawn from
//! valuation segments, with one of six shift regimes) and [`DemandTable`]
//! (per-price conversion rates with a product schedule). Both are immutable
//! after construction; all randomness in a draw comes from the caller's RNG,
//! so one instance can be shared across policies facing the same market.

mod segments;
mod table;

use std::fmt::Debug;

use rand::RngCore;

pub use segments::{CaseOptions, SamplingMode, SegmentPopulation, ShiftRegime};
pub use table::{DemandTable, ScheduleEntry};

use crate::error::Result;
use crate::pricing::PriceGrid;

pub trait Environment: Debug + Send + Sync {
    /// Probability that one customer buys at `price` in round `t`.
    fn true_demand(&self, t: usize, price: f64) -> Result<f64>;

    /// Number of buyers out of a batch of `batch_size` customers.
    fn sample_batch(
        &self,
        t: usize,
        price: f64,
        batch_size: u32,
        rng: &mut dyn RngCore,
    ) -> Result<u32>;

    /// True demand over a whole grid in round `t`.
    fn demand_curve(&self, t: usize, grid: &PriceGrid) -> Result<Vec<f64>> {
        grid.prices()
            .iter()
            .map(|&p| self.true_demand(t, p))
            .collect()
    }

    fn describe(&self) -> String;

    /// True when rounds `s` and `t` are known to face the same demand
    /// curve. The default never assumes so.
    fn same_market(&self, s: usize, t: usize) -> bool {
        s == t
    }
}

/// Best arm and its expected profit `price · N · D(price)` in round `t`.
/// Ties go to the lower index.
pub fn oracle_profit(env: &dyn Environment, t: usize, grid: &PriceGrid) -> Result<(usize, f64)> {
    let curve = env.demand_curve(t, grid)?;
    Ok(best_of_curve(&curve, grid))
}

pub(crate) fn best_of_curve(curve: &[f64], grid: &PriceGrid) -> (usize, f64) {
    let n = f64::from(grid.batch_size());
    let mut best = (0, f64::NEG_INFINITY);
    for (k, d) in curve.iter().enumerate() {
        let profit = grid.price(k) * n * d;
        if profit > best.1 {
            best = (k, profit);
        }
    }
    best
}

/// Builds one of the six canned segment-population markets (`case_id` in
/// `1..=6`) with default options.
pub fn build_case_environment(case_id: u32, seed: u64) -> Result<SegmentPopulation> {
    SegmentPopulation::for_case(case_id, seed, &CaseOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_arm_oracle() {
        let env = DemandTable::criteo_default().unwrap();
        let grid = PriceGrid::new(vec![150.0], 500).unwrap();
        let (arm, profit) = oracle_profit(&env, 1, &grid).unwrap();
        assert_eq!(arm, 0);
        assert!((profit - 150.0 * 500.0 * 0.737).abs() < 1e-9);
    }
}
