//! Price grids, batch observations and per-round profit/regret arithmetic.
//!
//! Arms are addressed by a 0-based index internally. Every external format
//! (trace CSV, universe files, CLI output) uses 1-based arm numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ordered finite action set together with the batch size `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    prices: Vec<f64>,
    batch_size: u32,
}

impl PriceGrid {
    /// Builds a grid from explicit prices.
    ///
    /// Prices must be finite, positive and strictly increasing. A single
    /// price is accepted here (degenerate one-arm markets are useful in
    /// tests); [`PriceGrid::evenly_spaced`] requires at least two.
    pub fn new(prices: Vec<f64>, batch_size: u32) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::config("price grid needs at least one price"));
        }
        if batch_size == 0 {
            return Err(Error::config("batch size N must be at least 1"));
        }
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::config("prices must be finite and positive"));
        }
        if prices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("prices must be strictly increasing"));
        }
        Ok(Self { prices, batch_size })
    }

    /// `k` equally spaced prices from `low` to `high` inclusive.
    pub fn evenly_spaced(low: f64, high: f64, k: usize, batch_size: u32) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || low <= 0.0 || high <= low {
            return Err(Error::config(format!(
                "invalid price bounds: need 0 < low < high, got low={low}, high={high}"
            )));
        }
        if k < 2 {
            return Err(Error::config(format!("need at least 2 prices, got {k}")));
        }
        let step = (high - low) / (k - 1) as f64;
        let mut prices: Vec<f64> = (0..k).map(|i| low + step * i as f64).collect();
        // pin the endpoint exactly
        prices[k - 1] = high;
        Self::new(prices, batch_size)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn price(&self, arm: usize) -> f64 {
        self.prices[arm]
    }

    pub fn batch_size(&self) -> u32 {
        self.batch_size
    }

    pub fn max_price(&self) -> f64 {
        self.prices[self.prices.len() - 1]
    }

    /// Distance between the two lowest prices (used for tail placement).
    pub fn low_spacing(&self) -> f64 {
        if self.prices.len() < 2 {
            self.prices[0]
        } else {
            self.prices[1] - self.prices[0]
        }
    }

    /// Distance between the two highest prices.
    pub fn high_spacing(&self) -> f64 {
        let k = self.prices.len();
        if k < 2 {
            self.prices[0]
        } else {
            self.prices[k - 1] - self.prices[k - 2]
        }
    }

    /// Mean spacing over the grid.
    pub fn mean_spacing(&self) -> f64 {
        let k = self.prices.len();
        if k < 2 {
            self.prices[0]
        } else {
            (self.prices[k - 1] - self.prices[0]) / (k - 1) as f64
        }
    }

    /// Arm index of a price, matching up to a relative tolerance of 1e-9.
    pub fn arm_of(&self, price: f64) -> Option<usize> {
        self.prices
            .iter()
            .position(|p| (p - price).abs() <= 1e-9 * p.abs().max(1.0))
    }

    /// Same grid with every price scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.prices.iter().map(|p| p * factor).collect(),
            self.batch_size,
        )
    }
}

/// One pricing round: which arm was offered and how many of the `N`
/// customers bought.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    /// 1-based round number.
    pub round: usize,
    /// 0-based arm index.
    pub arm: usize,
    pub demand: u32,
}

impl Observation {
    pub fn new(round: usize, arm: usize, demand: u32) -> Self {
        Self { round, arm, demand }
    }
}

/// Append-only log of observations with consecutive round numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    observations: Vec<Observation>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if let Some(last) = self.observations.last() {
            if obs.round != last.round + 1 {
                return Err(Error::Runtime(format!(
                    "history rounds must increase by one: {} follows {}",
                    obs.round, last.round
                )));
            }
        }
        self.observations.push(obs);
        Ok(())
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn last(&self) -> Option<&Observation> {
        self.observations.last()
    }
}

/// Profit of one batch: `price × demand`.
pub fn realized_profit(price: f64, demand: u32) -> f64 {
    price * f64::from(demand)
}

/// Regret increment for one round. Negative when the realized draw beats the
/// expected oracle profit.
pub fn regret_step(oracle_profit: f64, realized: f64) -> f64 {
    oracle_profit - realized
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_spacing() {
        let g = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g.price(0), 0.01);
        assert_eq!(g.max_price(), 1.0);
        assert!((g.price(1) - g.price(0) - 0.99 / 19.0).abs() < 1e-12);
        assert!((g.mean_spacing() - 0.052105).abs() < 1e-5);
    }

    #[test]
    fn criteo_grid() {
        let g = PriceGrid::evenly_spaced(10.0, 500.0, 50, 500).unwrap();
        for (i, p) in g.prices().iter().enumerate() {
            assert!((p - 10.0 * (i + 1) as f64).abs() < 1e-9);
        }
        assert_eq!(g.arm_of(150.0), Some(14));
    }

    #[test]
    fn two_point_grid() {
        let g = PriceGrid::evenly_spaced(1.0, 2.0, 2, 1).unwrap();
        assert_eq!(g.prices(), &[1.0, 2.0]);
    }

    #[test]
    fn bad_grids_are_config_errors() {
        assert!(PriceGrid::evenly_spaced(0.0, 1.0, 5, 1).unwrap_err().is_config());
        assert!(PriceGrid::evenly_spaced(1.0, 1.0, 5, 1).is_err());
        assert!(PriceGrid::evenly_spaced(1.0, 2.0, 1, 1).is_err());
        assert!(PriceGrid::evenly_spaced(1.0, 2.0, 3, 0).is_err());
        assert!(PriceGrid::new(vec![1.0, 1.0], 1).is_err());
    }

    #[test]
    fn profit_and_regret() {
        assert_eq!(realized_profit(0.5, 7), 3.5);
        assert_eq!(realized_profit(0.3, 0), 0.0);
        assert_eq!(realized_profit(150.0, 368), 55200.0);
        assert_eq!(regret_step(5.0, 5.0), 0.0);
        assert_eq!(regret_step(5.0, 3.5), 1.5);
        // two-arm market, a* = 0.4 with D = 0.5 and N = 10; played 0.9 and sold 1
        let oracle = 0.4 * 10.0 * 0.5;
        assert!((regret_step(oracle, realized_profit(0.9, 1)) - 1.1).abs() < 1e-12);
    }

    #[test]
    fn history_is_append_only_and_round_trips() {
        let mut h = History::new();
        h.push(Observation::new(1, 0, 3)).unwrap();
        h.push(Observation::new(2, 1, 4)).unwrap();
        assert!(h.push(Observation::new(4, 1, 4)).is_err());
        let json = serde_json::to_string(&h).unwrap();
        let back: History = serde_json::from_str(&json).unwrap();
        assert_eq!(h, back);
    }
}
