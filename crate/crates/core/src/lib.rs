//! Non-stationary dynamic pricing with information-directed sampling.
//!
//! The engine prices a product from a finite grid, one batch of `N`
//! customers per round. Its model of the market is a finite set of
//! hypothesised demand environments ("universes") with a posterior belief
//! over them. Prices are chosen by minimising the information ratio, and an
//! auditing pipeline watches for market shifts: a time-uniform confidence
//! sequence raises a yellow card (new counterfactual universes, sparse audit
//! sampling), and exact binomial tests on the audit samples raise a red card
//! (full re-exploration).
//!
//! Module map:
//! - [`pricing`], [`trace`]: price grids, observations, regret accounting.
//! - [`environments`]: segment-valuation markets with shift regimes and a
//!   demand-table market.
//! - [`universes`]: universe construction and belief maintenance.
//! - [`ids`]: finite information-directed sampling.
//! - [`audit`]: yellow/red card tests and the moving-window refit.
//! - [`policies`]: the orchestrating policy, its variants and baselines.
//! - [`harness`]: trials, experiment grids, summaries, CLI.

pub mod audit;
pub mod environments;
mod error;
pub mod harness;
pub mod ids;
pub mod policies;
pub mod pricing;
pub mod stats;
pub mod trace;
pub mod universes;
pub mod validate;

pub use error::{Error, Result};
pub use pricing::{realized_profit, regret_step, History, Observation, PriceGrid};
pub use trace::{Alert, TraceRow, TrialTrace};
