use rand::distr::weighted::WeightedIndex;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{MultiUniverse, Universe, UniverseTag, LIKELIHOOD_FLOOR};
use crate::error::{Error, Result};
use crate::pricing::PriceGrid;
use crate::stats::{exceed_prob, isotonic_nonincreasing};

/// Bandwidth of the smoothing noise added to the valuation pmf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRule {
    /// Half the mean grid spacing.
    HalfSpacing,
    /// Standard deviation equal to the largest interior midpoint.
    SupMidpoint,
    Fixed(f64),
}

/// How a counterfactual universe's likelihood rows are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    /// `Binomial(N, P(v ≥ a))` computed from the valuation distribution.
    Exact,
    /// Empirical pmf over `batches` simulated batches of `N` valuations.
    MonteCarlo { batches: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Number of shifts spread evenly over `[−span·a_K, +span·a_K]`.
    pub shift_count: usize,
    pub shift_span: f64,
    /// Overrides the evenly spread grid when set.
    pub shifts: Option<Vec<f64>>,
    pub noise: NoiseRule,
    pub mode: LikelihoodMode,
    pub floor: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            shift_count: 9,
            shift_span: 0.3,
            shifts: None,
            noise: NoiseRule::HalfSpacing,
            mode: LikelihoodMode::Exact,
            floor: LIKELIHOOD_FLOOR,
        }
    }
}

impl GeneratorConfig {
    /// The shifts this configuration applies on `grid`.
    pub fn shift_values(&self, grid: &PriceGrid) -> Vec<f64> {
        match &self.shifts {
            Some(s) => s.clone(),
            None => shift_grid(self.shift_count, self.shift_span * grid.max_price()),
        }
    }

    pub fn noise_std(&self, grid: &PriceGrid) -> f64 {
        match self.noise {
            NoiseRule::HalfSpacing => grid.mean_spacing() / 2.0,
            NoiseRule::SupMidpoint => {
                let p = grid.prices();
                if p.len() < 2 {
                    p[0]
                } else {
                    (p[p.len() - 2] + p[p.len() - 1]) / 2.0
                }
            }
            NoiseRule::Fixed(s) => s.max(0.0),
        }
    }
}

/// `count` evenly spaced values over `[−half_width, +half_width]`; a
/// single value is `0`.
pub fn shift_grid(count: usize, half_width: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Discrete valuation distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationPmf {
    pub support: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Reads a valuation pmf off a demand curve: the drop between neighbouring
/// prices sits at their midpoint, `1 − D(a_1)` half a spacing below the
/// grid and `D(a_K)` half a spacing above it. `demand` is first made
/// non-increasing by isotonic regression.
pub fn valuation_from_demand(demand: &[f64], grid: &PriceGrid) -> Result<ValuationPmf> {
    let k = grid.len();
    if demand.len() != k {
        return Err(Error::Construction(format!(
            "demand curve has {} points for a {k}-price grid",
            demand.len()
        )));
    }
    let d = isotonic_nonincreasing(demand);
    let p = grid.prices();
    let mut support = Vec::with_capacity(k + 1);
    let mut mass = Vec::with_capacity(k + 1);
    support.push(p[0] - grid.low_spacing() / 2.0);
    mass.push(1.0 - d[0]);
    for i in 0..k - 1 {
        support.push((p[i] + p[i + 1]) / 2.0);
        mass.push(d[i] - d[i + 1]);
    }
    support.push(p[k - 1] + grid.high_spacing() / 2.0);
    mass.push(d[k - 1]);
    Ok(ValuationPmf { support, mass })
}

/// `P(v + shift + ξ ≥ a_k)` at every price for `ξ ~ Normal(0, noise_std)`.
pub fn counterfactual_demand(
    pmf: &ValuationPmf,
    grid: &PriceGrid,
    shift: f64,
    noise_std: f64,
) -> Vec<f64> {
    grid.prices()
        .iter()
        .map(|&a| {
            pmf.support
                .iter()
                .zip(&pmf.mass)
                .map(|(v, m)| m * exceed_prob(v + shift, a, noise_std))
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect()
}

/// Counterfactual universes built by shifting the valuation distribution
/// implied by the current posterior-predictive demand curve.
pub fn generate(
    mu: &MultiUniverse,
    grid: &PriceGrid,
    cfg: &GeneratorConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<Universe>> {
    if mu.is_empty() {
        return Ok(Vec::new());
    }
    let pmf = valuation_from_demand(&mu.predictive_demand(), grid)?;
    let sigma = cfg.noise_std(grid);
    let n = grid.batch_size();
    cfg.shift_values(grid)
        .into_iter()
        .map(|c| match cfg.mode {
            LikelihoodMode::Exact => {
                let curve = counterfactual_demand(&pmf, grid, c, sigma);
                Universe::binomial(UniverseTag::Counterfactual, &curve, n, cfg.floor)
            }
            LikelihoodMode::MonteCarlo { batches } => {
                simulate(&pmf, grid, c, sigma, batches, cfg.floor, rng)
            }
        })
        .collect()
}

fn simulate(
    pmf: &ValuationPmf,
    grid: &PriceGrid,
    shift: f64,
    sigma: f64,
    batches: usize,
    floor: f64,
    rng: &mut dyn RngCore,
) -> Result<Universe> {
    if batches == 0 {
        return Err(Error::config("Monte-Carlo generator needs at least one batch"));
    }
    let pick = WeightedIndex::new(&pmf.mass)
        .map_err(|e| Error::Construction(format!("valuation pmf: {e}")))?;
    let n = grid.batch_size() as usize;
    let k = grid.len();
    let mut counts = vec![vec![0.0; n + 1]; k];
    let mut vals = vec![0.0; n];
    for _ in 0..batches {
        for v in vals.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = pmf.support[pick.sample(rng)] + shift + sigma * z;
        }
        vals.sort_by(f64::total_cmp);
        for (arm, &a) in grid.prices().iter().enumerate() {
            let below = vals.partition_point(|v| *v < a);
            counts[arm][n - below] += 1.0;
        }
    }
    Universe::from_rows(UniverseTag::Counterfactual, counts, grid.batch_size(), floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn midpoint_mass() {
        let grid = PriceGrid::new(vec![0.5, 0.6], 10).unwrap();
        let pmf = valuation_from_demand(&[0.4, 0.3], &grid).unwrap();
        assert!((pmf.support[1] - 0.55).abs() < 1e-12);
        assert!((pmf.mass[1] - 0.1).abs() < 1e-12);
        assert!((pmf.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_curve_has_no_interior_mass() {
        let grid = PriceGrid::evenly_spaced(0.1, 0.5, 5, 10).unwrap();
        let pmf = valuation_from_demand(&[0.4; 5], &grid).unwrap();
        assert!(pmf.mass[1..5].iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn three_point_differences() {
        let grid = PriceGrid::new(vec![0.2, 0.4, 0.6], 10).unwrap();
        let pmf = valuation_from_demand(&[1.0, 0.5, 0.0], &grid).unwrap();
        assert!((pmf.support[1] - 0.3).abs() < 1e-12 && (pmf.mass[1] - 0.5).abs() < 1e-12);
        assert!((pmf.support[2] - 0.5).abs() < 1e-12 && (pmf.mass[2] - 0.5).abs() < 1e-12);
        assert_eq!(pmf.mass[0], 0.0);
        assert_eq!(pmf.mass[3], 0.0);
    }

    #[test]
    fn identity_shift_reproduces_curve() {
        let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
        let d: Vec<f64> = (0..20).map(|k| (0.95 - 0.05 * k as f64).max(0.0)).collect();
        let pmf = valuation_from_demand(&d, &grid).unwrap();
        let back = counterfactual_demand(&pmf, &grid, 0.0, 0.0);
        for (x, y) in back.iter().zip(&d) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn upward_shift_moves_point_mass() {
        let grid = PriceGrid::evenly_spaced(0.05, 0.95, 10, 10).unwrap();
        let pmf = ValuationPmf {
            support: vec![0.4],
            mass: vec![1.0],
        };
        let curve = counterfactual_demand(&pmf, &grid, 0.3, 0.0);
        for (a, d) in grid.prices().iter().zip(&curve) {
            let expect = if *a <= 0.7 { 1.0 } else { 0.0 };
            assert_eq!(*d, expect, "price {a}");
        }
    }

    #[test]
    fn nine_shifts_span_the_range() {
        let s = shift_grid(9, 1.0);
        assert_eq!(s.len(), 9);
        assert_eq!(s[0], -1.0);
        assert_eq!(s[4], 0.0);
        assert_eq!(s[8], 1.0);
    }

    #[test]
    fn generator_returns_one_universe_per_shift() {
        let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
        let base = Universe::binomial(
            UniverseTag::Perceived,
            &(0..20).map(|k| 0.9 - 0.04 * k as f64).collect::<Vec<_>>(),
            10,
            1e-6,
        )
        .unwrap();
        let mu = MultiUniverse::uniform(vec![base]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = generate(&mu, &grid, &GeneratorConfig::default(), &mut rng).unwrap();
        assert_eq!(out.len(), 9);
        assert!(out.iter().all(|u| u.tag() == UniverseTag::Counterfactual && u.is_valid()));

        let mc = GeneratorConfig {
            mode: LikelihoodMode::MonteCarlo { batches: 200 },
            ..GeneratorConfig::default()
        };
        let out = generate(&mu, &grid, &mc, &mut rng).unwrap();
        assert!(out.iter().all(Universe::is_valid));

        let none = GeneratorConfig {
            shifts: Some(Vec::new()),
            ..GeneratorConfig::default()
        };
        assert!(generate(&mu, &grid, &none, &mut rng).unwrap().is_empty());
    }
}
