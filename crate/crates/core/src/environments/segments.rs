use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::stats::exceed_prob;

/// How a round's valuations move away from the baseline population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftRegime {
    Stationary,
    /// Valuations gain `delta` from round `t_shift` on.
    RapidGrowth { delta: f64, t_shift: usize },
    /// Valuations carry `+delta` before round `t_shift` and return to the
    /// baseline from then on.
    RapidDecline { delta: f64, t_shift: usize },
    /// Offset `amplitude · sin(2π · periods · t / horizon)`.
    Seasonal {
        amplitude: f64,
        periods: f64,
        horizon: usize,
    },
    /// Common random-walk offset `B_t = B_{t−1} + ξ_t · step_std`, `B_0 = 0`.
    Volatile { step_std: f64 },
    /// Segment means are redrawn from `Beta(alpha, beta)` from round
    /// `t_shift` on.
    UpsideDown {
        alpha: f64,
        beta: f64,
        t_shift: usize,
    },
}

/// Customer-level simulation or the distributionally equivalent binomial
/// shortcut through the analytic mixture CDF.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    #[default]
    PerCustomer,
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseOptions {
    /// Horizon `T`; the seasonal period and the random-walk step scale with it.
    pub horizon: usize,
    pub segments: usize,
    /// Within-segment heterogeneity. Read as a standard deviation unless
    /// `noise_is_variance` is set.
    pub noise: f64,
    pub noise_is_variance: bool,
    pub sampling: SamplingMode,
}

impl Default for CaseOptions {
    fn default() -> Self {
        Self {
            horizon: 2000,
            segments: 1000,
            noise: 0.1,
            noise_is_variance: false,
            sampling: SamplingMode::PerCustomer,
        }
    }
}

/// Equal-sized valuation segments `v_s` with Normal within-segment noise; a
/// customer buys iff `v_s + offset(t) + e ≥ price`.
#[derive(Debug, Clone)]
pub struct SegmentPopulation {
    base_means: Vec<f64>,
    alt_means: Option<Vec<f64>>,
    noise_std: f64,
    regime: ShiftRegime,
    /// Random-walk path for the volatile regime, `walk[t]` for `t = 0..=T`.
    walk: Vec<f64>,
    sampling: SamplingMode,
    label: String,
}

impl SegmentPopulation {
    /// Explicit population, mostly for tests.
    pub fn new(segment_means: Vec<f64>, noise_std: f64, regime: ShiftRegime) -> Result<Self> {
        if segment_means.is_empty() {
            return Err(Error::config("population needs at least one segment"));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::config("noise std must be non-negative"));
        }
        if matches!(regime, ShiftRegime::Volatile { .. } | ShiftRegime::UpsideDown { .. }) {
            return Err(Error::config(
                "volatile and upside-down regimes need a seeded constructor",
            ));
        }
        Ok(Self {
            base_means: segment_means,
            alt_means: None,
            noise_std,
            regime,
            walk: Vec::new(),
            sampling: SamplingMode::PerCustomer,
            label: "custom".into(),
        })
    }

    /// One of the six canned markets. Segment means start from
    /// `Beta(3, 6)` and every random draw comes from `seed`.
    pub fn for_case(case_id: u32, seed: u64, opts: &CaseOptions) -> Result<Self> {
        let horizon = opts.horizon.max(1);
        let regime = match case_id {
            1 => ShiftRegime::Stationary,
            2 => ShiftRegime::RapidGrowth {
                delta: 0.3,
                t_shift: 1001,
            },
            3 => ShiftRegime::RapidDecline {
                delta: 0.3,
                t_shift: 1001,
            },
            4 => ShiftRegime::Seasonal {
                amplitude: 0.3,
                periods: 2.0,
                horizon,
            },
            5 => ShiftRegime::Volatile {
                step_std: 1.0 / (horizon as f64).sqrt(),
            },
            6 => ShiftRegime::UpsideDown {
                alpha: 0.9,
                beta: 0.5,
                t_shift: 1000,
            },
            other => {
                return Err(Error::config(format!(
                    "unknown case id {other}; expected 1..=6"
                )))
            }
        };
        if opts.segments == 0 {
            return Err(Error::config("population needs at least one segment"));
        }
        let noise_std = if opts.noise_is_variance {
            opts.noise.sqrt()
        } else {
            opts.noise
        };
        if !(noise_std >= 0.0) {
            return Err(Error::config("noise must be non-negative"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Beta::new(3.0, 6.0).expect("valid beta");
        let base_means: Vec<f64> = (0..opts.segments).map(|_| base.sample(&mut rng)).collect();
        let alt_means = match &regime {
            ShiftRegime::UpsideDown { alpha, beta, .. } => {
                let dist = Beta::new(*alpha, *beta)
                    .map_err(|e| Error::config(format!("bad beta parameters: {e}")))?;
                Some((0..opts.segments).map(|_| dist.sample(&mut rng)).collect())
            }
            _ => None,
        };
        let walk = match &regime {
            ShiftRegime::Volatile { step_std } => {
                let mut path = Vec::with_capacity(horizon + 1);
                let mut b = 0.0;
                path.push(b);
                for _ in 0..horizon {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    b += xi * step_std;
                    path.push(b);
                }
                path
            }
            _ => Vec::new(),
        };

        Ok(Self {
            base_means,
            alt_means,
            noise_std,
            regime,
            walk,
            sampling: opts.sampling,
            label: format!("case{case_id}"),
        })
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn regime(&self) -> &ShiftRegime {
        &self.regime
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Valuation offset common to every customer in round `t`.
    pub fn offset(&self, t: usize) -> f64 {
        match &self.regime {
            ShiftRegime::Stationary | ShiftRegime::UpsideDown { .. } => 0.0,
            ShiftRegime::RapidGrowth { delta, t_shift } => {
                if t >= *t_shift {
                    *delta
                } else {
                    0.0
                }
            }
            ShiftRegime::RapidDecline { delta, t_shift } => {
                if t < *t_shift {
                    *delta
                } else {
                    0.0
                }
            }
            ShiftRegime::Seasonal {
                amplitude,
                periods,
                horizon,
            } => {
                amplitude
                    * (2.0 * std::f64::consts::PI * periods * t as f64 / *horizon as f64).sin()
            }
            // past the simulated horizon the walk is held at its last value
            ShiftRegime::Volatile { .. } => self.walk[t.min(self.walk.len() - 1)],
        }
    }

    /// Segment means in force at round `t` (before the offset).
    pub fn segment_means(&self, t: usize) -> &[f64] {
        match (&self.regime, &self.alt_means) {
            (ShiftRegime::UpsideDown { t_shift, .. }, Some(alt)) if t >= *t_shift => alt,
            _ => &self.base_means,
        }
    }

    /// Every customer's valuation in segment `s` at round `t`, before noise.
    pub fn segment_valuation(&self, t: usize, s: usize) -> f64 {
        self.segment_means(t)[s] + self.offset(t)
    }
}

impl Environment for SegmentPopulation {
    fn true_demand(&self, t: usize, price: f64) -> Result<f64> {
        let off = self.offset(t);
        let means = self.segment_means(t);
        let total: f64 = means
            .iter()
            .map(|v| exceed_prob(v + off, price, self.noise_std))
            .sum();
        Ok(total / means.len() as f64)
    }

    fn same_market(&self, s: usize, t: usize) -> bool {
        self.offset(s).to_bits() == self.offset(t).to_bits()
            && std::ptr::eq(self.segment_means(s), self.segment_means(t))
    }

    fn sample_batch(
        &self,
        t: usize,
        price: f64,
        batch_size: u32,
        rng: &mut dyn RngCore,
    ) -> Result<u32> {
        match self.sampling {
            SamplingMode::PerCustomer => {
                let off = self.offset(t);
                let means = self.segment_means(t);
                let mut bought = 0;
                for _ in 0..batch_size {
                    let s = rng.random_range(0..means.len());
                    let e: f64 = StandardNormal.sample(rng);
                    if means[s] + off + e * self.noise_std >= price {
                        bought += 1;
                    }
                }
                Ok(bought)
            }
            SamplingMode::Binomial => {
                let p = self.true_demand(t, price)?.clamp(0.0, 1.0);
                let dist = Binomial::new(u64::from(batch_size), p)
                    .map_err(|e| Error::Runtime(format!("binomial draw: {e}")))?;
                Ok(dist.sample(rng) as u32)
            }
        }
    }

    fn describe(&self) -> String {
        format!(
            "{} ({} segments, noise std {})",
            self.label,
            self.base_means.len(),
            self.noise_std
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::oracle_profit;
    use crate::pricing::PriceGrid;

    #[test]
    fn unknown_case_is_config_error() {
        assert!(SegmentPopulation::for_case(7, 0, &CaseOptions::default())
            .unwrap_err()
            .is_config());
        assert!(SegmentPopulation::for_case(0, 0, &CaseOptions::default()).is_err());
    }

    #[test]
    fn case2_jump_is_exactly_delta() {
        let env = SegmentPopulation::for_case(2, 3, &CaseOptions::default()).unwrap();
        for s in [0, 17, 999] {
            let before = env.segment_valuation(1000, s);
            let after = env.segment_valuation(1001, s);
            assert!((after - before - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn case3_starts_high() {
        let env = SegmentPopulation::for_case(3, 3, &CaseOptions::default()).unwrap();
        assert_eq!(env.offset(1), 0.3);
        assert_eq!(env.offset(1000), 0.3);
        assert_eq!(env.offset(1001), 0.0);
    }

    #[test]
    fn case1_is_stationary() {
        let env = SegmentPopulation::for_case(1, 9, &CaseOptions::default()).unwrap();
        for p in [0.1, 0.3, 0.6] {
            assert_eq!(env.true_demand(1, p).unwrap(), env.true_demand(1500, p).unwrap());
        }
    }

    #[test]
    fn case4_quarter_period() {
        let env = SegmentPopulation::for_case(4, 1, &CaseOptions::default()).unwrap();
        assert!((env.offset(250) - 0.3).abs() < 1e-12);
        assert!(env.offset(500).abs() < 1e-12);
    }

    #[test]
    fn case5_walk_is_seeded() {
        let a = SegmentPopulation::for_case(5, 11, &CaseOptions::default()).unwrap();
        let b = SegmentPopulation::for_case(5, 11, &CaseOptions::default()).unwrap();
        let c = SegmentPopulation::for_case(5, 12, &CaseOptions::default()).unwrap();
        assert_eq!(a.offset(0), 0.0);
        assert_eq!(a.offset(1234), b.offset(1234));
        assert_ne!(a.offset(1234), c.offset(1234));
        // every segment shares the shock
        assert!(
            (a.segment_valuation(700, 3) - a.segment_means(700)[3] - a.offset(700)).abs() < 1e-15
        );
    }

    #[test]
    fn case6_redraws_segments() {
        let env = SegmentPopulation::for_case(6, 5, &CaseOptions::default()).unwrap();
        let before = env.segment_means(999);
        let after = env.segment_means(1000);
        assert_ne!(before, after);
        let mean_before = before.iter().sum::<f64>() / before.len() as f64;
        let mean_after = after.iter().sum::<f64>() / after.len() as f64;
        assert!((mean_before - 1.0 / 3.0).abs() < 0.03);
        assert!((mean_after - 0.9 / 1.4).abs() < 0.04);
        assert_eq!(env.noise_std(), 0.1);
    }

    #[test]
    fn single_segment_symmetric_noise() {
        let env = SegmentPopulation::new(vec![0.5], 0.1, ShiftRegime::Stationary).unwrap();
        assert!((env.true_demand(1, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(env.true_demand(1, -10.0).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn demand_is_monotone_on_grid() {
        let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
        for case in 1..=6 {
            let env = SegmentPopulation::for_case(case, 2, &CaseOptions::default()).unwrap();
            for t in [1, 500, 1000, 1001, 1700, 2000] {
                let curve = env.demand_curve(t, &grid).unwrap();
                assert!(curve.windows(2).all(|w| w[0] >= w[1]), "case {case} t {t}");
            }
        }
    }

    #[test]
    fn case1_optimum_sits_near_a_quarter() {
        let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
        let env = SegmentPopulation::for_case(1, 0, &CaseOptions::default()).unwrap();
        let (arm, profit) = oracle_profit(&env, 1, &grid).unwrap();
        assert!((4..=6).contains(&arm), "arm {arm}");
        assert!(profit > 1.4 && profit < 1.9);
    }

    #[test]
    fn noise_as_variance() {
        let opts = CaseOptions {
            noise_is_variance: true,
            ..CaseOptions::default()
        };
        let env = SegmentPopulation::for_case(1, 0, &opts).unwrap();
        assert!((env.noise_std() - 0.1f64.sqrt()).abs() < 1e-15);
    }
}
