//! Finite information-directed sampling over a multi-universe.
//!
//! For every arm `a` the policy weighs the expected regret
//! `Δ_a = R* − Σ_θ p(θ) E_θ[profit at a]` against the expected information
//! gain `g_a`, the mutual information between the next demand observation
//! at `a` and the identity of the optimal arm (or, for the θ-variant, the
//! identity of the universe). Gains are in nats.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::pricing::PriceGrid;
use crate::universes::MultiUniverse;

/// Gains at or below this count as zero.
pub const GAIN_TOL: f64 = 1e-12;
/// Regrets at or below this count as zero.
pub const REGRET_TOL: f64 = 1e-9;

/// What the information gain is about.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoTarget {
    /// `I(a*; d)`.
    #[default]
    OptimalArm,
    /// `I(θ; d)`.
    Universe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrVectors {
    pub delta: Vec<f64>,
    pub gain: Vec<f64>,
    /// `p(a*)` for every arm.
    pub optimal_prob: Vec<f64>,
    pub r_star: f64,
}

/// Best arm of every universe by expected profit; ties go to the lower
/// index.
pub fn optimal_partition(mu: &MultiUniverse, grid: &PriceGrid) -> Vec<usize> {
    mu.universes()
        .iter()
        .map(|u| {
            let mut best = (0, f64::NEG_INFINITY);
            for (k, &a) in grid.prices().iter().enumerate() {
                let v = a * u.mean_demand(k);
                if v > best.1 {
                    best = (k, v);
                }
            }
            best.0
        })
        .collect()
}

/// Expected regret and information gain at every arm.
pub fn finite_ir(mu: &MultiUniverse, grid: &PriceGrid, target: InfoTarget) -> IrVectors {
    let k = grid.len();
    let width = grid.batch_size() as usize + 1;
    let p = mu.belief();
    let us = mu.universes();
    let best = optimal_partition(mu, grid);

    let mut optimal_prob = vec![0.0; k];
    let mut r_star = 0.0;
    for (i, u) in us.iter().enumerate() {
        optimal_prob[best[i]] += p[i];
        r_star += p[i] * grid.price(best[i]) * u.mean_demand(best[i]);
    }

    // cells of the a* partition that carry mass
    let cells: Vec<usize> = (0..k).filter(|&a| optimal_prob[a] > 0.0).collect();
    let mut cell_of = vec![usize::MAX; k];
    for (c, &a) in cells.iter().enumerate() {
        cell_of[a] = c;
    }

    let mut delta = Vec::with_capacity(k);
    let mut gain = Vec::with_capacity(k);
    let mut marginal = vec![0.0; width];
    let mut joint = vec![0.0; cells.len() * width];
    for arm in 0..k {
        let price = grid.price(arm);
        let mixture_profit: f64 = us
            .iter()
            .zip(p)
            .map(|(u, pi)| pi * price * u.mean_demand(arm))
            .sum();
        delta.push(r_star - mixture_profit);

        marginal.fill(0.0);
        let g = match target {
            InfoTarget::OptimalArm => {
                joint.fill(0.0);
                for (i, u) in us.iter().enumerate() {
                    let c = cell_of[best[i]];
                    let slot = &mut joint[c * width..(c + 1) * width];
                    for ((j, m), q) in slot.iter_mut().zip(marginal.iter_mut()).zip(u.row(arm)) {
                        let w = p[i] * q;
                        *j += w;
                        *m += w;
                    }
                }
                let mut g = 0.0;
                for (c, &a) in cells.iter().enumerate() {
                    let pa = optimal_prob[a];
                    for (j, m) in joint[c * width..(c + 1) * width].iter().zip(&marginal) {
                        if *j > 0.0 {
                            g += j * (j / (pa * m)).ln();
                        }
                    }
                }
                g
            }
            InfoTarget::Universe => {
                let mut cond = 0.0;
                for (i, u) in us.iter().enumerate() {
                    cond += p[i] * u.neg_entropy(arm);
                    for (m, q) in marginal.iter_mut().zip(u.row(arm)) {
                        *m += p[i] * q;
                    }
                }
                let h: f64 = marginal
                    .iter()
                    .filter(|m| **m > 0.0)
                    .map(|m| m * m.ln())
                    .sum();
                cond - h
            }
        };
        gain.push(g.max(0.0));
    }

    IrVectors {
        delta,
        gain,
        optimal_prob,
        r_star,
    }
}

/// `Δ²/g` under the zero-tolerance conventions.
fn ratio(delta: f64, gain: f64) -> f64 {
    if gain <= GAIN_TOL {
        if delta <= REGRET_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        delta.max(0.0).powi(2) / gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub arm: usize,
    pub ratio: f64,
    /// Every arm had infinite ratio and the least-regret arm was taken.
    pub fallback: bool,
}

/// Arm minimising `Δ²/g`, lowest index on ties.
pub fn select_deterministic(ir: &IrVectors) -> Selection {
    let mut best: Option<(usize, f64)> = None;
    for (k, (&d, &g)) in ir.delta.iter().zip(&ir.gain).enumerate() {
        let r = ratio(d, g);
        if r.is_finite() && best.is_none_or(|(_, b)| r < b) {
            best = Some((k, r));
        }
    }
    match best {
        Some((arm, ratio)) => Selection {
            arm,
            ratio,
            fallback: false,
        },
        None => Selection {
            arm: argmin(&ir.delta),
            ratio: f64::INFINITY,
            fallback: true,
        },
    }
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

/// Minimiser of the information ratio over action distributions,
/// supported on at most two arms: probability `weight` on `arms.0` and
/// `1 − weight` on `arms.1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub arms: (usize, usize),
    pub weight: f64,
    pub ratio: f64,
    pub fallback: bool,
}

impl Mixture {
    pub fn support(&self) -> Vec<usize> {
        if self.weight >= 1.0 || self.arms.0 == self.arms.1 {
            vec![self.arms.0]
        } else if self.weight <= 0.0 {
            vec![self.arms.1]
        } else {
            vec![self.arms.0, self.arms.1]
        }
    }
}

/// Information ratio of the mixture putting `q` on arm `i` and `1 − q`
/// on arm `j`.
pub fn mixture_ratio(ir: &IrVectors, i: usize, j: usize, q: f64) -> f64 {
    let d = q * ir.delta[i] + (1.0 - q) * ir.delta[j];
    let g = q * ir.gain[i] + (1.0 - q) * ir.gain[j];
    ratio(d, g)
}

/// Searches every pair of arms; the inner minimisation over the mixing
/// weight is solved in closed form.
pub fn optimal_mixture(ir: &IrVectors) -> Mixture {
    let k = ir.delta.len();
    let det = select_deterministic(ir);
    let mut best = Mixture {
        arms: (det.arm, det.arm),
        weight: 1.0,
        ratio: det.ratio,
        fallback: det.fallback,
    };
    if det.fallback {
        return best;
    }
    for i in 0..k {
        for j in i + 1..k {
            let a = ir.delta[i] - ir.delta[j];
            let b = ir.gain[i] - ir.gain[j];
            let mut candidates = [f64::NAN; 2];
            if a != 0.0 {
                candidates[0] = -ir.delta[j] / a;
                if b != 0.0 {
                    candidates[1] = (b * ir.delta[j] - 2.0 * a * ir.gain[j]) / (a * b);
                }
            }
            for q in candidates {
                if !(q > 0.0 && q < 1.0) {
                    continue;
                }
                let r = mixture_ratio(ir, i, j, q);
                if r < best.ratio {
                    best = Mixture {
                        arms: (i, j),
                        weight: q,
                        ratio: r,
                        fallback: false,
                    };
                }
            }
        }
    }
    best
}

/// Samples an arm from [`optimal_mixture`].
pub fn select_randomized(ir: &IrVectors, rng: &mut dyn RngCore) -> (usize, Mixture) {
    let m = optimal_mixture(ir);
    let arm = match m.support().as_slice() {
        [only] => *only,
        _ => {
            if rng.random::<f64>() < m.weight {
                m.arms.0
            } else {
                m.arms.1
            }
        }
    };
    (arm, m)
}
