//! Brute-force oracles shared by the integration suites. Nothing here calls
//! the engine's own algorithms; universes are only read cell by cell.

#![allow(dead_code)]

use acidp::universes::{MultiUniverse, Universe, UniverseTag};
use acidp::PriceGrid;
use rand::{Rng, RngCore};

/// Random multiverse with `l` universes over `k` ascending prices and batch
/// size `n`. Rows and beliefs are unnormalised draws; the engine normalises.
pub fn random_fixture(rng: &mut dyn RngCore, l: usize, k: usize, n: u32) -> (MultiUniverse, PriceGrid) {
    let mut prices: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
    prices.sort_by(f64::total_cmp);
    for i in 1..k {
        if prices[i] <= prices[i - 1] {
            prices[i] = prices[i - 1] + 0.01;
        }
    }
    let grid = PriceGrid::new(prices, n).unwrap();
    let universes = (0..l)
        .map(|_| {
            let rows = (0..k)
                .map(|_| (0..=n).map(|_| rng.random_range(0.01..1.0)).collect())
                .collect();
            Universe::from_rows(UniverseTag::Perceived, rows, n, 0.0).unwrap()
        })
        .collect();
    let weights = (0..l).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut mu = MultiUniverse::with_weights(universes, weights).unwrap();
    mu.set_belief_floor(0.0);
    (mu, grid)
}

/// Everything the information ratio needs, by enumeration over
/// (universe, outcome) pairs.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub delta: Vec<f64>,
    /// `I(a*; d)` per arm.
    pub gain_arm: Vec<f64>,
    /// `I(θ; d)` per arm.
    pub gain_theta: Vec<f64>,
    pub optimal_prob: Vec<f64>,
    pub r_star: f64,
}

fn profit(u: &Universe, grid: &PriceGrid, a: usize) -> f64 {
    (0..=grid.batch_size())
        .map(|d| grid.price(a) * f64::from(d) * u.likelihood(a, d))
        .sum()
}

pub fn enumerate_ir(mu: &MultiUniverse, grid: &PriceGrid) -> Enumerated {
    let k = grid.len();
    let n = grid.batch_size();
    let p = mu.belief();
    let us = mu.universes();
    let best: Vec<usize> = us
        .iter()
        .map(|u| (0..k).fold(0, |b, a| if profit(u, grid, a) > profit(u, grid, b) { a } else { b }))
        .collect();
    let mut optimal_prob = vec![0.0; k];
    for (i, &b) in best.iter().enumerate() {
        optimal_prob[b] += p[i];
    }
    let r_star: f64 = (0..us.len()).map(|i| p[i] * profit(&us[i], grid, best[i])).sum();

    let mut out = Enumerated {
        delta: Vec::new(),
        gain_arm: Vec::new(),
        gain_theta: Vec::new(),
        optimal_prob,
        r_star,
    };
    for a in 0..k {
        let expected: f64 = (0..us.len()).map(|i| p[i] * profit(&us[i], grid, a)).sum();
        out.delta.push(r_star - expected);
        let (mut ia, mut it) = (0.0, 0.0);
        for d in 0..=n {
            let pd: f64 = (0..us.len()).map(|i| p[i] * us[i].likelihood(a, d)).sum();
            for star in 0..k {
                let pstar = out.optimal_prob[star];
                let joint: f64 = (0..us.len())
                    .filter(|&i| best[i] == star)
                    .map(|i| p[i] * us[i].likelihood(a, d))
                    .sum();
                if joint > 0.0 {
                    ia += joint * (joint / (pstar * pd)).ln();
                }
            }
            for i in 0..us.len() {
                let joint = p[i] * us[i].likelihood(a, d);
                if joint > 0.0 {
                    it += joint * (joint / (p[i] * pd)).ln();
                }
            }
        }
        out.gain_arm.push(ia);
        out.gain_theta.push(it);
    }
    out
}

/// `C(n, k) p^k (1-p)^(n-k)` by running products.
pub fn pmf_product(n: u32, p: f64, k: u32) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= f64::from(n - i) / f64::from(i + 1);
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Two-sided exact p-value by listing all `n + 1` outcomes.
pub fn pvalue_enumerated(d: u32, n: u32, p0: f64) -> f64 {
    let pmf: Vec<f64> = (0..=n).map(|k| pmf_product(n, p0, k)).collect();
    let observed = pmf[d as usize];
    pmf.iter()
        .filter(|&&q| q <= observed * (1.0 + 1e-12))
        .sum::<f64>()
        .min(1.0)
}

/// Draws from `Binomial(n, p)` by summing Bernoulli trials.
pub fn binomial_draw(rng: &mut dyn RngCore, n: u32, p: f64) -> u32 {
    (0..n).filter(|_| rng.random_bool(p)).count() as u32
}

/// Windowed sequence test on one stream of counts, replayed round by round:
/// returns the rounds (1-based) at which a yellow card would be raised.
pub fn yellow_rounds(stream: &[u32], n: u32, window: usize, n_recent: usize, alpha1: f64) -> Vec<usize> {
    let half = f64::from(n) / 2.0;
    let mut hits = Vec::new();
    for t in 1..=stream.len() {
        let lo = t.saturating_sub(window);
        let w = &stream[lo..t];
        let m = w.len();
        if m <= n_recent {
            continue;
        }
        let split = m - n_recent;
        let recent = w[split..].iter().map(|&d| f64::from(d)).sum::<f64>() / n_recent as f64;
        let x: f64 = w[..split].iter().map(|&d| (f64::from(d) - recent) / half).sum();
        let tau = split as f64;
        if tau < 2.0 {
            continue;
        }
        let radius = 1.7 * (((2.0 * tau).ln().ln() + 0.72 * (10.4 / alpha1).ln()) / tau).sqrt();
        let center = x / tau;
        if center - radius > 0.0 || center + radius < 0.0 {
            hits.push(t);
        }
    }
    hits
}

/// Mode of `values`; ties go to the smaller value.
pub fn mode(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut best, mut best_n) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best_n {
            best = sorted[i];
            best_n = j;
        }
        i += j;
    }
    best
}
