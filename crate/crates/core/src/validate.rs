//! Self-checks behind `acidp validate`.
//!
//! Each check recomputes a quantity the engine produces by a slower,
//! independent route (full enumeration, direct simulation) on fixed or
//! seeded random fixtures, and reports pass/fail with the worst deviation.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::{binomial_pvalue, repair_monotone, window_variant_update, yellow_test, TimeRule};
use crate::environments::{build_case_environment, Environment};
use crate::harness::{build_harness_policy, run_seeded, PolicySpec};
use crate::ids::{finite_ir, select_deterministic, InfoTarget};
use crate::policies::{Acidp, AcidpConfig, Policy};
use crate::pricing::{Observation, PriceGrid};
use crate::universes::{
    counterfactual_demand, valuation_from_demand, MultiUniverse, Universe, UniverseTag,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} {:<24} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

/// Random multiverse with `l` universes, `k` prices and batch size `n`.
fn random_fixture(rng: &mut dyn RngCore, l: usize, k: usize, n: u32) -> (MultiUniverse, PriceGrid) {
    let mut prices: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
    prices.sort_by(f64::total_cmp);
    for i in 1..k {
        if prices[i] <= prices[i - 1] {
            prices[i] = prices[i - 1] + 0.01;
        }
    }
    let grid = PriceGrid::new(prices, n).expect("valid random grid");
    let universes = (0..l)
        .map(|_| {
            let rows = (0..k)
                .map(|_| (0..=n).map(|_| rng.random_range(0.01..1.0)).collect())
                .collect();
            Universe::from_rows(UniverseTag::Perceived, rows, n, 0.0).expect("valid rows")
        })
        .collect();
    let weights = (0..l).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut mu = MultiUniverse::with_weights(universes, weights).expect("valid weights");
    mu.set_belief_floor(0.0);
    (mu, grid)
}

/// Regret, `I(a*; d)` and `I(θ; d)` per arm by enumerating
/// (universe, outcome) pairs.
fn enumerate_ir(mu: &MultiUniverse, grid: &PriceGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = grid.len();
    let n = grid.batch_size();
    let p = mu.belief();
    let us = mu.universes();
    let profit = |u: &Universe, a: usize| -> f64 {
        (0..=n).map(|d| grid.price(a) * f64::from(d) * u.likelihood(a, d)).sum()
    };
    let best: Vec<usize> = us
        .iter()
        .map(|u| {
            (0..k).fold(0, |b, a| if profit(u, a) > profit(u, b) { a } else { b })
        })
        .collect();
    let r_star: f64 = us.iter().zip(p).zip(&best).map(|((u, w), &b)| w * profit(u, b)).sum();
    let mut delta = Vec::with_capacity(k);
    let mut g_arm = Vec::with_capacity(k);
    let mut g_theta = Vec::with_capacity(k);
    for a in 0..k {
        let expected: f64 = us.iter().zip(p).map(|(u, w)| w * profit(u, a)).sum();
        delta.push(r_star - expected);
        let mut ia = 0.0;
        let mut it = 0.0;
        for d in 0..=n {
            let pd: f64 = us.iter().zip(p).map(|(u, w)| w * u.likelihood(a, d)).sum();
            if pd <= 0.0 {
                continue;
            }
            for star in 0..k {
                let pstar: f64 = (0..us.len()).filter(|&i| best[i] == star).map(|i| p[i]).sum();
                let joint: f64 = (0..us.len())
                    .filter(|&i| best[i] == star)
                    .map(|i| p[i] * us[i].likelihood(a, d))
                    .sum();
                if joint > 0.0 {
                    ia += joint * (joint / (pstar * pd)).ln();
                }
            }
            for (i, u) in us.iter().enumerate() {
                let joint = p[i] * u.likelihood(a, d);
                if joint > 0.0 {
                    it += joint * (joint / (p[i] * pd)).ln();
                }
            }
        }
        g_arm.push(ia);
        g_theta.push(it);
    }
    (delta, g_arm, g_theta)
}

fn worked_fixture() -> CheckResult {
    let grid = PriceGrid::new(vec![1.0, 2.0], 1).expect("grid");
    let u = |a: f64, b: f64| {
        Universe::from_rows(UniverseTag::Perceived, vec![vec![1.0 - a, a], vec![1.0 - b, b]], 1, 0.0)
            .expect("rows")
    };
    let mut mu = MultiUniverse::uniform(vec![u(0.9, 0.2), u(0.1, 0.6)]).expect("mu");
    mu.set_belief_floor(0.0);
    let ir = finite_ir(&mu, &grid, InfoTarget::OptimalArm);
    let arm = select_deterministic(&ir).arm;
    let ok = (ir.delta[0] - 0.55).abs() < 1e-12
        && (ir.delta[1] - 0.25).abs() < 1e-12
        && (ir.gain[0] - 0.3681).abs() < 5e-5
        && (ir.gain[1] - 0.0863).abs() < 5e-5
        && arm == 1;
    check(
        "ids-worked-fixture",
        ok,
        format!(
            "delta=({:.4},{:.4}) g=({:.4},{:.4}) arm={}",
            ir.delta[0],
            ir.delta[1],
            ir.gain[0],
            ir.gain[1],
            arm + 1
        ),
    )
}

fn ir_enumeration() -> (CheckResult, CheckResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut dpi_worst = f64::NEG_INFINITY;
    for _ in 0..300 {
        let l = rng.random_range(1..=4);
        let k = rng.random_range(2..=4);
        let n = rng.random_range(1..=3);
        let (mu, grid) = random_fixture(&mut rng, l, k, n);
        let (delta, ga, gt) = enumerate_ir(&mu, &grid);
        let ir = finite_ir(&mu, &grid, InfoTarget::OptimalArm);
        let th = finite_ir(&mu, &grid, InfoTarget::Universe);
        for a in 0..k {
            worst = worst
                .max((ir.delta[a] - delta[a].max(0.0)).abs())
                .max((ir.gain[a] - ga[a].max(0.0)).abs())
                .max((th.gain[a] - gt[a].max(0.0)).abs());
            dpi_worst = dpi_worst.max(ga[a] - gt[a]);
        }
    }
    (
        check("ids-enumeration", worst <= 1e-12, format!("max |diff| = {worst:.2e}")),
        check(
            "data-processing",
            dpi_worst <= 1e-12,
            format!("max I(a*;d) - I(theta;d) = {dpi_worst:.2e}"),
        ),
    )
}

fn binomial_enumeration() -> CheckResult {
    let mut worst = 0.0f64;
    for n in 1..=30u32 {
        for &p0 in &[0.0f64, 0.03, 0.2, 0.37, 0.5, 0.81, 0.99, 1.0] {
            let pmf: Vec<f64> = (0..=n)
                .map(|k| {
                    let mut c = 1.0;
                    for i in 0..k {
                        c *= f64::from(n - i) / f64::from(i + 1);
                    }
                    c * p0.powi(k as i32) * (1.0 - p0).powi((n - k) as i32)
                })
                .collect();
            for d in 0..=n {
                let obs = pmf[d as usize];
                let oracle: f64 = pmf.iter().filter(|&&q| q <= obs * (1.0 + 1e-7)).sum();
                worst = worst.max((binomial_pvalue(d, n, p0) - oracle.min(1.0)).abs());
            }
        }
    }
    check("binomial-test", worst <= 1e-12, format!("max |diff| = {worst:.2e}"))
}

fn sequence_size() -> CheckResult {
    let n = 10u32;
    let runs = 20;
    let rounds = 2000;
    let mut rates = Vec::with_capacity(runs);
    for r in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + r as u64);
        let mut window: Vec<u32> = Vec::new();
        let mut yellow = 0usize;
        for t in 1..=rounds {
            let d = (0..n).filter(|_| rng.random_bool(0.3)).count() as u32;
            window.push(d);
            if window.len() > 300 {
                window.remove(0);
            }
            if yellow_test(&window, t, 0, n, 5, 0.05, TimeRule::SampleCount).is_some_and(|y| y.yellow) {
                yellow += 1;
            }
        }
        rates.push(yellow as f64 / rounds as f64);
    }
    let mean = rates.iter().sum::<f64>() / runs as f64;
    let max = rates.iter().copied().fold(0.0, f64::max);
    check(
        "sequence-size",
        mean <= 0.10,
        format!("mean per-run yellow rate {mean:.4} (max {max:.4}) over {runs} null runs"),
    )
}

fn posterior_hygiene() -> CheckResult {
    let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).expect("grid");
    let env = build_case_environment(2, 4).expect("env");
    let mut policy = Acidp::new(grid.clone(), AcidpConfig::default()).expect("policy");
    let mut prng = ChaCha8Rng::seed_from_u64(5);
    let mut erng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut rows_ok = true;
    for t in 1..=2000 {
        let run = (|| -> crate::Result<()> {
            let arm = policy.choose(t, &mut prng)?;
            let d = env.sample_batch(t, grid.price(arm), 10, &mut erng)?;
            policy.observe(&Observation::new(t, arm, d))
        })();
        if let Err(e) = run {
            return check("posterior-hygiene", false, format!("round {t}: {e}"));
        }
        let mu = policy.multiverse();
        if !mu.is_empty() {
            worst = worst.max(mu.normalization_error());
            rows_ok &= mu.universes().iter().all(Universe::is_valid);
        }
    }
    check(
        "posterior-hygiene",
        worst <= 1e-9 && rows_ok,
        format!("max |sum p - 1| = {worst:.2e}, rows valid = {rows_ok}"),
    )
}

fn window_and_generator() -> CheckResult {
    let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).expect("grid");
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut ok = true;
    let mut worst_identity = 0.0f64;
    for _ in 0..50 {
        let mut d: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        d.sort_by(|a, b| b.total_cmp(a));
        let pmf = valuation_from_demand(&d, &grid).expect("pmf");
        let back = counterfactual_demand(&pmf, &grid, 0.0, 0.0);
        for (x, y) in back.iter().zip(&d) {
            worst_identity = worst_identity.max((x - y).abs());
        }

        let base = Universe::binomial(UniverseTag::Perceived, &d, 10, 1e-6).expect("universe");
        let mu = MultiUniverse::uniform(vec![base]).expect("mu");
        let window: Vec<Observation> = (1..=60)
            .map(|t| Observation::new(t, rng.random_range(0..20), rng.random_range(0..=10)))
            .collect();
        let latest = *window.last().expect("window");
        let fit = window_variant_update(&mu, &window, latest, &grid, 1e-6).expect("fit");
        ok &= fit.universe.is_valid();
        ok &= fit.demand.windows(2).all(|w| w[1] <= w[0]);
        let mut raw: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..1.0)).collect();
        repair_monotone(&mut raw, rng.random_bool(0.5));
        ok &= raw.windows(2).all(|w| w[1] <= w[0]);
    }
    check(
        "window-and-generator",
        ok && worst_identity <= 1e-6,
        format!("monotone pmf rows = {ok}, identity shift error {worst_identity:.2e}"),
    )
}

fn determinism() -> CheckResult {
    let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).expect("grid");
    let env: Arc<dyn Environment> = Arc::new(build_case_environment(3, 8).expect("env"));
    let mut mismatched = Vec::new();
    for key in ["acidp", "acidp-noaudit", "eg", "ucb", "ucb-tuned", "ucbpi", "ts"] {
        let spec = PolicySpec::new(key);
        let run = || -> crate::Result<_> {
            let mut p = build_harness_policy(&spec, &grid, &env)?;
            Ok(run_seeded(p.as_mut(), env.as_ref(), &grid, 300, 17)?.trace)
        };
        match (run(), run()) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => mismatched.push(key),
        }
    }
    check(
        "determinism",
        mismatched.is_empty(),
        if mismatched.is_empty() {
            "7 policies replay identically".into()
        } else {
            format!("differs: {}", mismatched.join(", "))
        },
    )
}

/// Runs every check.
pub fn run_all() -> Vec<CheckResult> {
    let (ir, dpi) = ir_enumeration();
    vec![
        worked_fixture(),
        ir,
        dpi,
        binomial_enumeration(),
        sequence_size(),
        posterior_hygiene(),
        window_and_generator(),
        determinism(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_checks_pass() {
        for r in [worked_fixture(), binomial_enumeration(), window_and_generator()] {
            assert!(r.passed, "{r}");
        }
        let (ir, dpi) = ir_enumeration();
        assert!(ir.passed, "{ir}");
        assert!(dpi.passed, "{dpi}");
    }
}
