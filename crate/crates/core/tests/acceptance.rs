//! Acceptance suite: one PASS/FAIL line per criterion and a closing tally.
//! The process exits 0 so a workspace test run still reaches the suites
//! after this one; set `ACIDP_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.
//! Pass criterion numbers as arguments to run a subset
//! (`cargo test --test acceptance -- 6 8`).

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use acidp::audit::{binomial_pvalue, repair_monotone, window_variant_update, AuditConfig, AuditState};
use acidp::environments::{oracle_profit, Environment};
use acidp::harness::{
    build_harness_policy, derive_seed, oracle_series, run_trial, seeded_rng, simulate, trial_seed, EnvironmentSpec,
    ExperimentConfig, PolicyRuns, PolicySpec,
};
use acidp::ids::{finite_ir, select_deterministic, InfoTarget};
use acidp::policies::{Acidp, AcidpConfig, Policy, POLICY_KEYS};
use acidp::universes::{
    generate, GeneratorConfig, LikelihoodMode, MultiUniverse, NoiseRule, Universe, UniverseTag,
};
use acidp::{Observation, PriceGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{binomial_draw, enumerate_ir, mode, pvalue_enumerated, random_fixture, yellow_rounds};

const TRIALS: usize = 10;
const HORIZON: usize = 2000;

const C1_OCCUPANCY: f64 = 0.70;
const C1_MAX_REGRET: f64 = 600.0;
const C2_RATIO: f64 = 0.5;
const C3_FACTOR: f64 = 2.0;
const C4_FACTOR: f64 = 1.5;
const C5_MODAL_SEEDS: usize = 7;
const C5_RATIO: f64 = 0.5;
const C6_FIXTURES: usize = 1000;
const C6_TOL: f64 = 1e-12;
const C7_TOL: f64 = 1e-9;
const C8_TOL: f64 = 1e-12;
const C9_RUNS: usize = 100;
const C9_ROUNDS: usize = 2000;
const C9_MAX_RATE: f64 = 0.10;
const C9_DETECT_WITHIN: usize = 30;
const C9_POWER: f64 = 0.90;
const C10_TOL: f64 = 1e-12;
const C11_TOL: f64 = 1e-6;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn spec(key: &str, params: &str) -> PolicySpec {
    let mut p = PolicySpec::new(key);
    p.params = toml::from_str(params).unwrap();
    p
}

fn labelled(key: &str, label: &str, params: &str) -> PolicySpec {
    let mut p = spec(key, params);
    p.label = Some(label.into());
    p
}

fn experiment(env: EnvironmentSpec, policies: Vec<PolicySpec>, horizon: usize) -> (ExperimentConfig, Vec<PolicyRuns>) {
    let mut cfg = ExperimentConfig::new(env, policies);
    cfg.trials = TRIALS;
    cfg.horizon = horizon;
    cfg.base_seed = 0;
    let runs = simulate(&cfg).unwrap();
    (cfg, runs)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_regret(run: &PolicyRuns) -> f64 {
    mean(&run.final_regrets())
}

fn find<'a>(runs: &'a [PolicyRuns], label: &str) -> &'a PolicyRuns {
    runs.iter().find(|r| r.label == label).unwrap()
}

fn case_means(case: u32, policies: Vec<PolicySpec>) -> Vec<(String, f64)> {
    let (_, runs) = experiment(EnvironmentSpec::case(case), policies, HORIZON);
    runs.iter().map(|r| (r.label.clone(), mean_regret(r))).collect()
}

fn lookup(means: &[(String, f64)], label: &str) -> f64 {
    means.iter().find(|(l, _)| l == label).unwrap().1
}

fn criterion_1() -> Outcome {
    let labels = ["acidp", "ts", "ucb-tuned"];
    let (cfg, runs) = experiment(
        EnvironmentSpec::case(1),
        labels.iter().map(|k| spec(k, "")).collect(),
        HORIZON,
    );
    let grid = cfg.grid().unwrap();
    let envs: Vec<Arc<dyn Environment>> = (0..TRIALS)
        .map(|i| cfg.environment.build(derive_seed(trial_seed(cfg.base_seed, i), "population")).unwrap())
        .collect();
    let mut passed = true;
    let mut parts = Vec::new();
    for label in labels {
        let run = find(&runs, label);
        let occupancy: Vec<f64> = run
            .trials
            .iter()
            .zip(&envs)
            .map(|(tr, env)| {
                let rows = &tr.trace.rows()[1499..HORIZON];
                let mut best: Option<(usize, usize)> = None;
                let mut hits = 0;
                for r in rows {
                    let arm = match best {
                        Some((s, a)) if env.same_market(s, r.t) => a,
                        _ => oracle_profit(env.as_ref(), r.t, &grid).unwrap().0,
                    };
                    best = Some((r.t, arm));
                    hits += usize::from(arm == r.arm);
                }
                hits as f64 / rows.len() as f64
            })
            .collect();
        let occ = mean(&occupancy);
        let reg = mean_regret(run);
        passed &= occ >= C1_OCCUPANCY && reg < C1_MAX_REGRET;
        parts.push(format!("{label} occupancy {occ:.3} regret {reg:.1}"));
    }
    outcome(
        passed,
        format!("{} (need occupancy >= {C1_OCCUPANCY}, regret < {C1_MAX_REGRET})", parts.join("; ")),
    )
}

fn criterion_2() -> Outcome {
    let m = case_means(2, vec![spec("acidp", ""), spec("ucb", "c = 1.0")]);
    let (a, u) = (lookup(&m, "acidp"), lookup(&m, "ucb"));
    outcome(
        a < C2_RATIO * u,
        format!("case 2 acidp {a:.1} vs ucb(c=1) {u:.1}, ratio {:.3} (need < {C2_RATIO})", a / u),
    )
}

fn criterion_3() -> Outcome {
    let policies = || vec![spec("acidp", ""), spec("ucb", "c = 1.0"), spec("ts", "")];
    let m2 = case_means(2, policies());
    let m3 = case_means(3, policies());
    let mut passed = true;
    let mut parts = Vec::new();
    for (case, m) in [(2, &m2), (3, &m3)] {
        let (a, u, t) = (lookup(m, "acidp"), lookup(m, "ucb"), lookup(m, "ts"));
        passed &= u >= C3_FACTOR * a && t >= C3_FACTOR * a;
        parts.push(format!("case {case}: acidp {a:.1} ucb {u:.1} ts {t:.1}"));
    }
    let (t2, t3) = (lookup(&m2, "ts"), lookup(&m3, "ts"));
    passed &= t3 > t2;
    outcome(
        passed,
        format!(
            "{}; ts case 3 > case 2: {} (need baselines >= {C3_FACTOR}x acidp)",
            parts.join("; "),
            t3 > t2
        ),
    )
}

fn criterion_4() -> Outcome {
    let m = case_means(
        6,
        vec![spec("acidp", "n_init = 2"), spec("acidp-noaudit", "n_init = 2")],
    );
    let (a, na) = (lookup(&m, "acidp"), lookup(&m, "acidp-noaudit"));
    outcome(
        na >= C4_FACTOR * a,
        format!("case 6 acidp(L=2,n=2) {a:.1} vs no audit {na:.1}, ratio {:.2} (need >= {C4_FACTOR})", na / a),
    )
}

/// Profit-maximising price of every product, straight from the CSV.
fn table_optima() -> Vec<(String, f64)> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/criteo_demand.csv");
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().unwrap().split(',').map(|s| s.trim().to_string()).collect();
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|s| s.trim().parse().unwrap()).collect())
        .collect();
    (1..header.len())
        .map(|c| {
            let best = rows
                .iter()
                .fold(&rows[0], |b, r| if r[0] * r[c] > b[0] * b[c] { r } else { b });
            (header[c].clone(), best[0])
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let optima = table_optima();
    let opt = |name: &str| optima.iter().find(|(p, _)| p == name).unwrap().1;
    let regimes = [(2000, opt("product_b")), (4000, opt("product_c")), (6000, opt("product_a"))];
    let exact = regimes.iter().map(|r| r.1).collect::<Vec<_>>() == [150.0, 280.0, 70.0];

    let (_, runs) = experiment(
        EnvironmentSpec::table(None),
        vec![spec("acidp", ""), spec("ts", "")],
        6000,
    );
    let acidp = find(&runs, "acidp");
    let mut hits = [0usize; 3];
    for tr in &acidp.trials {
        for (j, &(end, best)) in regimes.iter().enumerate() {
            let prices: Vec<f64> = tr.trace.rows()[end - 500..end].iter().map(|r| r.price).collect();
            if mode(&prices) == best {
                hits[j] += 1;
            }
        }
    }
    let (a, t) = (mean_regret(acidp), mean_regret(find(&runs, "ts")));
    let passed = exact && hits.iter().all(|&h| h >= C5_MODAL_SEEDS) && a < C5_RATIO * t;
    outcome(
        passed,
        format!(
            "optima B/C/A = {}/{}/{} exact: {exact}; modal hits {}/{}/{} of {TRIALS} (need >= {C5_MODAL_SEEDS}); \
             acidp {a:.4e} vs ts {t:.4e}, ratio {:.3} (need < {C5_RATIO})",
            regimes[0].1,
            regimes[1].1,
            regimes[2].1,
            hits[0],
            hits[1],
            hits[2],
            a / t
        ),
    )
}

fn worked_fixture() -> (bool, String) {
    let grid = PriceGrid::new(vec![1.0, 2.0], 1).unwrap();
    let u = |a: f64, b: f64| {
        Universe::from_rows(UniverseTag::Perceived, vec![vec![1.0 - a, a], vec![1.0 - b, b]], 1, 0.0).unwrap()
    };
    let mut mu = MultiUniverse::uniform(vec![u(0.9, 0.2), u(0.1, 0.6)]).unwrap();
    mu.set_belief_floor(0.0);
    let ir = finite_ir(&mu, &grid, InfoTarget::OptimalArm);
    let arm = select_deterministic(&ir).arm;
    let ok = (ir.delta[0] - 0.55).abs() < C6_TOL
        && (ir.delta[1] - 0.25).abs() < C6_TOL
        && (ir.gain[0] - 0.3681).abs() < 5e-5
        && (ir.gain[1] - 0.0863).abs() < 5e-5
        && arm == 1;
    (
        ok,
        format!(
            "worked fixture delta=({:.4},{:.4}) g=({:.4},{:.4}) arm {}",
            ir.delta[0],
            ir.delta[1],
            ir.gain[0],
            ir.gain[1],
            arm + 1
        ),
    )
}

fn random_fixtures() -> Vec<(MultiUniverse, PriceGrid)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..C6_FIXTURES)
        .map(|_| {
            let l = rng.random_range(1..=4);
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=3);
            random_fixture(&mut rng, l, k, n)
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let mut worst = 0.0f64;
    for (mu, grid) in random_fixtures() {
        let o = enumerate_ir(&mu, &grid);
        let ir = finite_ir(&mu, &grid, InfoTarget::OptimalArm);
        worst = worst.max((ir.r_star - o.r_star).abs());
        for a in 0..grid.len() {
            worst = worst
                .max((ir.delta[a] - o.delta[a]).abs())
                .max((ir.gain[a] - o.gain_arm[a].max(0.0)).abs())
                .max((ir.optimal_prob[a] - o.optimal_prob[a]).abs());
        }
    }
    let (fixture_ok, fixture) = worked_fixture();
    outcome(
        worst <= C6_TOL && fixture_ok,
        format!("{C6_FIXTURES} fixtures max |diff| {worst:.2e} (need <= {C6_TOL:.0e}); {fixture}"),
    )
}

fn criterion_7() -> Outcome {
    let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
    let env = EnvironmentSpec::case(2).build(11).unwrap();
    let mut policy = Acidp::new(grid.clone(), AcidpConfig::default()).unwrap();
    let mut prng = ChaCha8Rng::seed_from_u64(5);
    let mut erng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut rows_ok = true;
    let mut checks = 0usize;
    let mut inspect = |p: &Acidp| {
        let mu = p.multiverse();
        if !mu.is_empty() {
            worst = worst.max((mu.belief().iter().sum::<f64>() - 1.0).abs());
            rows_ok &= mu.universes().iter().all(|u| {
                (0..u.arms()).all(|a| {
                    let row = u.row(a);
                    row.iter().all(|&q| (0.0..=1.0).contains(&q))
                        && (row.iter().sum::<f64>() - 1.0).abs() <= C7_TOL
                })
            });
            checks += 1;
        }
    };
    let (mut yellows, mut reds) = (0, 0);
    for t in 1..=HORIZON {
        let arm = policy.choose(t, &mut prng).unwrap();
        inspect(&policy);
        let d = env.sample_batch(t, grid.price(arm), 10, &mut erng).unwrap();
        policy.observe(&Observation::new(t, arm, d)).unwrap();
        inspect(&policy);
        (yellows, reds) = policy.card_counts();
    }
    outcome(
        worst <= C7_TOL && rows_ok,
        format!(
            "{checks} checkpoints, max |sum p - 1| {worst:.2e} (need <= {C7_TOL:.0e}), rows are pmfs: {rows_ok}; \
             {yellows} yellow / {reds} red cards exercised"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=40u32 {
        for &p0 in &[0.0, 0.001, 0.05, 0.2, 0.3, 0.37, 0.5, 0.64, 0.81, 0.99, 1.0] {
            for d in 0..=n {
                worst = worst.max((binomial_pvalue(d, n, p0) - pvalue_enumerated(d, n, p0)).abs());
                cases += 1;
            }
        }
    }
    outcome(
        worst <= C8_TOL,
        format!("{cases} (d, N, p0) cases, max |diff| {worst:.2e} (need <= {C8_TOL:.0e})"),
    )
}

/// Feeds `stream` to a fresh auditor at one arm; returns the yellow rounds.
fn engine_yellows(stream: &[u32], n: u32) -> Vec<usize> {
    let mut audit = AuditState::new(AuditConfig::default()).unwrap();
    let mut out = Vec::new();
    for (i, &d) in stream.iter().enumerate() {
        let obs = Observation::new(i + 1, 0, d);
        audit.push(obs);
        if audit.yellow_check(&obs, n).is_some_and(|r| r.yellow) {
            out.push(i + 1);
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let n = 10;
    let cfg = AuditConfig::default();
    let mut rates = Vec::with_capacity(C9_RUNS);
    let mut agree = true;
    let mut detected = 0;
    for run in 0..C9_RUNS {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + run as u64);
        let null: Vec<u32> = (0..C9_ROUNDS).map(|_| binomial_draw(&mut rng, n, 0.3)).collect();
        let hits = engine_yellows(&null, n);
        agree &= hits == yellow_rounds(&null, n, cfg.window, cfg.n_recent, cfg.alpha1);
        rates.push(hits.len() as f64 / C9_ROUNDS as f64);

        let jump = cfg.window;
        let stream: Vec<u32> = (0..jump + C9_DETECT_WITHIN)
            .map(|t| binomial_draw(&mut rng, n, if t < jump { 0.3 } else { 0.8 }))
            .collect();
        if engine_yellows(&stream, n).iter().any(|&t| t > jump) {
            detected += 1;
        }
    }
    let max_rate = rates.iter().copied().fold(0.0, f64::max);
    let over = rates.iter().filter(|&&r| r > C9_MAX_RATE).count();
    let power = detected as f64 / C9_RUNS as f64;
    outcome(
        over == 0 && power >= C9_POWER && agree,
        format!(
            "null Binomial(10,0.3): max per-run rate {max_rate:.4}, mean {:.4}, runs over {C9_MAX_RATE}: {over}/{C9_RUNS}; \
             power 0.3->0.8 within {C9_DETECT_WITHIN} rounds {power:.2} (need >= {C9_POWER}); matches oracle: {agree}",
            mean(&rates)
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut oracle_worst = f64::NEG_INFINITY;
    for (mu, grid) in random_fixtures() {
        let arm = finite_ir(&mu, &grid, InfoTarget::OptimalArm);
        let theta = finite_ir(&mu, &grid, InfoTarget::Universe);
        let o = enumerate_ir(&mu, &grid);
        for a in 0..grid.len() {
            worst = worst.max(arm.gain[a] - theta.gain[a]);
            oracle_worst = oracle_worst.max(o.gain_arm[a] - o.gain_theta[a]);
        }
    }
    outcome(
        worst <= C10_TOL && oracle_worst <= C10_TOL,
        format!(
            "max I(a*;d) - I(theta;d): engine {worst:.2e}, enumeration {oracle_worst:.2e} (need <= {C10_TOL:.0e})"
        ),
    )
}

fn criterion_11() -> Outcome {
    let grid = PriceGrid::evenly_spaced(0.01, 1.0, 20, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut rows_ok = true;
    let mut monotone = true;
    let mut worst_identity = 0.0f64;
    let identity = GeneratorConfig {
        shifts: Some(vec![0.0]),
        noise: NoiseRule::Fixed(0.0),
        mode: LikelihoodMode::Exact,
        floor: 0.0,
        ..GeneratorConfig::default()
    };
    for _ in 0..200 {
        let mut d: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        d.sort_by(|a, b| b.total_cmp(a));

        let source = Universe::binomial(UniverseTag::Perceived, &d, grid.batch_size(), 0.0).unwrap();
        let mu = MultiUniverse::uniform(vec![source]).unwrap();
        let out = generate(&mu, &grid, &identity, &mut rng).unwrap();
        for (a, want) in d.iter().enumerate() {
            let got = out[0].mean_demand(a) / f64::from(grid.batch_size());
            worst_identity = worst_identity.max((got - want).abs());
        }

        let window: Vec<Observation> = (1..=80)
            .map(|t| Observation::new(t, rng.random_range(0..grid.len()), rng.random_range(0..=10)))
            .collect();
        let latest = *window.last().unwrap();
        let fit = window_variant_update(&mu, &window, latest, &grid, 1e-6).unwrap();
        rows_ok &= (0..grid.len()).all(|a| {
            let row = fit.universe.row(a);
            row.iter().all(|&q| (0.0..=1.0).contains(&q)) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        });
        monotone &= fit.demand.windows(2).all(|w| w[1] <= w[0]);

        let mut raw: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        repair_monotone(&mut raw, rng.random_bool(0.5));
        monotone &= raw.windows(2).all(|w| w[1] <= w[0]);
    }
    outcome(
        rows_ok && monotone && worst_identity <= C11_TOL,
        format!(
            "window rows pmfs: {rows_ok}; repaired demand non-increasing: {monotone}; \
             identity generator max error {worst_identity:.2e} (need <= {C11_TOL:.0e})"
        ),
    )
}

fn criterion_12() -> Outcome {
    let mut envs: Vec<EnvironmentSpec> = (1..=6).map(EnvironmentSpec::case).collect();
    envs.push(EnvironmentSpec::table(None));
    let mut keys: Vec<PolicySpec> = POLICY_KEYS.iter().map(|k| spec(k, "")).collect();
    keys.push(spec("acidp", "selector = \"randomized\""));
    keys.push(labelled("clairvoyant", "clairvoyant", ""));
    keys.push(spec("fixed", "arm = 1"));
    let mut pairs = 0;
    let mut differing = Vec::new();
    for (e, env_spec) in envs.iter().enumerate() {
        let grid = env_spec.default_grid().unwrap();
        // long enough to leave the opening sweep of the 50-price table
        let horizon = if grid.batch_size() > 10 { 130 } else { 400 };
        for seed in [3 + e as u64] {
            let env = env_spec.build(seed).unwrap();
            let oracle = oracle_series(env.as_ref(), &grid, horizon).unwrap();
            for p in &keys {
                let replay = || {
                    let mut policy: Box<dyn Policy> = build_harness_policy(p, &grid, &env).unwrap();
                    let mut prng = seeded_rng(seed, p.label());
                    let mut erng = seeded_rng(seed, "environment");
                    run_trial(policy.as_mut(), env.as_ref(), &grid, horizon, &mut prng, &mut erng, Some(&oracle))
                        .unwrap()
                };
                let (a, b) = (replay(), replay());
                let same_bits = a.trace.rows().iter().zip(b.trace.rows()).all(|(x, y)| {
                    x.arm == y.arm
                        && x.demand == y.demand
                        && x.profit.to_bits() == y.profit.to_bits()
                        && x.cum_regret.to_bits() == y.cum_regret.to_bits()
                        && x.alert == y.alert
                });
                if !(same_bits && a.trace.len() == b.trace.len() && a.audit_log == b.audit_log) {
                    differing.push(format!("{} on {} seed {seed}", p.label(), env_spec.describe()));
                }
                pairs += 1;
            }
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{pairs} (policy, env, seed) pairs replay bit for bit")
        } else {
            format!("differs: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "case 1 convergence", criterion_1),
        (2, "case 2 vs ucb", criterion_2),
        (3, "case 2/3 asymmetry", criterion_3),
        (4, "case 6 audit ablation", criterion_4),
        (5, "demand-table scenario", criterion_5),
        (6, "finite IR oracle", criterion_6),
        (7, "posterior hygiene", criterion_7),
        (8, "exact binomial test", criterion_8),
        (9, "confidence sequence", criterion_9),
        (10, "data processing", criterion_10),
        (11, "window and generator", criterion_11),
        (12, "determinism", criterion_12),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = std::time::Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        ran += 1;
        if !result.passed {
            failed.push(id.to_string());
        }
        println!(
            "{} criterion {id:>2} {name}: {} [{:.1}s]",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed.is_empty() {
        println!("acceptance: all {ran} criteria met");
        return;
    }
    println!(
        "acceptance: {} of {ran} criteria met; FAILED: {}",
        ran - failed.len(),
        failed.join(", ")
    );
    if std::env::var_os("ACIDP_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
