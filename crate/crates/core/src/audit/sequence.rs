use serde::{Deserialize, Serialize};

/// Which clock drives the confidence-sequence boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    /// Number of older samples feeding the statistic, `m − n_recent`.
    #[default]
    SampleCount,
    /// The global round number `t`.
    Round,
}

/// Deviation of the older windowed demands from the recent block mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceStat {
    /// `Σ_{older} (d_i − d̄) / (N/2)`.
    pub x: f64,
    /// Samples at the arm inside the window.
    pub m: usize,
    /// Mean of the `n_recent` newest samples.
    pub recent_mean: f64,
}

/// `demands` is in chronological order. Returns `None` when there are no
/// older samples to compare (`m ≤ n_recent`).
pub fn sequence_statistic(demands: &[u32], n_recent: usize, n: u32) -> Option<SequenceStat> {
    let m = demands.len();
    if n_recent == 0 || m <= n_recent {
        return None;
    }
    let split = m - n_recent;
    let recent_mean =
        demands[split..].iter().map(|&d| f64::from(d)).sum::<f64>() / n_recent as f64;
    let half = f64::from(n) / 2.0;
    let x = demands[..split]
        .iter()
        .map(|&d| (f64::from(d) - recent_mean) / half)
        .sum();
    Some(SequenceStat { x, m, recent_mean })
}

/// Half-width `1.7 √((ln ln 2τ + 0.72 ln(10.4/α)) / τ)`; `None` for
/// `τ < 2`.
pub fn confidence_radius(tau: f64, alpha1: f64) -> Option<f64> {
    if !(tau >= 2.0) {
        return None;
    }
    let inner = (2.0 * tau).ln().ln() + 0.72 * (10.4 / alpha1).ln();
    Some(1.7 * (inner / tau).sqrt())
}

/// `(LB, UB)` around `X / (m − n_recent)`, with the boundary evaluated at
/// time `tau`.
pub fn confidence_bounds(
    x: f64,
    m: usize,
    n_recent: usize,
    tau: f64,
    alpha1: f64,
) -> Option<(f64, f64)> {
    if m <= n_recent {
        return None;
    }
    let center = x / (m - n_recent) as f64;
    let r = confidence_radius(tau, alpha1)?;
    Some((center - r, center + r))
}

/// Outcome of one sequence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YellowReport {
    pub round: usize,
    pub arm: usize,
    pub x: f64,
    pub m: usize,
    pub lb: f64,
    pub ub: f64,
    pub yellow: bool,
}

/// Runs the test on the windowed demands at one arm (chronological,
/// including the newest). `None` when there is too little data.
pub fn yellow_test(
    demands: &[u32],
    round: usize,
    arm: usize,
    n: u32,
    n_recent: usize,
    alpha1: f64,
    time: TimeRule,
) -> Option<YellowReport> {
    let stat = sequence_statistic(demands, n_recent, n)?;
    let tau = match time {
        TimeRule::SampleCount => (stat.m - n_recent) as f64,
        TimeRule::Round => round as f64,
    };
    let (lb, ub) = confidence_bounds(stat.x, stat.m, n_recent, tau, alpha1)?;
    Some(YellowReport {
        round,
        arm,
        x: stat.x,
        m: stat.m,
        lb,
        ub,
        yellow: lb > 0.0 || ub < 0.0,
    })
}
