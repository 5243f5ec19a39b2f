use crate::stats::binomial_pmf;

/// Relative slack when comparing outcome probabilities against the
/// observed one.
const PMF_SLACK: f64 = 1e-12;

/// `count` arm indices (0-based, ascending, deduplicated) spread evenly
/// from the cheapest to the dearest price: the `j`-th is
/// `⌊(j−1)(K−1)/(count−1)⌋` for `j = 1..=count`. A single auditor
/// samples the median arm.
pub fn auditor_schedule(k: usize, count: usize) -> Vec<usize> {
    if k == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![(k - 1) / 2];
    }
    let mut arms: Vec<usize> = (0..count).map(|j| j * (k - 1) / (count - 1)).collect();
    arms.dedup();
    arms
}

/// Exact two-sided binomial test: total probability under
/// `Binomial(n, p0)` of outcomes no more likely than `d`.
pub fn binomial_pvalue(d: u32, n: u32, p0: f64) -> f64 {
    let p0 = p0.clamp(0.0, 1.0);
    let observed = binomial_pmf(n, p0, d);
    let cutoff = observed * (1.0 + PMF_SLACK);
    let total: f64 = (0..=n)
        .map(|k| binomial_pmf(n, p0, k))
        .filter(|&pk| pk <= cutoff)
        .sum();
    total.min(1.0)
}

/// One audit draw with the predictive demand fraction it is tested against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSample {
    pub round: usize,
    pub arm: usize,
    pub demand: u32,
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedReport {
    pub pvalues: Vec<f64>,
    /// Bonferroni threshold `α₂ / |samples|`.
    pub threshold: f64,
    pub red: bool,
}

/// Red iff any sample's p-value falls below `α₂ / |samples|`. `None` for
/// an empty audit.
pub fn red_card_check(samples: &[AuditSample], n: u32, alpha2: f64) -> Option<RedReport> {
    if samples.is_empty() {
        return None;
    }
    let threshold = alpha2 / samples.len() as f64;
    let pvalues: Vec<f64> = samples
        .iter()
        .map(|s| binomial_pvalue(s.demand, n, s.p0))
        .collect();
    let red = pvalues.iter().any(|p| *p < threshold);
    Some(RedReport {
        pvalues,
        threshold,
        red,
    })
}
