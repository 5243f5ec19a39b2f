use crate::error::Result;
use crate::pricing::{Observation, PriceGrid};
use crate::universes::{MultiUniverse, Universe, UniverseTag};

/// Forces a demand curve (ascending prices) to be non-increasing.
///
/// After an upward surprise, each price takes the larger of its own value
/// and its dearer neighbour's, sweeping from the top of the grid down, so
/// high estimates pull cheaper prices up. Otherwise each price takes the
/// smaller of its own value and its cheaper neighbour's, sweeping upward.
pub fn repair_monotone(d: &mut [f64], upward: bool) {
    let k = d.len();
    if k < 2 {
        return;
    }
    if upward {
        for i in (0..k - 1).rev() {
            d[i] = d[i].max(d[i + 1]);
        }
    } else {
        for i in 1..k {
            d[i] = d[i].min(d[i - 1]);
        }
    }
}

/// Result of a window refit.
#[derive(Debug, Clone)]
pub struct WindowFit {
    pub universe: Universe,
    /// Repaired demand fractions.
    pub demand: Vec<f64>,
    pub upward: bool,
}

/// Refits the window universe: mixture likelihood rows, overwritten by the
/// windowed empirical pmf at every arm seen in `window`, reduced to demand
/// fractions, made monotone, and turned back into Binomial rows.
pub fn window_variant_update(
    mu: &MultiUniverse,
    window: &[Observation],
    latest: Observation,
    grid: &PriceGrid,
    floor: f64,
) -> Result<WindowFit> {
    let k = grid.len();
    let n = grid.batch_size();
    let width = n as usize + 1;

    let mut rows: Vec<Vec<f64>> = (0..k).map(|a| mu.mixture_row(a)).collect();
    let predictive_count: f64 = rows[latest.arm]
        .iter()
        .enumerate()
        .map(|(d, p)| d as f64 * p)
        .sum();

    let mut counts = vec![vec![0.0; width]; k];
    let mut seen = vec![0usize; k];
    for o in window {
        counts[o.arm][o.demand as usize] += 1.0;
        seen[o.arm] += 1;
    }
    for a in 0..k {
        if seen[a] > 0 {
            let total = seen[a] as f64;
            rows[a] = counts[a].iter().map(|c| c / total).collect();
        }
    }

    let nf = f64::from(n);
    let mut demand: Vec<f64> = rows
        .iter()
        .map(|row| {
            let s: f64 = row.iter().enumerate().map(|(d, p)| d as f64 * p).sum();
            (s / row.iter().sum::<f64>() / nf).clamp(0.0, 1.0)
        })
        .collect();
    let upward = f64::from(latest.demand) > predictive_count;
    repair_monotone(&mut demand, upward);
    let universe = Universe::binomial(UniverseTag::Window, &demand, n, floor)?;
    Ok(WindowFit {
        universe,
        demand,
        upward,
    })
}
