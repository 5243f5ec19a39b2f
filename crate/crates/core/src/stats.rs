//! Small numerical helpers shared across modules.

/// `ln C(n, k)`. Symmetric in `k ↔ n−k` bit-for-bit.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    libm::lgamma(f64::from(n) + 1.0) - libm::lgamma(f64::from(k) + 1.0) - libm::lgamma(f64::from(n - k) + 1.0)
}

/// Binomial(n, p) probability mass at `k`.
pub fn binomial_pmf(n: u32, p: f64, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let kf = f64::from(k);
    let rest = f64::from(n - k);
    (ln_choose(n, k) + kf * p.ln() + rest * (-p).ln_1p()).exp()
}

/// Full Binomial(n, p) pmf over `0..=n`.
pub fn binomial_row(n: u32, p: f64) -> Vec<f64> {
    (0..=n).map(|k| binomial_pmf(n, p, k)).collect()
}

/// Standard normal upper tail `P(Z ≥ x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `P(v + e ≥ threshold)` for `e ~ Normal(0, std)`; a step function when
/// `std == 0`.
pub fn exceed_prob(v: f64, threshold: f64, std: f64) -> f64 {
    if std > 0.0 {
        normal_sf((threshold - v) / std)
    } else if v >= threshold {
        1.0
    } else {
        0.0
    }
}

/// Normalises `v` to a probability vector whose entries are all at least
/// `floor`, moving as little mass as possible: entries that would fall
/// under the floor are pinned to it and the rest are rescaled
/// proportionally.
///
/// Requires `floor * v.len() <= 1`. A vector with no positive mass becomes
/// uniform.
pub fn normalize_with_floor(v: &mut [f64], floor: f64) {
    let len = v.len();
    if len == 0 {
        return;
    }
    debug_assert!(floor >= 0.0 && floor * len as f64 <= 1.0 + 1e-12);
    for x in v.iter_mut() {
        if !x.is_finite() || *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        v.fill(1.0 / len as f64);
        return;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
    if floor <= 0.0 {
        return;
    }
    let mut pinned = vec![false; len];
    loop {
        let n_pinned = pinned.iter().filter(|p| **p).count();
        let free_mass: f64 = v
            .iter()
            .zip(&pinned)
            .filter(|(_, p)| !**p)
            .map(|(x, _)| *x)
            .sum();
        let budget = 1.0 - floor * n_pinned as f64;
        let scale = if free_mass > 0.0 { budget / free_mass } else { 0.0 };
        let mut changed = false;
        for i in 0..len {
            if !pinned[i] && v[i] * scale < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            for i in 0..len {
                v[i] = if pinned[i] { floor } else { v[i] * scale };
            }
            return;
        }
    }
}

/// Least-squares non-increasing fit (pool-adjacent-violators), clamped to
/// `[0, 1]`.
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, c1) = blocks[blocks.len() - 2];
            let (s2, c2) = blocks[blocks.len() - 1];
            if s1 / c1 as f64 >= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s1 + s2, c1 + c2);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, c) in blocks {
        let mean = (s / c as f64).clamp(0.0, 1.0);
        out.extend(std::iter::repeat_n(mean, c));
    }
    out
}

/// Sample mean and sample standard deviation (`n − 1` denominator; 0 for a
/// single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Total-variation distance between two pmfs on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_rows_sum_to_one() {
        for &(n, p) in &[(10u32, 0.3), (500, 0.737), (1, 0.5), (30, 0.99)] {
            let s: f64 = binomial_row(n, p).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} p={p} sum={s}");
        }
        assert_eq!(binomial_pmf(10, 0.0, 0), 1.0);
        assert_eq!(binomial_pmf(10, 1.0, 10), 1.0);
        assert!((binomial_pmf(10, 0.5, 10) - 1.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn floor_is_exact() {
        let mut v = vec![0.0, 0.0, 1.0, 0.0];
        normalize_with_floor(&mut v, 1e-6);
        assert!(v.iter().all(|x| *x >= 1e-6));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((v[2] - (1.0 - 3e-6)).abs() < 1e-15);

        let mut w = vec![0.2, 0.8];
        normalize_with_floor(&mut w, 0.0);
        assert_eq!(w, vec![0.2, 0.8]);
    }

    #[test]
    fn floor_cascades() {
        // rescaling after the first pin pushes a second entry below the floor
        let mut v = vec![0.0, 0.0999, 0.9001];
        normalize_with_floor(&mut v, 0.1);
        assert!(v.iter().all(|x| *x >= 0.1 - 1e-15));
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_nonincreasing(&[0.3, 0.5]), vec![0.4, 0.4]);
        assert_eq!(isotonic_nonincreasing(&[0.9, 0.5, 0.1]), vec![0.9, 0.5, 0.1]);
        let fit = isotonic_nonincreasing(&[1.0, 0.2, 0.4, 0.0]);
        assert!(fit.windows(2).all(|w| w[0] >= w[1]));
        assert!((fit[1] - 0.3).abs() < 1e-12 && (fit[2] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn normal_tail_symmetry() {
        assert!((normal_sf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_sf(1.0) + normal_sf(-1.0) - 1.0).abs() < 1e-15);
        assert_eq!(exceed_prob(0.5, 0.5, 0.0), 1.0);
        assert!((exceed_prob(0.5, 0.5, 0.1) - 0.5).abs() < 1e-15);
    }
}
