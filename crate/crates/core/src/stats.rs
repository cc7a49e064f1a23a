//! Small statistics kernel: percentiles, moments, rank correlation, and the
//! Wilcoxon signed-rank test.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identifier for the percentile rule, echoed into run provenance.
pub const PERCENTILE_RULE_ID: &str = "linear_interpolation_v1";

/// Identifier for the significance test, echoed into run provenance.
pub const SIGNIFICANCE_TEST_ID: &str = "wilcoxon_signed_rank_one_sided_v1";

/// Linear-interpolation percentile over a sorted slice: the value at fractional
/// order statistic `(n - 1) * p / 100`.
pub fn percentile_sorted<F: Scalar>(sorted: &[F], p_percent: F) -> F {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let hundred = F::of_f64(100.0);
    let p = p_percent.max(F::zero()).min(hundred);
    let rank = F::of_usize(n - 1) * p / hundred;
    let lo = rank.floor().to_f64_lossy() as usize;
    let hi = rank.ceil().to_f64_lossy() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = rank - F::of_usize(lo);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Flat mean and population standard deviation.
pub fn mean_std<F: Scalar>(values: &[F]) -> (F, F) {
    assert!(!values.is_empty(), "mean of an empty slice");
    let n = F::of_usize(values.len());
    let mean = values.iter().fold(F::zero(), |a, &v| a + v) / n;
    let var = values.iter().fold(F::zero(), |a, &v| {
        let d = v - mean;
        a + d * d
    }) / n;
    (mean, var.sqrt())
}

/// Kendall tau-b between two paired samples, with tie corrections.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_x = 0i64;
    let mut ties_y = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                // tied in both; contributes to neither denominator term
            } else if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let p = concordant as f64;
    let q = discordant as f64;
    let denom = ((p + q + ties_x as f64) * (p + q + ties_y as f64)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (p - q) / denom
    }
}

/// Outcome of a one-sided Wilcoxon signed-rank test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WilcoxonOutcome {
    /// P(W+ >= observed) under the null of symmetric differences.
    pub p_value: f64,
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n_used: usize,
    /// Whether the exact permutation distribution was used.
    pub exact: bool,
}

/// One-sided Wilcoxon signed-rank test for "differences tend positive".
///
/// Zero differences are dropped; absolute values get midranks. The exact
/// sign-flip distribution is enumerated for n <= 25, above that a normal
/// approximation with continuity and tie corrections is used.
pub fn wilcoxon_signed_rank_one_sided(diffs: &[f64]) -> Result<WilcoxonOutcome> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::Degenerate(
            "all paired differences are zero; test is undefined".into(),
        ));
    }
    let n = nonzero.len();

    // Midranks of |d|.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = midrank;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }

    let w_plus: f64 = (0..n).filter(|&k| nonzero[k] > 0.0).map(|k| ranks[k]).sum();

    if n <= 25 {
        // Exact: distribution of W+ over all 2^n sign assignments. Doubled
        // ranks are integers even with midranks, so a DP over integer sums
        // enumerates the distribution exactly.
        let doubled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        for &d in &doubled {
            for w in (d..=total).rev() {
                counts[w] += counts[w - d];
            }
        }
        let w_obs = (2.0 * w_plus).round() as usize;
        let tail: f64 = counts[w_obs..].iter().sum();
        let p = tail / (n as f64).exp2();
        Ok(WilcoxonOutcome { p_value: p.min(1.0), w_plus, n_used: n, exact: true })
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            return Err(Error::Degenerate("zero variance in signed-rank statistic".into()));
        }
        let z = (w_plus - mean - 0.5) / var.sqrt();
        Ok(WilcoxonOutcome { p_value: 1.0 - normal_cdf(z), w_plus, n_used: n, exact: false })
    }
}

/// Standard normal CDF via the Abramowitz–Stegun 7.1.26 erf approximation
/// (absolute error < 1.5e-7, plenty for p-value thresholds).
pub fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    0.5 * (1.0 + erf(x))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// FNV-1a 64-bit hash; used for deterministic config fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_single_element() {
        assert_eq!(percentile_sorted(&[3.5], 95.0), 3.5);
    }

    #[test]
    fn percentile_interpolates_between_order_statistics() {
        // rank = (4 - 1) * 0.5 = 1.5 -> midpoint of sorted[1], sorted[2]
        let v = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(percentile_sorted(&v, 50.0), 3.0);
        assert_eq!(percentile_sorted(&v, 0.0), 1.0);
        assert_eq!(percentile_sorted(&v, 100.0), 8.0);
    }

    #[test]
    fn percentile_95_of_hundred_uniform() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        // rank = 99 * 0.95 = 94.05
        assert!((percentile_sorted(&v, 95.0) - 94.05).abs() < 1e-12);
    }

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn kendall_perfect_and_reversed() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [10.0, 20.0, 30.0, 40.0];
        assert!((kendall_tau_b(&x, &y) - 1.0).abs() < 1e-12);
        let rev = [40.0, 30.0, 20.0, 10.0];
        assert!((kendall_tau_b(&x, &rev) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_all_positive_twenty() {
        let diffs: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let out = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        assert!(out.exact);
        assert_eq!(out.w_plus, 210.0);
        // Only the all-positive assignment reaches the maximum statistic.
        assert!((out.p_value - 1.0 / 2f64.powi(20)).abs() < 1e-15);
        assert!(out.p_value < 0.05);
    }

    #[test]
    fn wilcoxon_symmetric_sample_not_significant() {
        let diffs = [1.0, -1.5, 2.0, -2.5, 3.0, -3.5, 4.0, -4.5];
        let out = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        assert!(out.p_value > 0.05);
    }

    #[test]
    fn wilcoxon_all_zero_is_degenerate() {
        assert!(matches!(
            wilcoxon_signed_rank_one_sided(&[0.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration_small() {
        // n = 6 with ties in |d|; enumerate all 64 sign vectors directly.
        let diffs = [1.0, 1.0, 2.0, 3.0, 3.0, 5.0];
        let out = wilcoxon_signed_rank_one_sided(&diffs).unwrap();
        let mags = [1.0, 1.0, 2.0, 3.0, 3.0, 5.0];
        // midranks of |d|: (1.5, 1.5, 3, 4.5, 4.5, 6)
        let ranks = [1.5, 1.5, 3.0, 4.5, 4.5, 6.0];
        let w_obs: f64 = ranks.iter().sum(); // all positive
        assert_eq!(out.w_plus, w_obs);
        let mut at_least = 0u32;
        for bits in 0..64u32 {
            let w: f64 = (0..6).filter(|&i| bits & (1 << i) != 0).map(|i| ranks[i]).sum();
            if w >= w_obs {
                at_least += 1;
            }
        }
        let _ = mags;
        assert!((out.p_value - at_least as f64 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.959963985) - 0.975).abs() < 1e-6);
        assert!((normal_cdf(-1.959963985) - 0.025).abs() < 1e-6);
    }

    #[test]
    fn fnv_differs_on_input() {
        assert_ne!(fnv1a64(b"a"), fnv1a64(b"b"));
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    }
}
