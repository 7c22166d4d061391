//! Small statistics helpers for seed-matched comparisons.

/// One-sided exact Wilcoxon signed-rank test.
///
/// Given paired differences (treatment minus control), returns the exact
/// probability under the null of sign-symmetry of observing a positive-rank
/// sum at least as large as the one observed. Zero differences are dropped;
/// ties in magnitude share average ranks. Exact enumeration over all 2^n
/// sign assignments, so keep n below ~20.
pub fn wilcoxon_signed_rank_one_sided(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return 1.0;
    }
    assert!(n <= 22, "exact enumeration limited to 22 pairs");

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }

    let observed: f64 =
        nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let mut at_least = 0u64;
    let total = 1u64 << n;
    for mask in 0..total {
        let w: f64 = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        if w >= observed - 1e-12 {
            at_least += 1;
        }
    }
    at_least as f64 / total as f64
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}
