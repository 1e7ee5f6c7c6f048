//! Maximally selected rank statistics for choosing a split point.
//!
//! Targets are replaced by their mid-ranks; for each admissible cut of the
//! sorted feature the standardized linear rank statistic of the left part is
//! computed, and the maximum is tested with a normal approximation and a
//! Bonferroni correction over the number of cuts examined.

use statrs::function::erf::erfc;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSplit {
    /// Rows with `x <= value` go left.
    pub value: f64,
    pub statistic: f64,
    pub p_adjusted: f64,
    /// Number of rows on the left.
    pub n_left: usize,
}

/// Mid-ranks (1-based, ties averaged).
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// The strongest admissible cut regardless of significance, or `None` when
/// there is no admissible cut or the target is constant. Cuts leave between
/// `minprop` and `1 - minprop` of the rows on the left; ties on the statistic
/// keep the smallest split value.
pub fn best_rank_split(x: &[f64], y: &[f64], minprop: f64) -> Option<RankSplit> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let scores = mid_ranks(y);
    let mean = (n as f64 + 1.0) / 2.0;
    let ss: f64 = scores.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss <= 0.0 {
        return None;
    }
    let nf = n as f64;
    let mut best: Option<(f64, usize)> = None;
    let mut candidates = 0usize;
    let mut cum = 0.0;
    for m in 1..n {
        cum += scores[order[m - 1]];
        if x[order[m - 1]] == x[order[m]] {
            continue;
        }
        let frac = m as f64 / nf;
        if frac < minprop || frac > 1.0 - minprop {
            continue;
        }
        candidates += 1;
        let mf = m as f64;
        let var = mf * (nf - mf) / (nf * (nf - 1.0)) * ss;
        let t = (cum - mf * mean).abs() / var.sqrt();
        if best.is_none_or(|(bt, _)| t > bt) {
            best = Some((t, m));
        }
    }
    let (t, m) = best?;
    let lo = x[order[m - 1]];
    let hi = x[order[m]];
    let mid = 0.5 * (lo + hi);
    let value = if mid < hi { mid } else { lo };
    let p = erfc(t / std::f64::consts::SQRT_2);
    Some(RankSplit {
        value,
        statistic: t,
        p_adjusted: (p * candidates as f64).min(1.0),
        n_left: m,
    })
}

/// The best cut if its adjusted p-value is at most `alpha`. `alpha <= 0`
/// never splits.
pub fn max_sel_rank_split(x: &[f64], y: &[f64], minprop: f64, alpha: f64) -> Option<RankSplit> {
    if alpha <= 0.0 {
        return None;
    }
    best_rank_split(x, y, minprop).filter(|s| s.p_adjusted <= alpha)
}
