//! Rank-based group comparison and boxplot summaries.
//!
//! Everything here works on ranks, so any strictly monotone transform of
//! the inputs leaves the test statistics unchanged. Ties get midranks and
//! the usual correction terms.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::EvalError;

/// How the Kruskal–Wallis p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValueMethod {
    /// Chi-square upper tail with k−1 degrees of freedom. Standard for
    /// group sizes of 5 and up.
    ChiSquare,
    /// Monte-Carlo permutation of the group labels; exactly reproducible
    /// for a given seed. p = (#{H_perm ≥ H_obs} + 1) / (iterations + 1).
    Permutation { iterations: usize, seed: u64 },
}

/// Multiple-comparison adjustment for pairwise tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    /// Multiply each raw p by the number of pairs, capped at 1.
    Bonferroni,
    None,
}

/// Five-number summary plus the median confidence notch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme data point within 1.5·IQR below q1.
    pub whisker_lo: f64,
    /// Most extreme data point within 1.5·IQR above q3.
    pub whisker_hi: f64,
    /// median − 1.57·IQR/√n: approximate 95% CI for the median.
    pub notch_lo: f64,
    pub notch_hi: f64,
    pub n: usize,
}

fn check_groups(groups: &[Vec<f64>]) -> Result<(), EvalError> {
    if groups.len() < 2 {
        return Err(EvalError::BadInput(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(EvalError::BadInput(format!("group {i} is empty")));
        }
        if let Some(v) = g.iter().find(|v| !v.is_finite()) {
            return Err(EvalError::BadInput(format!(
                "group {i} contains a non-finite value ({v})"
            )));
        }
    }
    Ok(())
}

/// Midranks (1-based, ties averaged) of the pooled values, plus the tie
/// term Σ(t³ − t) over tie runs.
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mid;
        }
        tie_term += t * t * t - t;
        i = j + 1;
    }
    (ranks, tie_term)
}

/// Tie-corrected H from per-group rank slices. `ranks` is the pooled rank
/// vector laid out group after group, `sizes` the group lengths.
fn h_statistic(ranks: &[f64], sizes: &[usize], tie_term: f64) -> f64 {
    let n = ranks.len() as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for &sz in sizes {
        let sum: f64 = ranks[offset..offset + sz].iter().sum();
        h += sum * sum / sz as f64;
        offset += sz;
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    let correction = 1.0 - tie_term / (n * n * n - n);
    if correction <= 0.0 {
        // every pooled value identical — no evidence of any difference
        return 0.0;
    }
    (h / correction).max(0.0)
}

/// Kruskal–Wallis test: tie-corrected H and its chi-square p-value with
/// k−1 degrees of freedom. All values identical gives (0, 1).
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<(f64, f64), EvalError> {
    kruskal_wallis_with(groups, PValueMethod::ChiSquare)
}

/// Kruskal–Wallis with an explicit p-value method; the permutation route
/// is the small-sample fallback where the chi-square approximation is
/// doubtful.
pub fn kruskal_wallis_with(
    groups: &[Vec<f64>],
    method: PValueMethod,
) -> Result<(f64, f64), EvalError> {
    check_groups(groups)?;
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let h = h_statistic(&ranks, &sizes, tie_term);
    let p = match method {
        PValueMethod::ChiSquare => {
            let dof = (groups.len() - 1) as f64;
            let chi = ChiSquared::new(dof).expect("dof >= 1");
            (1.0 - chi.cdf(h)).clamp(0.0, 1.0)
        }
        PValueMethod::Permutation { iterations, seed } => {
            if iterations == 0 {
                return Err(EvalError::BadInput(
                    "permutation test needs at least 1 iteration".into(),
                ));
            }
            // Under label permutation the pooled ranks are fixed; only
            // their assignment to groups moves. Shuffling the rank vector
            // and re-reading it in group-sized chunks is the whole test.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm = ranks.clone();
            let mut at_least = 0usize;
            for _ in 0..iterations {
                perm.shuffle(&mut rng);
                if h_statistic(&perm, &sizes, tie_term) >= h - 1e-12 {
                    at_least += 1;
                }
            }
            (at_least + 1) as f64 / (iterations + 1) as f64
        }
    };
    Ok((h, p))
}

/// Dunn's pairwise z-tests on mean ranks, with tie correction. Returns the
/// symmetric matrix of (optionally Bonferroni-adjusted) two-sided
/// p-values; the diagonal is NaN — a group against itself is undefined.
pub fn dunn_posthoc(
    groups: &[Vec<f64>],
    correction: Correction,
) -> Result<Vec<Vec<f64>>, EvalError> {
    check_groups(groups)?;
    let k = groups.len();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let n = pooled.len() as f64;

    let mut mean_rank = Vec::with_capacity(k);
    let mut offset = 0;
    for g in groups {
        let sum: f64 = ranks[offset..offset + g.len()].iter().sum();
        mean_rank.push(sum / g.len() as f64);
        offset += g.len();
    }

    let var_base = n * (n + 1.0) / 12.0 - tie_term / (12.0 * (n - 1.0));
    let pairs = (k * (k - 1) / 2) as f64;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut p = vec![vec![f64::NAN; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let raw = if var_base <= 0.0 {
                1.0 // total tie: no rank information at all
            } else {
                let se = (var_base
                    * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64))
                    .sqrt();
                let z = (mean_rank[i] - mean_rank[j]).abs() / se;
                (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0)
            };
            let adjusted = match correction {
                Correction::Bonferroni => (raw * pairs).min(1.0),
                Correction::None => raw,
            };
            p[i][j] = adjusted;
            p[j][i] = adjusted;
        }
    }
    Ok(p)
}

/// Quantile by linear interpolation of the inclusive order statistics
/// (h = (n−1)p). `sorted` must be ascending and non-empty.
fn quantile_r7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Notched five-number summary. Whiskers reach the most extreme data
/// within 1.5·IQR of the box; the notch half-width is 1.57·IQR/√n.
pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary, EvalError> {
    if values.is_empty() {
        return Err(EvalError::BadInput("boxplot needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(EvalError::BadInput(format!("non-finite value ({v})")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));

    let q1 = quantile_r7(&sorted, 0.25);
    let median = quantile_r7(&sorted, 0.5);
    let q3 = quantile_r7(&sorted, 0.75);
    let iqr = q3 - q1;

    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = *sorted
        .iter()
        .find(|&&v| v >= lo_fence)
        .expect("q1 is within the fence");
    let whisker_hi = *sorted
        .iter()
        .rev()
        .find(|&&v| v <= hi_fence)
        .expect("q3 is within the fence");

    let half_notch = 1.57 * iqr / (sorted.len() as f64).sqrt();
    Ok(BoxplotSummary {
        median,
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        notch_lo: median - half_notch,
        notch_hi: median + half_notch,
        n: sorted.len(),
    })
}
