//! Two-sided Mann-Whitney U test with midranks for ties.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    /// Exact enumeration for small samples, normal approximation otherwise.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

/// Auto switches to the exact null distribution below this smaller-group size.
pub const EXACT_MAX_SMALLER_GROUP: usize = 8;
/// ... provided the pooled sample is no larger than this.
pub const EXACT_MAX_TOTAL: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    pub u_a: f64,
    pub u_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Continuity-corrected normal score of `u_a`.
    pub z: f64,
    pub p_two_sided: f64,
    pub tie_correction_applied: bool,
    /// Method that produced `p_two_sided`; never `Auto`.
    pub method: MwuMethod,
}

/// Midranks (1-based) of `values`, plus the tie term Σ(t³ − t).
fn midranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mid;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    (ranks, tie_term)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult> {
    mann_whitney_u_with(a, b, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: MwuMethod) -> Result<MwuResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("mann-whitney group"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidParams("NaN in mann-whitney input".into()));
    }
    let (n_a, n_b) = (a.len(), b.len());
    let n = n_a + n_b;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, tie_term) = midranks(&pooled);
    let r_a: f64 = ranks[..n_a].iter().sum();
    let u_a = r_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = (n_a * n_b) as f64 - u_a;

    let (nf, naf, nbf) = (n as f64, n_a as f64, n_b as f64);
    let mu = naf * nbf / 2.0;
    let variance = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let dev = u_a - mu;
    let z = if variance <= 0.0 || dev.abs() <= 0.5 {
        0.0
    } else {
        (dev - 0.5 * dev.signum()) / variance.sqrt()
    };

    let use_exact = match method {
        MwuMethod::Exact => true,
        MwuMethod::Asymptotic => false,
        MwuMethod::Auto => n_a.min(n_b) < EXACT_MAX_SMALLER_GROUP && n <= EXACT_MAX_TOTAL,
    };
    let p = if variance <= 0.0 {
        1.0
    } else if use_exact {
        exact_p(&ranks, n_a)
    } else {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z.abs())).min(1.0)
    };
    Ok(MwuResult {
        u_a,
        u_b,
        n_a,
        n_b,
        z,
        p_two_sided: p,
        tie_correction_applied: tie_term > 0.0,
        method: if use_exact { MwuMethod::Exact } else { MwuMethod::Asymptotic },
    })
}

/// Permutation p-value: share of all size-`n_a` subsets of the pooled midranks
/// whose rank sum lies at least as far from its mean as the observed one.
fn exact_p(ranks: &[f64], n_a: usize) -> f64 {
    // Doubled midranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0f64; max_sum + 1]; n_a + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n_a).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let (prev, cur) = (&lo[k - 1], &mut hi[0]);
            for s in (r..=max_sum).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let observed: usize = doubled[..n_a].iter().sum();
    let n = ranks.len();
    let mean = (n_a * (n + 1)) as i64; // doubled
    let dist = (observed as i64 - mean).abs();
    let total: f64 = ways[n_a].iter().sum();
    let extreme: f64 = ways[n_a]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i64 - mean).abs() >= dist)
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}
