//! Mann-Kendall trend test with tie-corrected variance.
//!
//! ```text
//! S      = Σ_{k<j} sgn(x_j − x_k)
//! Var(S) = [n(n−1)(2n+5) − Σ_p t_p(t_p−1)(2t_p+5)] / 18
//! Z      = (S − 1)/√Var(S) if S > 0,  0 if S = 0,  (S + 1)/√Var(S) if S < 0
//! ```
//!
//! The alternative hypothesis is a downward monotonic trend, so the p-value
//! reported is the lower tail `Φ(Z)`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Shortest series [`mk_test`] accepts.
pub const MIN_TEST_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieGroup {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MkResult {
    pub n: usize,
    pub s: i64,
    pub var_s: f64,
    pub z: f64,
    /// Kendall's tau-b against time (time has no ties).
    pub tau: f64,
    pub p_one_sided_down: f64,
    pub alpha: f64,
    /// `p_one_sided_down < alpha`.
    pub downward_trend: bool,
    /// All values identical, so Var(S) = 0 and no decision is possible.
    pub degenerate: bool,
    pub tie_groups: Vec<TieGroup>,
}

impl MkResult {
    /// Upper-tail p-value `1 − Φ(Z)`.
    pub fn p_one_sided_up(&self) -> f64 {
        if self.degenerate {
            0.5
        } else {
            standard_normal().sf(self.z)
        }
    }

    pub fn upward_trend(&self) -> bool {
        !self.degenerate && self.p_one_sided_up() < self.alpha
    }
}

fn standard_normal() -> Normal {
    Normal::standard()
}

fn check_finite(series: &[f64]) -> Result<()> {
    match series.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn check_len(series: &[f64], needed: usize) -> Result<()> {
    if series.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.len(),
        });
    }
    Ok(())
}

/// Dense ranks (0-based) of finite values.
fn dense_ranks(series: &[f64]) -> (Vec<usize>, usize) {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ranks = series.iter().map(|x| sorted.partition_point(|y| y < x)).collect();
    (ranks, sorted.len())
}

/// The S statistic, computed in O(n log n) with a Fenwick tree over ranks.
pub fn mk_s(series: &[f64]) -> Result<i64> {
    check_len(series, 2)?;
    check_finite(series)?;
    let (ranks, distinct) = dense_ranks(series);
    let mut tree = vec![0i64; distinct + 1];
    let mut s = 0i64;
    for (seen, &r) in ranks.iter().enumerate() {
        // earlier values strictly below and strictly above this one
        let mut below = 0;
        let mut i = r;
        while i > 0 {
            below += tree[i];
            i &= i - 1;
        }
        let mut at_or_below = 0;
        let mut i = r + 1;
        while i > 0 {
            at_or_below += tree[i];
            i &= i - 1;
        }
        let above = seen as i64 - at_or_below;
        s += below - above;
        let mut i = r + 1;
        while i <= distinct {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }
    Ok(s)
}

/// Groups of equal values with multiplicity of at least two, in ascending
/// value order.
pub fn tie_groups(series: &[f64]) -> Vec<TieGroup> {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        if end - start >= 2 {
            groups.push(TieGroup {
                value: sorted[start],
                multiplicity: end - start,
            });
        }
        start = end;
    }
    groups
}

fn variance_from_ties(n: usize, ties: &[TieGroup]) -> f64 {
    let term = |t: usize| {
        let t = t as f64;
        t * (t - 1.0) * (2.0 * t + 5.0)
    };
    let correction: f64 = ties.iter().map(|g| term(g.multiplicity)).sum();
    (term(n) - correction) / 18.0
}

pub fn mk_var(series: &[f64]) -> Result<f64> {
    check_len(series, 2)?;
    check_finite(series)?;
    Ok(variance_from_ties(series.len(), &tie_groups(series)))
}

/// Full test against a downward trend at level `alpha`.
pub fn mk_test(series: &[f64], alpha: f64) -> Result<MkResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_len(series, MIN_TEST_LEN)?;
    let s = mk_s(series)?;
    let n = series.len();
    let ties = tie_groups(series);
    let var_s = variance_from_ties(n, &ties);

    let pairs = (n * (n - 1) / 2) as f64;
    let tied_pairs: f64 = ties
        .iter()
        .map(|g| (g.multiplicity * (g.multiplicity - 1) / 2) as f64)
        .sum();
    let tau_denominator = (pairs * (pairs - tied_pairs)).sqrt();
    let tau = if tau_denominator > 0.0 {
        s as f64 / tau_denominator
    } else {
        0.0
    };

    if var_s <= 0.0 {
        return Ok(MkResult {
            n,
            s,
            var_s: 0.0,
            z: 0.0,
            tau,
            p_one_sided_down: 0.5,
            alpha,
            downward_trend: false,
            degenerate: true,
            tie_groups: ties,
        });
    }

    let sd = var_s.sqrt();
    let z = match s.signum() {
        1 => (s - 1) as f64 / sd,
        -1 => (s + 1) as f64 / sd,
        _ => 0.0,
    };
    let p = standard_normal().cdf(z);
    Ok(MkResult {
        n,
        s,
        var_s,
        z,
        tau,
        p_one_sided_down: p,
        alpha,
        downward_trend: p < alpha,
        degenerate: false,
        tie_groups: ties,
    })
}
