//! Onset of convergence: the earliest index from which the suffix variances
//! of a series show a significant downward monotonic trend.
//!
//! For a series `L` of length `N`, `V[i] = var(L[i..N])` for `i = 1..N−1`
//! (1-based, sample variance). The scan runs the Mann-Kendall test on
//! `V[i..N−1]` for `i = 1, 2, …` and stops at the first `i` where the lower-tail
//! p-value is below `alpha` and `tau < 0`. The scan ends once fewer than
//! [`MIN_TEST_LEN`] suffix-variance points remain.

use serde::{Deserialize, Serialize};

use crate::mktrend::{mk_test, MIN_TEST_LEN};
use crate::{Error, Result, Week};

/// Shortest series for which the first Mann-Kendall call sees four points.
pub const MIN_SERIES_LEN: usize = MIN_TEST_LEN + 3;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Statistic computed over each suffix before the trend scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuffixStatistic {
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub converged: bool,
    /// 1-based index into the series.
    pub start_index: Option<usize>,
    pub start_week: Option<Week>,
    pub weeks_before_submission: Option<i64>,
    pub suffix_stats: Vec<f64>,
    pub alpha: f64,
    /// Series shorter than [`MIN_SERIES_LEN`]; no scan was run.
    pub too_short: bool,
    /// Convergence detected from the very first observation.
    pub from_first_observation: bool,
}

/// Placement of a series on the week axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub first_week: Week,
    pub submission_week: Week,
}

fn check_finite(series: &[f64]) -> Result<()> {
    match series.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

/// Sample variance of every suffix with at least two elements, `V[0]` covering
/// the whole series. One reverse Welford pass.
pub fn suffix_variances(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    check_finite(series)?;
    let n = series.len();
    let mut out = vec![0.0; n - 1];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (count, (i, &x)) in series.iter().enumerate().rev().enumerate() {
        let count = (count + 1) as f64;
        let delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
        if i < n - 1 {
            out[i] = m2 / (count - 1.0);
        }
    }
    Ok(out)
}

/// Convergence scan with the default suffix statistic (variance).
pub fn find_converge_start(series: &[f64], alpha: f64) -> Result<ConvergenceResult> {
    find_converge_start_with(series, alpha, SuffixStatistic::Variance)
}

pub fn find_converge_start_with(series: &[f64], alpha: f64, statistic: SuffixStatistic) -> Result<ConvergenceResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    check_finite(series)?;
    let mut stats = if series.len() >= 2 {
        suffix_variances(series)?
    } else {
        Vec::new()
    };
    if statistic == SuffixStatistic::StdDev {
        stats.iter_mut().for_each(|v| *v = v.sqrt());
    }

    let mut result = ConvergenceResult {
        converged: false,
        start_index: None,
        start_week: None,
        weeks_before_submission: None,
        suffix_stats: Vec::new(),
        alpha,
        too_short: series.len() < MIN_SERIES_LEN,
        from_first_observation: false,
    };
    if !result.too_short {
        for start in 0..=stats.len() - MIN_TEST_LEN {
            let mk = mk_test(&stats[start..], alpha)?;
            if mk.downward_trend && mk.tau < 0.0 {
                result.converged = true;
                result.start_index = Some(start + 1);
                result.from_first_observation = start == 0;
                break;
            }
        }
    }
    result.suffix_stats = stats;
    Ok(result)
}

/// Places a converged result on the week axis.
pub fn to_weeks_before_submission(result: &ConvergenceResult, meta: SeriesMeta) -> Result<ConvergenceResult> {
    let mut placed = result.clone();
    if let Some(index) = result.start_index {
        let start_week = meta.first_week + index as Week - 1;
        if start_week > meta.submission_week {
            return Err(Error::OnsetAfterSubmission {
                start_week,
                submission_week: meta.submission_week,
            });
        }
        placed.start_week = Some(start_week);
        placed.weeks_before_submission = Some(meta.submission_week - start_week);
    }
    Ok(placed)
}
