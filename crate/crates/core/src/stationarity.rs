//! Augmented Dickey-Fuller test and the earliest-stationary-suffix scan.
//!
//! The test regression is constant-only:
//!
//! ```text
//! Δy_t = a + γ·y_{t−1} + Σ_{i=1..p} δ_i·Δy_{t−i} + ε_t
//! ```
//!
//! and the unit root is rejected when `γ̂ / SE(γ̂)` falls below the
//! Dickey-Fuller critical value for the effective sample size.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Week};

pub mod ols {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    pub struct OlsFit {
        pub coefficients: DVector<f64>,
        pub standard_errors: DVector<f64>,
        /// RSS / (rows − columns).
        pub residual_variance: f64,
        pub residuals: DVector<f64>,
        pub dof: usize,
    }

    // A column whose component orthogonal to the preceding columns is this
    // small relative to its own norm is treated as collinear.
    const RANK_TOL: f64 = 1e-10;

    /// Least squares through a Householder QR decomposition.
    pub fn ols_fit(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<OlsFit> {
        let (rows, cols) = design.shape();
        if response.len() != rows {
            return Err(Error::Config(format!(
                "design has {rows} rows but response has {} entries",
                response.len()
            )));
        }
        if cols == 0 || rows < cols + 1 {
            return Err(Error::InsufficientData {
                needed: cols + 1,
                got: rows,
            });
        }
        let qr = design.clone().qr();
        let r = qr.r();
        for j in 0..cols {
            let col_norm = design.column(j).norm();
            if col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * col_norm {
                return Err(Error::SingularDesign);
            }
        }
        let mut qty = response.clone();
        qr.q_tr_mul(&mut qty);
        let coefficients = r
            .solve_upper_triangular(&qty.rows(0, cols).into_owned())
            .ok_or(Error::SingularDesign)?;
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(cols, cols))
            .ok_or(Error::SingularDesign)?;
        let residuals = response - design * &coefficients;
        let dof = rows - cols;
        let residual_variance = residuals.norm_squared() / dof as f64;
        // diag((XᵀX)⁻¹) = squared row norms of R⁻¹
        let standard_errors = DVector::from_iterator(
            cols,
            (0..cols).map(|i| (r_inv.row(i).norm_squared() * residual_variance).sqrt()),
        );
        Ok(OlsFit {
            coefficients,
            standard_errors,
            residual_variance,
            residuals,
            dof,
        })
    }
}

pub use ols::{ols_fit, OlsFit};

/// Lag order of the augmentation terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagOrder {
    /// `floor(12·(N/100)^{1/4})`, reduced until at least ten observations
    /// enter the regression.
    #[default]
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for LagOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(LagOrder::Auto);
        }
        s.parse::<usize>()
            .map(LagOrder::Fixed)
            .map_err(|_| Error::Config(format!("lag order must be `auto` or an integer, got {s:?}")))
    }
}

const MIN_USED: usize = 10;

pub fn schwert_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

impl LagOrder {
    /// Lag order for a series of length `n`, or `None` if the series is too
    /// short for this policy.
    pub fn resolve(self, n: usize) -> Option<usize> {
        match self {
            LagOrder::Auto => {
                let cap = n.checked_sub(MIN_USED + 1)?;
                Some(schwert_lags(n).min(cap))
            }
            LagOrder::Fixed(p) => (n >= p + MIN_USED && n - p > p + 3).then_some(p),
        }
    }

    pub fn min_len(self) -> usize {
        match self {
            LagOrder::Auto => MIN_USED + 1,
            LagOrder::Fixed(p) => (p + MIN_USED).max(2 * p + 4),
        }
    }
}

/// Left-tail Dickey-Fuller critical values (constant, no trend) by sample
/// size; the last row is the asymptotic value.
const DF_TABLE_N: [f64; 5] = [25.0, 50.0, 100.0, 250.0, 500.0];
const DF_CRIT_1: [f64; 6] = [-3.75, -3.58, -3.51, -3.46, -3.44, -3.43];
const DF_CRIT_5: [f64; 6] = [-3.00, -2.93, -2.89, -2.88, -2.87, -2.86];
const DF_CRIT_10: [f64; 6] = [-2.62, -2.60, -2.58, -2.57, -2.57, -2.57];

/// Critical value at level `alpha` (0.01, 0.05 or 0.10) for `n` observations,
/// linear in `1/n`. Below n = 25 the first segment is extended.
pub fn df_critical_value(alpha: f64, n: usize) -> Result<f64> {
    let row = if (alpha - 0.05).abs() < 1e-12 {
        &DF_CRIT_5
    } else if (alpha - 0.01).abs() < 1e-12 {
        &DF_CRIT_1
    } else if (alpha - 0.10).abs() < 1e-12 {
        &DF_CRIT_10
    } else {
        return Err(Error::Config(format!(
            "Dickey-Fuller critical values are tabulated for alpha 0.01, 0.05, 0.10; got {alpha}"
        )));
    };
    // knots in increasing 1/n: ∞, 500, 250, 100, 50, 25
    let mut knots: Vec<(f64, f64)> = vec![(0.0, row[5])];
    knots.extend(
        DF_TABLE_N
            .iter()
            .rev()
            .zip(row[..5].iter().rev())
            .map(|(n, c)| (1.0 / n, *c)),
    );
    let x = 1.0 / n.max(1) as f64;
    let seg = knots.windows(2).position(|w| x <= w[1].0).unwrap_or(knots.len() - 2);
    let ((x0, y0), (x1, y1)) = (knots[seg], knots[seg + 1]);
    Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionKind {
    ConstantOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub n_used: usize,
    pub lags: usize,
    /// `γ̂ / SE(γ̂)`; absent when the regression is degenerate.
    pub tau_stat: Option<f64>,
    pub critical_value: f64,
    pub alpha: f64,
    pub reject_unit_root: bool,
    /// Constant or collinear input; reported as not stationary.
    pub degenerate: bool,
    pub regression_kind: RegressionKind,
}

/// ADF test at the 5% level.
pub fn adf_test(series: &[f64], lags: LagOrder) -> Result<AdfResult> {
    adf_test_at(series, lags, 0.05)
}

pub fn adf_test_at(series: &[f64], lags: LagOrder, alpha: f64) -> Result<AdfResult> {
    if let Some(i) = series.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = series.len();
    let p = lags.resolve(n).ok_or(Error::InsufficientData {
        needed: lags.min_len(),
        got: n,
    })?;
    let n_used = n - p - 1;
    let critical_value = df_critical_value(alpha, n_used)?;

    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    // row r models Δy at series index t = p + 1 + r
    let cols = 2 + p;
    let design = DMatrix::from_fn(n_used, cols, |r, c| {
        let t = p + 1 + r;
        match c {
            0 => 1.0,
            1 => series[t - 1],
            k => diff[t - 1 - (k - 1)],
        }
    });
    let response = DVector::from_fn(n_used, |r, _| diff[p + r]);

    let mut result = AdfResult {
        n_used,
        lags: p,
        tau_stat: None,
        critical_value,
        alpha,
        reject_unit_root: false,
        degenerate: false,
        regression_kind: RegressionKind::ConstantOnly,
    };
    match ols_fit(&design, &response) {
        Ok(fit) if fit.standard_errors[1] > 0.0 => {
            let tau = fit.coefficients[1] / fit.standard_errors[1];
            result.tau_stat = Some(tau);
            result.reject_unit_root = tau < critical_value;
        }
        Ok(_) | Err(Error::SingularDesign) => result.degenerate = true,
        Err(e) => return Err(e),
    }
    Ok(result)
}

/// One attempted suffix of the scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetOutcome {
    /// 1-based start of the tested suffix.
    pub offset: usize,
    pub result: Option<AdfResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityScan {
    pub stationary: bool,
    pub start_offset: Option<usize>,
    pub start_week: Option<Week>,
    pub weeks_before_submission: Option<i64>,
    /// Every attempted offset was degenerate.
    pub degenerate: bool,
    pub per_offset_results: Vec<OffsetOutcome>,
}

impl StationarityScan {
    /// Places the onset on the week axis (`first_week` is the week of the
    /// series' first value).
    pub fn placed(mut self, first_week: Week, submission_week: Week) -> Result<Self> {
        if let Some(k) = self.start_offset {
            let start_week = first_week + k as Week - 1;
            if start_week > submission_week {
                return Err(Error::OnsetAfterSubmission {
                    start_week,
                    submission_week,
                });
            }
            self.start_week = Some(start_week);
            self.weeks_before_submission = Some(submission_week - start_week);
        }
        Ok(self)
    }
}

/// Tests `series[k−1..]` for `k = 1, 2, …` and stops at the first suffix
/// that rejects the unit root, or when the suffix becomes too short.
pub fn find_stationarity_start(series: &[f64], alpha: f64, lags: LagOrder) -> Result<StationarityScan> {
    df_critical_value(alpha, 100)?;
    let mut scan = StationarityScan {
        stationary: false,
        start_offset: None,
        start_week: None,
        weeks_before_submission: None,
        degenerate: false,
        per_offset_results: Vec::new(),
    };
    let min_len = lags.min_len();
    let mut all_degenerate = true;
    for start in 0..series.len() {
        let suffix = &series[start..];
        if suffix.len() < min_len {
            break;
        }
        let offset = start + 1;
        match adf_test_at(suffix, lags, alpha) {
            Ok(r) => {
                let reject = r.reject_unit_root;
                all_degenerate &= r.degenerate;
                scan.per_offset_results.push(OffsetOutcome {
                    offset,
                    result: Some(r),
                    error: None,
                });
                if reject {
                    scan.stationary = true;
                    scan.start_offset = Some(offset);
                    break;
                }
            }
            Err(e) => {
                all_degenerate = false;
                scan.per_offset_results.push(OffsetOutcome {
                    offset,
                    result: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    scan.degenerate = !scan.per_offset_results.is_empty() && all_degenerate;
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthbench::{generate, SynthKind, SynthSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    // Textbook route: solve (XᵀX) b = Xᵀy by Gauss-Jordan elimination.
    fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let k = x[0].len();
        let mut a = vec![vec![0.0; k + 1]; k];
        for (row, &yi) in x.iter().zip(y) {
            for i in 0..k {
                for j in 0..k {
                    a[i][j] += row[i] * row[j];
                }
                a[i][k] += row[i] * yi;
            }
        }
        for col in 0..k {
            let pivot = (col..k)
                .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            let d = a[col][col];
            a[col].iter_mut().for_each(|v| *v /= d);
            let pivot_row = a[col].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != col {
                    let f = row[col];
                    row.iter_mut().zip(&pivot_row).for_each(|(x, p)| *x -= f * p);
                }
            }
        }
        a.iter().map(|row| row[k]).collect()
    }

    #[test]
    fn exact_line_fit() {
        let x = DMatrix::from_fn(5, 2, |r, c| if c == 0 { 1.0 } else { r as f64 });
        let y = DVector::from_fn(5, |r, _| 2.0 * r as f64 + 1.0);
        let fit = ols_fit(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.residual_variance < 1e-24);
        assert_eq!(fit.dof, 3);
    }

    #[test]
    fn orthogonal_response_has_zero_slope() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let y = DVector::from_row_slice(&[1.0, 1.0, -1.0, -1.0]);
        assert!(ols_fit(&x, &y).unwrap().coefficients[0].abs() < 1e-15);
    }

    #[test]
    fn random_system_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![1.0, rng.sample(StandardNormal), rng.random_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.5 - 1.5 * r[1] + 2.0 * r[2] + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = ols_fit(
            &DMatrix::from_fn(20, 3, |r, c| rows[r][c]),
            &DVector::from_row_slice(&y),
        )
        .unwrap();
        let oracle = normal_equations(&rows, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        // residuals orthogonal to every column
        for c in 0..3 {
            let dot: f64 = rows.iter().zip(fit.residuals.iter()).map(|(r, e)| r[c] * e).sum();
            assert!(dot.abs() < 1e-8);
        }
    }

    #[test]
    fn collinear_design_is_singular() {
        let x = DMatrix::from_fn(6, 2, |_, _| 1.0);
        let y = DVector::from_fn(6, |r, _| r as f64);
        assert!(matches!(ols_fit(&x, &y), Err(Error::SingularDesign)));
        let tall = DMatrix::from_fn(2, 2, |r, c| (r + c) as f64);
        assert!(matches!(
            ols_fit(&tall, &DVector::zeros(2)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn critical_values_follow_table() {
        assert!((df_critical_value(0.05, 25).unwrap() + 3.00).abs() < 1e-12);
        assert!((df_critical_value(0.05, 100).unwrap() + 2.89).abs() < 1e-12);
        assert!((df_critical_value(0.05, 500).unwrap() + 2.87).abs() < 1e-12);
        let mid = df_critical_value(0.05, 1000).unwrap();
        assert!((mid + 2.865).abs() < 1e-12);
        let between = df_critical_value(0.05, 75).unwrap();
        assert!(between < -2.89 && between > -2.93);
        assert!(df_critical_value(0.05, 10).unwrap() < -3.0);
        assert!(df_critical_value(0.2, 100).is_err());
    }

    #[test]
    fn lag_policy() {
        assert_eq!(schwert_lags(100), 12);
        assert_eq!(schwert_lags(300), 15);
        assert_eq!(LagOrder::Auto.resolve(30), Some(8));
        assert_eq!(LagOrder::Auto.resolve(11), Some(0));
        assert_eq!(LagOrder::Auto.resolve(10), None);
        assert_eq!(LagOrder::Fixed(2).resolve(12), Some(2));
        assert_eq!("auto".parse::<LagOrder>().unwrap(), LagOrder::Auto);
        assert_eq!("4".parse::<LagOrder>().unwrap(), LagOrder::Fixed(4));
    }

    #[test]
    fn constant_series_is_degenerate() {
        let r = adf_test(&[0.4; 40], LagOrder::Auto).unwrap();
        assert!(r.degenerate && !r.reject_unit_root && r.tau_stat.is_none());
        assert_eq!(r.n_used, 40 - r.lags - 1);
        let scan = find_stationarity_start(&[0.4; 30], 0.05, LagOrder::Auto).unwrap();
        assert!(!scan.stationary && scan.degenerate);
        assert!(matches!(
            adf_test(&[1.0; 5], LagOrder::Auto),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn white_noise_is_stationary_from_the_start() {
        let spec = SynthSpec {
            seed: 5,
            ..SynthSpec::new(SynthKind::IidNoise, 200)
        };
        let x = generate(&spec).unwrap().values;
        let scan = find_stationarity_start(&x, 0.05, LagOrder::Auto).unwrap();
        assert_eq!(scan.start_offset, Some(1));
        assert_eq!(scan.per_offset_results.len(), 1);
        let placed = scan.placed(10, 209).unwrap();
        assert_eq!(
            (placed.start_week, placed.weeks_before_submission),
            (Some(10), Some(199))
        );
    }

    #[test]
    fn scan_hits_earliest_offset() {
        let spec = SynthSpec {
            seed: 1,
            ..SynthSpec::new(SynthKind::RandomWalk, 120)
        };
        let x = generate(&spec).unwrap().values;
        let scan = find_stationarity_start(&x, 0.05, LagOrder::Auto).unwrap();
        let stop = scan.start_offset.unwrap_or(scan.per_offset_results.len() + 1);
        for k in 1..stop {
            assert!(!adf_test(&x[k - 1..], LagOrder::Auto).unwrap().reject_unit_root);
        }
        assert_eq!(
            scan.per_offset_results.len(),
            if scan.stationary { stop } else { stop - 1 }
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tau_is_shift_and_scale_invariant(seed in 0u64..10_000, shift in -50.0..50.0f64, scale in 0.01..100.0f64) {
            let spec = SynthSpec { seed, ..SynthSpec::new(SynthKind::IidNoise, 80) };
            let x = generate(&spec).unwrap().values;
            let base = adf_test(&x, LagOrder::Auto).unwrap().tau_stat.unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
            prop_assert!((adf_test(&shifted, LagOrder::Auto).unwrap().tau_stat.unwrap() - base).abs() < 1e-8);
            prop_assert!((adf_test(&scaled, LagOrder::Auto).unwrap().tau_stat.unwrap() - base).abs() < 1e-8);
        }
    }
}
