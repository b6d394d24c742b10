//! Weekly tag association rules and the onset of their convergence.
//!
//! `tagtrend` turns a stream of timestamped, hashtag-bearing comments into
//! weekly support series for pairwise tag rules, then asks two questions of
//! each series:
//!
//! * when does its variability start to shrink consistently? ([`convergence`],
//!   a Mann-Kendall scan over suffix variances), and
//! * from which week on does it test stationary? ([`stationarity`], an
//!   iterative Augmented Dickey-Fuller scan).
//!
//! ```
//! use tagtrend::mktrend::mk_test;
//!
//! let r = mk_test(&[5.0, 4.0, 3.0, 2.0, 1.0], 0.05).unwrap();
//! assert_eq!(r.s, -10);
//! assert!(r.downward_trend);
//! ```

pub mod convergence;
pub mod error;
pub mod mktrend;
pub mod pipeline;
pub mod rulemine;
pub mod stationarity;
pub mod synthbench;
pub mod tagstream;

pub use error::{Error, Result};

/// Week index: whole weeks elapsed since the configured epoch.
pub type Week = i64;
