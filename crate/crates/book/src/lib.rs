//! Compiles the guide under `book/src` so that its listings run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/ingest.md")]
pub mod ingest {}
#[doc = include_str!("../../../book/src/rules.md")]
pub mod rules {}
#[doc = include_str!("../../../book/src/mann-kendall.md")]
pub mod mann_kendall {}
#[doc = include_str!("../../../book/src/convergence.md")]
pub mod convergence {}
#[doc = include_str!("../../../book/src/stationarity.md")]
pub mod stationarity {}
#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}
#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}
