//! Sparse AC power flow: a gradient-descent solver on the power-mismatch
//! loss alongside Newton-Raphson and DC baselines, with batching, warm-started
//! time series and a benchmark harness.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod grid;
pub mod optim;
pub mod pf;
pub mod solvers;
pub mod sparse;
pub mod scaling;
pub mod series;
pub mod bench;
