//! Approximate random variables: cheap piecewise-polynomial inverse
//! distribution functions, their error analysis, and a nested multilevel
//! Monte Carlo engine that uses them without losing accuracy.

#![allow(
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod exact_dist;
pub mod fit;
pub mod metrics;
pub mod mlmc;
pub mod quadrature;
pub mod repro;
pub mod sampler;

pub use error::{Error, FormatError, Result};
