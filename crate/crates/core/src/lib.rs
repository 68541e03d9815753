//! Variance linearization for non-stationary mixing triangular arrays.
//!
//! The crate builds finite-state and expanding-map models of triangular
//! arrays `{ξ_{j,n}}`, computes their partial-sum laws exactly, derives
//! mixing profiles and growth constants, constructs the variance-linearizing
//! block partition, the block martingale decomposition, and the diagnostics
//! used to check CLT-type rates.

// `!(x > 0.0)` is how NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod generators;
pub mod linearize;
pub mod martingale;
pub mod mixing;
pub mod numeric;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
pub use generators::{sample_path, ArrayModel, ModelKind, SamplePath};
pub use oracle::{LatticePmf, VarianceProfile};
