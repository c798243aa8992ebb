//! Matrix-variate integer-valued autoregressive models, MAT-INAR(p):
//!
//! `Y_t = Σ_l A_l ∘_L Y_{t-l} ∘_R B_lᵀ + ε_t`
//!
//! for `m x n` count matrices `Y_t`, with binomial-thinning operators in
//! place of matrix products. The crate covers simulation, projection and
//! ICLS estimation, order selection, forecasting, residual diagnostics and
//! Monte-Carlo replication studies.

pub mod diagnostics;
pub mod error;
pub mod estimate;
pub mod forecast;
pub mod io;
pub mod linalg;
pub mod order;
pub mod process;
pub mod replicate;
pub mod scenario;
pub mod thinning;

pub use error::{MatinarError, Result};
