//! Epsilon-admissible subsets (EAS) for group variable selection in
//! multivariate linear regression.
//!
//! The crate computes generalized fiducial probabilities over ε-admissible
//! predictor subsets, samples the model space with Metropolis-Hastings,
//! tunes ε by BIC or cross-validation, and runs simulation studies.

pub mod admissibility;
pub mod cli;
pub mod error;
pub mod io;
pub mod lasso;
pub mod matstat;
pub mod model;
pub mod sampler;
pub mod simstudy;
pub mod tuning;

pub use error::{EasError, Result};
