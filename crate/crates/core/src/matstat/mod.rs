//! Dense linear algebra and matrix-variate sampling kernels.
//!
//! Every quadratic form of the type `Σ^{-1/2} A` is evaluated with triangular
//! solves against a Cholesky factor; inverse square roots are never formed.

mod cholesky;
mod random;
mod special;
mod spectral;

pub use cholesky::{cholesky, dot, cholesky_with_min_pivot, DenseMatrix, SpdFactor, SYMMETRY_TOL};
pub use random::{
    sample_matrix_normal, sample_matrix_t, sample_wishart, standard_normal_matrix, RngStream,
};
pub use special::log_multivariate_gamma;
pub use spectral::{largest_gram_eigenvalue, smallest_eigenvalue};
