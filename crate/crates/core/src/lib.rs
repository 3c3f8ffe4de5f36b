//! Compositional kernel dimension reduction.
//!
//! Learns a column-stochastic matrix `P` that maps `d`-part compositions to
//! `m`-part compositions while preserving the information they carry about a
//! response, by minimizing a regularized kernel conditional-covariance trace
//! with projected gradient descent. The fitted reduction comes with a kernel
//! ridge predictor on the reduced simplex, cross-validation over bandwidth,
//! ridge and target dimension, subspace-recovery metrics, synthetic data
//! generators and ternary-plot rendering.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod json;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod predictor;
pub mod rng;
pub mod selection;
pub mod simdata;
pub mod simplex;
pub mod viz;

pub use error::{Error, Result};
pub use kernels::{center_gram, gram, median_heuristic, GramMatrix, KernelSpec};
pub use objective::{krr_equivalent_loss, trace_gradient, trace_objective, ObjectiveContext};
pub use optimizer::{fit_ckdr, random_init, FitConfig, FitResult, Sigma};
pub use predictor::{fit_dual, FittedModel, Responses};
pub use simplex::{
    amalgamation_matrix, apply_cdr, cdr_from_subspace, detect_amalgamation,
    project_columns_to_simplex, project_vector_to_simplex, validate_composition, CdrMatrix,
    Composition, Partition,
};
