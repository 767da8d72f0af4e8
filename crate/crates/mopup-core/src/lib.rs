//! Mode-wise principal subspace pursuit for matrix- and tensor-variate
//! samples under a two-way (or d-way) spiked covariance model.
//!
//! The model for a matrix observation is X = M + U A + B V^T + Z: a shared
//! mean, a column-spike U A, a row-spike B V^T, and entry-wise noise. The
//! estimation pipeline is average subspace capture ([`mopup::asc_init`])
//! followed by alternating projection ([`mopup::ap_fit`]); ranks can be
//! chosen by BIC ([`mopup::select_rank`]) and observations cleaned with
//! [`mopup::denoise`]. The order-d extension lives in [`tensor_fit`],
//! comparison methods (MPCA/HOOI, HOSVD) in [`baselines`], and executable
//! verifications of the supporting theory in [`oracles`].
//!
//! With the default `parallel` feature the per-sample reductions run on
//! rayon with a fixed chunking that makes results independent of thread
//! count; disabling the feature (or setting `deterministic` in the options)
//! falls back to strict sequential accumulation.

pub mod baselines;
pub mod error;
pub mod linalg;
pub mod mopup;
pub mod oracles;
pub mod parallel;
pub mod spiked;
pub mod tensor;
pub mod tensor_fit;

pub use error::{Error, Result};
pub use linalg::{Matrix, Subspace};
pub use mopup::{ApOptions, FitResult, RankSelection, UpdateOrder};
pub use spiked::{
    MatrixModelParams, MatrixSampleSet, NoiseSpec, ScoreDist, TensorModelParams, TensorSampleSet,
};
pub use tensor::Tensor;
pub use tensor_fit::TensorFitResult;
