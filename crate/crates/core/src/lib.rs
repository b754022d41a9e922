// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse changepoint estimation for high-dimensional time series with
//! missing values.
//!
//! The data are a `p x n` matrix in which each coordinate is observed at an
//! arbitrary subset of time points ([`MaskedMatrix`]). The MissCUSUM
//! transform ([`miss_cusum`]) computes, for every coordinate and split, the
//! scaled difference of the observed means on either side. A sparse
//! direction is estimated from that matrix by an l1-penalised rank-one
//! approximation ([`estimate_projection`]), and the changepoint is the
//! maximiser of the projected series ([`miss_inspect`]).
//!
//! ```
//! use misscusum::{detect, DetectConfig, MaskedMatrix};
//!
//! let m = MaskedMatrix::from_rows(
//!     &[vec![0.0, 0.0, 1.0, 1.0], vec![5.0, 0.0, 5.0, 5.0]],
//!     &[vec![true; 4], vec![true, false, true, true]],
//! )
//! .unwrap();
//! let est = detect(&m, 0.1, &DetectConfig::default()).unwrap();
//! assert_eq!(est.z_hat, 2);
//! ```

#![forbid(unsafe_code)]

pub mod campaign;
pub mod cusum;
pub mod data;
pub mod detect;
pub mod error;
pub mod io;
pub mod linalg;
pub mod projection;
pub mod report;
pub mod segment;
pub mod sigma;
pub mod simulation;

pub use cusum::{cusum, gamma_vector, miss_cusum, noiseless_peak, CusumMatrix, GammaVector};
pub use data::{MaskedMatrix, ObservationCounts};
pub use detect::{
    detect, detect_with_lambda, median_argmax, miss_inspect, miss_inspect_split,
    ChangepointEstimate, DetectConfig, LambdaRule, SplitLambdaLength, Variant,
};
pub use error::{Error, Result};
pub use projection::{
    default_lambda, estimate_projection, soft_threshold, two_to_inf_norm, ProjectionEstimate,
    SolverConfig,
};
pub use segment::{binary_segmentation, SegmentationConfig, SegmentationResult, SigmaMode};
pub use sigma::{estimate_sigma, resolve_sigma, SigmaSource};
