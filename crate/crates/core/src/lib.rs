//! Neighborhood-level panel causal-inference engine.
//!
//! The crate turns raw job-posting records into a neighborhood-year panel and
//! runs the full estimator stack on it: two-way fixed-effects regression with
//! cluster-robust covariance, pre-determined difference-in-differences and
//! event studies, triple-difference and interaction mechanism models, Fisher
//! randomization inference, Bartik shift-share instrumental variables, and
//! local spatial association (LISA) clustering. A deterministic synthetic-data
//! generator with planted ground truth serves as the verification oracle for
//! every estimator.
//!
//! All operations are pure functions over immutable inputs; anything random is
//! driven by an explicit seed through counter-based ChaCha8 streams, so results
//! are bit-reproducible regardless of thread count.

#![forbid(unsafe_code)]

pub mod bartik;
pub mod designs;
pub mod error;
pub mod estimator;
pub mod exposure;
pub mod panel;
pub mod permutation;
pub mod spatial;
pub mod synth;

pub use error::EngineError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, EngineError>;
