//! Differentially private outsourced anomaly detection.
//!
//! A data owner releases Laplace-noised histogram counts to an analyst that
//! runs KS-based anomaly detection. The analyst learns the benign count
//! distribution from the releases and feeds it back, so later rounds can be
//! calibrated with a sampled sensitivity that is small for benign values
//! and large for improbable ones.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod detector;
pub mod disentangler;
pub mod distance;
pub mod error;
pub mod learner;
pub mod mechanisms;
pub mod protocol;
pub mod rng;
pub mod sampler;
pub mod types;
pub mod wire;

pub use error::{Error, Result};
pub use types::{CountMatrix, DiscretePdf, Histogram, Phase, PrivacyParams, Record};
