//! Core of the SPQE metric for super-resolution image quality assessment.
//!
//! SPQE scores an SR image with two learned regressors that share one
//! convolutional backbone: a referenced *structure* score computed from
//! multi-scale feature differences against a reference, and a no-reference
//! *perception* score computed from saliency-gated deep features. A third
//! head predicts an image-adaptive perception weight `W_p` and the final
//! score is the convex fusion `W_p * S_p + (1 - W_p) * S_s`.
//!
//! This crate is `no_std` (it needs `alloc`). It holds the networks with
//! hand-written backpropagation, the training loop, the classical FR/NR
//! metrics, rank/linear correlation, spectral-residual saliency and the
//! synthetic degradation generator. File formats, manifests and the CLI
//! live in the `spqe` crate.
#![no_std]

extern crate alloc;

pub mod backbone;
pub mod correlation;
pub mod data;
pub mod error;
pub mod fft;
pub mod gradcheck;
pub mod imgops;
pub mod layers;
pub mod metrics;
pub mod mlp;
pub mod model;
pub mod perception;
pub mod saliency;
pub mod scalar;
pub mod structure;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod weight;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Image, Plane, Tensor};
