//! File formats, manifests, evaluation harness and command-line driver
//! around [`spqe_core`].

pub mod checkpoint;
pub mod cli;
pub mod container;
pub mod error;
pub mod harness;
pub mod imageio;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod synth_io;

pub use error::{Error, Result};
pub use spqe_core as core;

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
