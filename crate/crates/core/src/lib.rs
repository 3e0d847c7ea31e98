//! Concept-supervised sparse auto-encoder toolkit.
//!
//! The latent space is designed, not discovered: an ordered concept
//! dictionary assigns each concept a block of `d` latent rows, a sample's
//! latent column is nonzero exactly on the blocks of its concepts, and
//! the nonzero values are tied per concept across all samples. A linear
//! decoder is trained jointly with the tied values to reconstruct the
//! embedding matrix — no encoder and no sparsity penalty are needed,
//! since the sparsity pattern is fixed a priori.
//!
//! Because inactive blocks decode to nothing (σ(0) = 0, no bias), a
//! code's reconstruction is the sum of its per-concept reconstructions.
//! That additivity is what makes latent-space edits — swapping, removing,
//! and inserting concepts — and composition of never-co-occurring
//! concept pairs well defined. The [`synth`] module generates worlds with
//! known additive ground truth so recovery and composition can be scored
//! exactly, and [`diagnostics`] carries the measurement and
//! gradient-checking harness.
//!
//! The crate is `no_std` (alloc only); file formats and the command-line
//! pipeline live in the companion `ssae-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod compose;
pub mod design;
pub mod diagnostics;
mod error;
pub mod model;
pub mod numerics;
pub mod synth;

pub use error::Error;
