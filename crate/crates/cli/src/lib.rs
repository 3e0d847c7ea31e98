//! File formats and report shapes for the `ssae` command-line pipeline.
//!
//! The binary orchestrates the whole workflow file-to-file:
//! `synth` → `train` → `compose` / `eval` / `gradcheck`.

pub mod io;
pub mod report;
