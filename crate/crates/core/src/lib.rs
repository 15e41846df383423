//! Memorization audits for video diffusion models.
//!
//! Generated videos are compared to a training set frame by frame
//! ([`content`]) and flow by flow ([`motion`]); sampling trajectories yield
//! cheap inference-time signals ([`detection`]); near-duplicate training data
//! is found with an exact top-k scan ([`dedup`]); [`eval`] scores all of it
//! against labels. Inputs use the formats in [`io`]. [`synth`] builds
//! fixtures with planted memorization.

pub mod audit;
pub mod cli;
pub mod content;
pub mod dedup;
pub mod detection;
pub mod error;
pub mod eval;
pub mod io;
pub mod motion;
pub mod synth;

pub use error::{Error, FormatError, Result};
