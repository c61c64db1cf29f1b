//! Cardiac valve event timing from grayscale image sequences.

pub mod error;
pub mod cli;
pub mod eval;
pub mod events;
pub mod infer;
pub mod labels;
pub mod models;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
