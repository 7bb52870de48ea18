//! Patient-aware pool-based active learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: patient-grouped samples, split invariants, CSV ingestion and a
//!   synthetic benchmark generator.
//! - [`learner`]: a small softmax classifier (optionally with one tanh hidden
//!   layer) trained with Adam; produces posteriors and gradient embeddings.
//! - [`acquisition`]: the baseline query strategies (random, entropy, margin,
//!   least confidence, BADGE).
//! - [`decal`]: the unique-patient batch constraint and patient-diverse
//!   initialization that plug into any of the baselines.
//! - [`harness`]: trial orchestration, multi-seed aggregation, metrics,
//!   config files and report emission.

pub mod acquisition;
pub mod dataset;
pub mod decal;
mod error;
pub mod harness;
pub mod learner;
pub mod seed;

pub use error::{Error, Result};
