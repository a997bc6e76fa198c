//! Unsupervised lexical semantic change detection between two time periods.
//!
//! The crate trains implicitly aligned temporal word representations over a
//! [`corpus::TimeBinnedCorpus`] with one of three backends:
//!
//! * [`tri`]: Temporal Random Indexing, shared sparse random index vectors.
//! * [`tr`]: Temporal Referencing, skip-gram with negative sampling where
//!   only target occurrences carry a period tag.
//! * [`collocation`]: Dice-scored collocation profiles per period.
//!
//! Per-target cross-period similarities ([`similarity`]) are then ranked by
//! `1 - |sim|` and labelled stable/changed by two-component Gaussian mixture
//! clustering or threshold baselines ([`detect`]). [`eval`] holds the task
//! metrics and a synthetic diachronic corpus generator with known gold.
//!
//! Everything here is pure computation over in-memory data and builds with
//! `alloc` only. File formats, configuration and the command line live in the
//! `semchange` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod collocation;
pub mod corpus;
pub mod detect;
pub mod embedding;
mod error;
pub mod eval;
mod math;
pub mod similarity;
pub mod tr;
pub mod tri;

pub use error::{Error, Result};
