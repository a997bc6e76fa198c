//! File formats, corpus IO, configuration, caching and the end-to-end
//! pipeline around [`semchange_core`].
//!
//! The `semchange` binary drives these stages from a TOML config; see
//! [`config::PipelineConfig`] for the file layout and
//! [`pipeline::run_pipeline`] for what a run writes.

pub mod cache;
pub mod config;
pub mod corpus_io;
mod error;
pub mod evaluate;
pub mod formats;
pub mod pipeline;
pub mod synth;

pub use error::{Error, InStage, Result, Stage};
pub use semchange_core as core;
