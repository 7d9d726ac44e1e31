//! IO, file formats, configuration, and orchestration for the sentiment and
//! overtrading pipeline. The algorithms live in `overtrade-core`; this crate
//! reads the raw inputs, drives the stages, and writes every artifact.

pub mod config;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod synth;
