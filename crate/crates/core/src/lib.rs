//! Core algorithms for turning stock-forum chatter and tick-level trades into
//! hourly sentiment indices, excess-turnover metrics, and pooled OLS reports.
//!
//! Everything in this crate is pure computation over in-memory data: lexicon
//! merging and maximum-matching segmentation, post scoring and hourly
//! aggregation, slot turnover and excess-turnover series, bull/bear phase
//! dating, and the regression/diagnostic stack (QR least squares, White and
//! Breusch-Godfrey tests, incomplete-gamma/beta tail probabilities).
//!
//! The crate is `no_std`-compatible (`alloc` required); file formats, IO, and
//! the pipeline CLI live in the companion `overtrade-cli` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod clean;
pub mod data;
pub mod diagnostics;
pub mod lexicon;
pub mod micro;
pub mod ols;
pub mod panel;
pub mod regimes;
pub mod sentiment;
pub mod stats;
pub mod table;
pub mod time;
