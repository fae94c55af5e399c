//! Two-stage human activity recognition: a decision tree handles the easy
//! (static) activities and hands everything else to a small 1D CNN.
//!
//! The crate covers the whole flow, from HAPT ingestion and windowing through
//! CART / random-forest training, a from-scratch 1D CNN engine, an analytical
//! MCU cost model, the cascade router and the Pareto sweep that ties them
//! together.
//!
//! Data-parallel loops (batch evaluation, grid searches, sweeps) go through
//! [`exec::Execution`]. With the default `parallel` feature they run on rayon;
//! without it every loop runs sequentially and produces identical results.

pub mod cascade;
pub mod cnn;
pub mod cost;
pub mod data;
pub mod error;
pub mod exec;
pub mod search;
pub mod trees;

pub use error::{Error, Result};

/// Label used for "not an easy class" in the decision-tree sub-task.
pub const FALLBACK_ID: u16 = 0;
