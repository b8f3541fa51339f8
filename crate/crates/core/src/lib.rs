//! Three-stage hybrid malware triage pipeline.
//!
//! The pipeline scores a file through three layers:
//!
//! 1. **Static stage** — a random forest over features computed from the
//!    file at rest (byte histogram, entropy, header fields).
//! 2. **Behavioral stage** — an LSTM over the encoded runtime event trace.
//! 3. **Fusion stage** — a gradient-boosted meta-learner over the two
//!    stage outputs concatenated with execution-context features, yielding
//!    the final risk score and verdict.
//!
//! Around the pipeline sit the supporting pieces: dataset handling with
//! stratified k-fold splits and SMOTE rebalancing, binary classification
//! metrics, and a replayable endpoint-monitoring agent that drives a
//! quarantine/alert/rollback state machine over recorded event streams.
//!
//! Everything in this crate is pure computation: given the same inputs and
//! seed, every operation produces bit-identical outputs. File formats, the
//! CLI, and wall-clock timing live in the companion `triscan` crate.
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature when building without `std`.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("triscan-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod agent;
pub mod dataset;
pub mod features;
pub mod forest;
pub mod fusion;
pub mod lstm;
pub mod metrics;
pub mod pipeline;

pub(crate) mod math;
pub(crate) mod rng;

pub use dataset::Label;
