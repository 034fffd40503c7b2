//! Staleness-minimizing batch and update allocation for asynchronous mobile
//! edge learning.
//!
//! A learner `k` that receives `d_k` samples and runs `tau_k` local updates
//! inside a global cycle of length `T` spends
//! `c2 * tau_k * d_k + c1 * d_k + c0` seconds (see [`edge_model`]). The
//! [`allocator`] picks `(tau_k, d_k)` so that every learner fills the cycle
//! while the largest pairwise gap in update counts is as small as possible.
//! [`divergence`] replays allocations on synthetic convex learners and
//! [`harness`] ties everything to scenarios, sweeps and the CLI.
//!
//! Batch workloads (sweeps, oracle enumeration, randomized suites) go through
//! [`exec::Execution`], which runs on rayon when the `parallel` feature is on
//! and falls back to a plain loop otherwise.

pub mod allocator;
pub mod divergence;
pub mod edge_model;
mod error;
pub mod exec;
pub mod harness;
pub mod staleness;

pub use error::{Error, Result};
