//! Poisson-driven approximations of complex Brownian motion.
//!
//! One rate-2 Poisson process, thinned into two unit-rate counters by fair
//! coin flips per event, drives a family of piecewise-linear complex
//! processes that converge to complex Brownian motion as the scale shrinks.
//! This crate simulates those processes exactly, realizes the strong
//! Skorokhod-embedding coupling with a Brownian path (with its convergence
//! diagnostics and rate experiment), and packages every supporting result as
//! a falsifiable statistical check at desk scale.
//!
//! Entry points:
//! * [`poisson`] builds the jump skeleton of master events and thinning marks;
//! * [`transport`] integrates the complex transport paths over a skeleton;
//! * [`coupling`] couples the real part with a Brownian path at a skeleton
//!   of embedding stopping times, with exact or grid backends;
//! * [`stats`] and [`suites`] turn the supporting results into report
//!   entries with deterministic verdicts;
//! * [`appendix`] holds the exact combinatorial and series oracles.
//!
//! All randomness flows through [`rng`]: streams derive purely from
//! `(master_seed, stream_id)`, so ensembles reproduce bit for bit at any
//! worker count.

pub mod appendix;
pub mod coupling;
pub mod error;
pub mod poisson;
pub mod report;
pub mod rng;
pub mod stats;
pub mod suites;
pub mod transport;

pub use error::{Error, Result};
