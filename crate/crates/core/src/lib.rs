//! Exact simulator and analysis toolkit for an inhomogeneous contact
//! process on the non-negative integers.
//!
//! A single occupant at some site gives birth onto empty nearest neighbours
//! at site-dependent rates and dies at a site-dependent rate; site 0 only
//! births to the right. The survival phase structure is governed by the
//! tail ratio of birth to death rates, and this crate provides:
//!
//! - [`model`]: rate-profile families and their tail-ratio limits,
//! - [`simulator`]: the exact event-driven engine with reproducible seeds,
//! - [`front_chain`]: the dominating rightmost-site birth and death chain
//!   with exact absorption analytics,
//! - [`coupling`]: executable domination and jump-chain comparisons,
//! - [`experiments`]: Monte Carlo survival curves, critical-value
//!   bracketing and regime classification,
//! - [`config`] / [`report`]: the JSON configuration and flat-file outputs
//!   used by the command-line tool.

pub mod config;
pub mod coupling;
pub mod error;
pub mod experiments;
pub mod front_chain;
pub mod model;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ModelParams, RateProfile, RatioLimit};
pub use simulator::{Configuration, Event, Outcome, RunResult, StopRule};
