//! Rate models and a discrete-event simulator for three quantum-repeater
//! link protocols: meet-in-the-middle, sender-receiver and midpoint-source.
//!
//! The crate is split into:
//!
//! - [`params`]: physical and protocol parameters, time and probability types.
//! - [`analytic`]: closed-form rates, utilizations and purification bounds.
//! - [`protocol`]: control state machines and fast round samplers.
//! - [`engine`]: Monte Carlo link and chain trials, summary statistics.
//! - [`cli`]: scenario parsing, distance sweeps and CSV/JSON reports.
//!
//! Trials run on a rayon pool when the `parallel` feature (on by default) is
//! enabled and sequentially otherwise. Results are identical either way.

pub mod analytic;
pub mod cli;
pub mod engine;
mod error;
pub mod params;
pub mod protocol;

pub use error::{Error, Result};
