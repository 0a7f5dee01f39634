//! Monte Carlo driver: single-link trials, repeater-chain trials with
//! purification and swapping, and summary statistics.

pub mod chain;
pub mod link;
pub mod purify;
pub mod queue;
pub mod runner;
pub mod stats;

pub use chain::{run_chain_trial, ChainConfig, ChainCounters, ChainTrialStats};
pub use link::{run_link_trial, run_link_trial_stepped, LinkTrialStats, SteppedLink};
pub use purify::{purify, LinkPair, PURIFICATION_GROUP};
pub use queue::{EventKind, EventQueue, Scheduled, TieKey};
pub use runner::map_trials;
pub use stats::{median, summarize, SummaryStats};
