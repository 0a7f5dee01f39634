use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytic::purification_bounds;
use crate::cli::scenario::{Scenario, Topology};
use crate::engine::chain::{run_chain_trial, ChainConfig, ChainTrialStats};
use crate::engine::link::{run_link_trial, LinkTrialStats};
use crate::engine::purify::PURIFICATION_GROUP;
use crate::engine::runner::map_trials;
use crate::engine::stats::summarize;
use crate::params::{Probability, ProtocolKind};
use crate::{Error, Result};

/// One output line: a distance point summarized over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub protocol: ProtocolKind,
    pub preset: String,
    pub p_mid: Option<f64>,
    pub link_km: f64,
    /// Zero for closed-form rows.
    pub trials: usize,
    pub mean_rate_per_s: f64,
    pub ci90_low: f64,
    pub ci90_high: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::config(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

/// Per-trial outcome of one distance point.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialResult {
    Link(LinkTrialStats),
    Chain(ChainTrialStats),
}

impl TrialResult {
    pub fn rate_per_s(&self) -> f64 {
        match self {
            TrialResult::Link(s) => s.rate_per_s,
            TrialResult::Chain(s) => s.rate_per_s,
        }
    }

    /// Confirmed link pairs (single link) or end-to-end ebits (chain).
    pub fn events(&self) -> u64 {
        match self {
            TrialResult::Link(s) => s.entanglement_events,
            TrialResult::Chain(s) => s.end_to_end_ebits,
        }
    }
}

/// Runs all trials of one distance; trial `i` uses seed `base_seed + i`.
pub fn run_point(scenario: &Scenario, link_km: f64) -> Result<Vec<TrialResult>> {
    let model = scenario.link_model(link_km)?;
    let duration = scenario.duration(&model);
    let seed = |i: usize| scenario.base_seed.wrapping_add(i as u64);
    match scenario.topology {
        Topology::SingleLink => {
            map_trials(scenario.trials, |i| run_link_trial(&model, duration, seed(i)).map(TrialResult::Link))
        }
        Topology::Chain { link_count } => {
            let config = ChainConfig::uniform(model, link_count);
            map_trials(scenario.trials, |i| run_chain_trial(&config, duration, seed(i)).map(TrialResult::Chain))
        }
    }
}

fn row(scenario: &Scenario, link_km: f64, trials: usize, mean: f64, low: f64, high: f64) -> ResultRow {
    ResultRow {
        protocol: scenario.protocol,
        preset: scenario.preset_label().to_string(),
        p_mid: scenario.p_mid,
        link_km,
        trials,
        mean_rate_per_s: mean,
        ci90_low: low,
        ci90_high: high,
        seed: scenario.base_seed,
    }
}

/// Monte Carlo sweep over the scenario's distances, rows sorted by distance.
/// `progress` receives one line per finished distance.
pub fn run_sweep(scenario: &Scenario, mut progress: impl FnMut(&str)) -> Result<ResultTable> {
    let mut distances = scenario.distances_km.clone();
    distances.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(distances.len());
    for (idx, &km) in distances.iter().enumerate() {
        let rates: Vec<f64> = run_point(scenario, km)?.iter().map(TrialResult::rate_per_s).collect();
        let s = summarize(&rates)?;
        progress(&format!(
            "[{}/{}] {} L = {km} km: mean {:.6e} /s over {} trials",
            idx + 1,
            distances.len(),
            scenario.protocol,
            s.mean,
            s.sample_count
        ));
        rows.push(row(scenario, km, s.sample_count, s.mean, s.ci90_low, s.ci90_high));
    }
    Ok(ResultTable { rows })
}

/// Closed-form rates in the sweep's table shape (`trials = 0`, zero-width
/// interval). For chains the value is the purified-pair rate of one link,
/// an upper bound on the end-to-end rate.
pub fn analytic_table(scenario: &Scenario) -> Result<ResultTable> {
    let mut distances = scenario.distances_km.clone();
    distances.sort_by(f64::total_cmp);
    let purification = purification_bounds(Probability::clamped(crate::engine::chain::DEFAULT_EPSILON_IN), 1);
    let rows = distances
        .into_iter()
        .map(|km| {
            let link = scenario.link_model(km)?.analytic_rate().rate_per_s;
            let rate = match scenario.topology {
                Topology::SingleLink => link,
                Topology::Chain { .. } => link * purification.p_success.value() / PURIFICATION_GROUP as f64,
            };
            Ok(row(scenario, km, 0, rate, rate, rate))
        })
        .collect::<Result<_>>()?;
    Ok(ResultTable { rows })
}

/// Writes the table as CSV (header plus one line per row) or a JSON array.
pub fn emit_report<W: Write>(table: &ResultTable, format: ReportFormat, out: W) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::invalid("refusing to emit an empty table"));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &table.rows {
                w.serialize(r).map_err(csv_error)?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, table).map_err(|e| Error::Serialization(e.to_string()))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_json(text: &str) -> Result<ResultTable> {
    serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn read_csv(text: &str) -> Result<ResultTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_error)?;
    Ok(ResultTable { rows })
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Serialization(format!("{other:?}")),
        }
    } else {
        Error::Serialization(e.to_string())
    }
}
