//! Command-line front end: scenario parsing, distance sweeps and reports.

mod scenario;
mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::Parser;

pub use scenario::{
    lookup_preset, parse_sweep, Bundle, Scenario, ScenarioInput, Topology, BUNDLES, CHAIN_DURATION_IN_TAU_LINK,
    DEFAULT_TRIALS, SINGLE_LINK_DURATION_IN_TAU_LINK,
};
pub use sweep::{
    analytic_table, emit_report, read_csv, read_json, run_point, run_sweep, ReportFormat, ResultRow, ResultTable,
    TrialResult,
};

use crate::engine::link::run_link_trial_stepped;
use crate::protocol::TraceRecord;
use crate::{Error, Result};

pub const SEED_ENV: &str = "REPLINK_SEED";

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "replink", version, about = "Entanglement-distribution rates for repeater link protocols")]
pub struct Cli {
    /// mitm, sr or mps.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Hardware preset (ion, nv, qd, optimistic, pessimistic) or scenario bundle (fig8-optimistic, ...).
    #[arg(long)]
    pub preset: Option<String>,
    /// Entangled-pair generation probability of the midpoint source (mps only).
    #[arg(long = "p-mid")]
    pub p_mid: Option<f64>,
    /// single-link, chain or chain(<links>).
    #[arg(long)]
    pub topology: Option<String>,
    /// Memory qubits per link side.
    #[arg(long = "n")]
    pub memory_n: Option<usize>,
    /// Link distances as start:end:step in km.
    #[arg(long, conflicts_with = "distances")]
    pub sweep: Option<String>,
    /// Comma-separated link distances in km.
    #[arg(long, value_delimiter = ',')]
    pub distances: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Trial length in units of the link delay.
    #[arg(long)]
    pub duration: Option<u64>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "cycle-time-ps")]
    pub cycle_time_ps: Option<u64>,
    #[arg(long = "emission-fraction")]
    pub emission_fraction: Option<f64>,
    #[arg(long = "collection-efficiency")]
    pub collection_efficiency: Option<f64>,
    #[arg(long = "p-bsa")]
    pub p_bsa: Option<f64>,
    #[arg(long = "refractive-index")]
    pub refractive_index: Option<f64>,
    #[arg(long = "attenuation-length-km")]
    pub attenuation_length_km: Option<f64>,
    /// TOML file with scenario fields; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Output file (standard output if absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Emit closed-form rates instead of running trials.
    #[arg(long)]
    pub analytic: bool,
    /// Step the state machines for one trial at the first distance and print the transition trace.
    #[arg(long)]
    pub trace: bool,
    /// Rounds to trace.
    #[arg(long = "trace-rounds", default_value_t = 1)]
    pub trace_rounds: u64,
    /// Print the resolved scenario as a config file and exit.
    #[arg(long = "dump-config")]
    pub dump_config: bool,
    /// No progress lines on standard error.
    #[arg(long, short)]
    pub quiet: bool,
}

impl Cli {
    fn flag_input(&self) -> ScenarioInput {
        ScenarioInput {
            protocol: self.protocol.clone(),
            preset: self.preset.clone(),
            p_mid: self.p_mid,
            topology: self.topology.clone(),
            memory_n: self.memory_n,
            distances_km: self.distances.clone(),
            trials: self.trials,
            duration_in_tau_link: self.duration,
            base_seed: self.seed,
            cycle_time_ps: self.cycle_time_ps,
            emission_fraction: self.emission_fraction,
            collection_efficiency: self.collection_efficiency,
            p_bsa: self.p_bsa,
            refractive_index: self.refractive_index,
            attenuation_length_km: self.attenuation_length_km,
        }
    }

    /// Config file, then the seed environment variable, then flags.
    pub fn scenario(&self, env_seed: Option<&str>) -> Result<Scenario> {
        let mut input = match &self.config {
            Some(path) => ScenarioInput::from_file(path)?,
            None => ScenarioInput::default(),
        };
        if let Some(raw) = env_seed {
            let seed = raw
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::config(format!("{SEED_ENV}='{raw}' is not a non-negative integer")))?;
            input.base_seed = Some(seed);
        }
        let mut flags = self.flag_input();
        if let Some(range) = &self.sweep {
            flags.distances_km = Some(parse_sweep(range)?);
        }
        input.overlay(flags).resolve()
    }
}

/// Parses flags and the environment, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&cli, env_seed.as_deref()) {
        Ok(()) => 0,
        // Reader went away (e.g. piped into `head`).
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<()> {
    let scenario = cli.scenario(env_seed)?;
    let format: ReportFormat = cli.format.parse()?;

    if cli.dump_config {
        let text = scenario.to_toml()?;
        return with_output(cli, |w| Ok(w.write_all(text.as_bytes())?));
    }
    if cli.trace {
        return trace(cli, &scenario);
    }

    let table = if cli.analytic {
        analytic_table(&scenario)?
    } else {
        let quiet = cli.quiet;
        run_sweep(&scenario, |line| {
            if !quiet {
                eprintln!("{line}");
            }
        })?
    };
    with_output(cli, |w| emit_report(&table, format, w))
}

/// One stepped trial of a single link at the first distance.
fn trace(cli: &Cli, scenario: &Scenario) -> Result<()> {
    let model = scenario.link_model(scenario.distances_km[0])?;
    let duration = model.round_time() * cli.trace_rounds.max(1);
    with_output(cli, |w| {
        writeln!(w, "time_ps,node,slot,old_state,new_state,trigger")?;
        let mut failed: Option<io::Error> = None;
        let mut sink = |r: TraceRecord| {
            if failed.is_none() {
                if let Err(e) = writeln!(w, "{r}") {
                    failed = Some(e);
                }
            }
        };
        run_link_trial_stepped(&model, duration, scenario.base_seed, Some(&mut sink))?;
        failed.map_or(Ok(()), |e| Err(e.into()))
    })
}

fn with_output(cli: &Cli, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &cli.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
