use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::params::{
    Duration, HardwareProfile, LinkGeometry, OpticalStack, Preset, Probability, ProtocolKind,
    DEFAULT_ATTENUATION_LENGTH_M, DEFAULT_REFRACTIVE_INDEX,
};
use crate::protocol::LinkModel;
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 1000;
pub const CHAIN_DURATION_IN_TAU_LINK: u64 = 1_000;
pub const SINGLE_LINK_DURATION_IN_TAU_LINK: u64 = 10_000;
pub const DEFAULT_CHAIN_LINKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Topology {
    SingleLink,
    Chain { link_count: usize },
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::SingleLink => f.write_str("single_link"),
            Topology::Chain { link_count } => write!(f, "chain({link_count})"),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    /// Accepts `single_link`, `single-link`, `chain` (ten links), `chain(k)` and `chain:k`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "single_link" || s == "single-link" {
            return Ok(Topology::SingleLink);
        }
        let count = if s == "chain" {
            Some(DEFAULT_CHAIN_LINKS.to_string())
        } else if let Some(rest) = s.strip_prefix("chain(").and_then(|r| r.strip_suffix(')')) {
            Some(rest.to_string())
        } else {
            s.strip_prefix("chain:").map(str::to_string)
        };
        match count.map(|c| c.trim().parse::<usize>()) {
            Some(Ok(link_count)) if link_count >= 1 => Ok(Topology::Chain { link_count }),
            Some(_) => Err(Error::config(format!("invalid link count in topology '{s}'"))),
            None => Err(Error::config(format!(
                "unknown topology '{s}' (expected single_link or chain(<links>))"
            ))),
        }
    }
}

impl TryFrom<String> for Topology {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Topology> for String {
    fn from(t: Topology) -> String {
        t.to_string()
    }
}

/// A named parameter set: hardware preset plus topology, memory and distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bundle {
    pub name: &'static str,
    pub hardware: Preset,
    pub topology: Topology,
    pub memory_n: usize,
}

pub const BUNDLES: [Bundle; 5] = [
    Bundle {
        name: "fig8-optimistic",
        hardware: Preset::Optimistic,
        topology: Topology::Chain { link_count: DEFAULT_CHAIN_LINKS },
        memory_n: 100,
    },
    Bundle {
        name: "fig9-pessimistic",
        hardware: Preset::Pessimistic,
        topology: Topology::Chain { link_count: DEFAULT_CHAIN_LINKS },
        memory_n: 100,
    },
    Bundle { name: "fig10-ion", hardware: Preset::Ion, topology: Topology::SingleLink, memory_n: 3 },
    Bundle { name: "fig10-nv", hardware: Preset::Nv, topology: Topology::SingleLink, memory_n: 3 },
    Bundle { name: "fig10-qd", hardware: Preset::Qd, topology: Topology::SingleLink, memory_n: 3 },
];

/// Hardware preset or bundle name, resolved to a bundle.
pub fn lookup_preset(name: &str) -> Result<Bundle> {
    if let Some(b) = BUNDLES.iter().find(|b| b.name.eq_ignore_ascii_case(name)) {
        return Ok(*b);
    }
    let hardware = name.parse::<Preset>().map_err(|_| {
        let bundles: Vec<_> = BUNDLES.iter().map(|b| b.name).collect();
        Error::config(format!(
            "unknown preset '{name}' (valid presets: {}, {})",
            Preset::valid_names(),
            bundles.join(", ")
        ))
    })?;
    Ok(match hardware {
        Preset::Optimistic => BUNDLES[0],
        Preset::Pessimistic => BUNDLES[1],
        Preset::Ion => BUNDLES[2],
        Preset::Nv => BUNDLES[3],
        Preset::Qd => BUNDLES[4],
    })
}

/// Distances `start, start + step, ...` up to and including `end`.
pub fn parse_sweep(range: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = range.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        return Err(Error::config(format!("sweep '{range}' must look like start:end:step")));
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::config(format!("sweep '{range}': '{s}' is not a number")))
    };
    let (start, end, step) = (num(start)?, num(end)?, num(step)?);
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::config(format!("sweep '{range}': step must be positive")));
    }
    if !(start.is_finite() && end.is_finite()) || end < start {
        return Err(Error::config(format!("sweep '{range}': end must not precede start")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Fully resolved run description. Serializes to the flat config-file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub protocol: ProtocolKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_mid: Option<f64>,
    pub topology: Topology,
    pub memory_n: usize,
    pub distances_km: Vec<f64>,
    pub trials: usize,
    pub duration_in_tau_link: u64,
    pub base_seed: u64,
    pub cycle_time_ps: u64,
    pub emission_fraction: f64,
    pub collection_efficiency: f64,
    pub p_bsa: f64,
    pub refractive_index: f64,
    pub attenuation_length_km: f64,
}

/// Partially specified scenario, as read from a config file or flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioInput {
    pub protocol: Option<String>,
    pub preset: Option<String>,
    pub p_mid: Option<f64>,
    pub topology: Option<String>,
    pub memory_n: Option<usize>,
    pub distances_km: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub duration_in_tau_link: Option<u64>,
    pub base_seed: Option<u64>,
    pub cycle_time_ps: Option<u64>,
    pub emission_fraction: Option<f64>,
    pub collection_efficiency: Option<f64>,
    pub p_bsa: Option<f64>,
    pub refractive_index: Option<f64>,
    pub attenuation_length_km: Option<f64>,
}

macro_rules! overlay_fields {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )*
    };
}

impl ScenarioInput {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config file: {}", e.message())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(mut self, over: ScenarioInput) -> Self {
        overlay_fields!(self, over; protocol, preset, p_mid, topology, memory_n, distances_km, trials,
            duration_in_tau_link, base_seed, cycle_time_ps, emission_fraction, collection_efficiency, p_bsa,
            refractive_index, attenuation_length_km);
        self
    }

    pub fn resolve(self) -> Result<Scenario> {
        let protocol: ProtocolKind = self
            .protocol
            .as_deref()
            .ok_or_else(|| Error::config("missing protocol (expected one of: mitm, sr, mps)"))?
            .parse()?;
        let bundle = self.preset.as_deref().map(lookup_preset).transpose()?;
        let hw = bundle.map(|b| (b.hardware.profile(), b.hardware.p_bsa()));

        let required = |v: Option<f64>, name: &str, from_preset: Option<f64>| {
            v.or(from_preset)
                .ok_or_else(|| Error::config(format!("missing {name} (give a preset or set it explicitly)")))
        };
        let cycle_time_ps = self
            .cycle_time_ps
            .or(hw.as_ref().map(|(p, _)| p.cycle_time.as_ps()))
            .ok_or_else(|| Error::config("missing cycle_time_ps (give a preset or set it explicitly)"))?;
        let emission_fraction =
            required(self.emission_fraction, "emission_fraction", hw.as_ref().map(|(p, _)| p.emission_fraction.value()))?;
        let collection_efficiency = required(
            self.collection_efficiency,
            "collection_efficiency",
            hw.as_ref().map(|(p, _)| p.collection_efficiency.value()),
        )?;
        let p_bsa = required(self.p_bsa, "p_bsa", hw.as_ref().map(|(_, b)| b.value()))?;

        let p_mid = match (protocol, self.p_mid) {
            (ProtocolKind::MidpointSource, None) => {
                return Err(Error::config("protocol mps needs p_mid (--p-mid)"));
            }
            (ProtocolKind::MidpointSource, Some(v)) => Some(v),
            (_, Some(_)) => return Err(Error::config(format!("p_mid only applies to mps, not {protocol}"))),
            (_, None) => None,
        };

        let topology = match self.topology.as_deref() {
            Some(t) => t.parse()?,
            None => bundle.map_or(Topology::SingleLink, |b| b.topology),
        };
        let memory_n = self.memory_n.or(bundle.map(|b| b.memory_n)).unwrap_or(100);
        let distances_km = match self.distances_km {
            Some(d) => d,
            None if bundle.is_some() => parse_sweep("5:50:5")?,
            None => return Err(Error::config("missing distances (--sweep start:end:step or --distances)")),
        };
        let duration_in_tau_link = self.duration_in_tau_link.unwrap_or(match topology {
            Topology::SingleLink => SINGLE_LINK_DURATION_IN_TAU_LINK,
            Topology::Chain { .. } => CHAIN_DURATION_IN_TAU_LINK,
        });

        let scenario = Scenario {
            protocol,
            preset: bundle.map(|b| b.hardware),
            p_mid,
            topology,
            memory_n,
            distances_km,
            trials: self.trials.unwrap_or(DEFAULT_TRIALS),
            duration_in_tau_link,
            base_seed: self.base_seed.unwrap_or(0),
            cycle_time_ps,
            emission_fraction,
            collection_efficiency,
            p_bsa,
            refractive_index: self.refractive_index.unwrap_or(DEFAULT_REFRACTIVE_INDEX),
            attenuation_length_km: self.attenuation_length_km.unwrap_or(DEFAULT_ATTENUATION_LENGTH_M / 1000.0),
        };
        scenario.validated()
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        ScenarioInput::from_toml(text)?.resolve()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validated(self) -> Result<Self> {
        if self.distances_km.is_empty() {
            return Err(Error::config("distances must not be empty"));
        }
        if let Some(d) = self.distances_km.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::config(format!("distance {d} km must be positive")));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.duration_in_tau_link == 0 {
            return Err(Error::config("duration_in_tau_link must be at least 1"));
        }
        if i64::try_from(self.base_seed).is_err() {
            return Err(Error::config(format!("base_seed {} exceeds {}", self.base_seed, i64::MAX)));
        }
        if let Some(p) = self.p_mid {
            Probability::new(p).map_err(|_| Error::config(format!("p_mid {p} outside [0, 1]")))?;
        }
        self.optical_stack()?;
        self.geometry(self.distances_km[0])?;
        Ok(self)
    }

    pub fn preset_label(&self) -> &'static str {
        self.preset.map_or("custom", Preset::name)
    }

    pub fn profile(&self) -> Result<HardwareProfile> {
        let prob = |v: f64, name: &str| {
            Probability::new(v).map_err(|_| Error::config(format!("{name} {v} outside [0, 1]")))
        };
        HardwareProfile::new(
            self.preset.map_or_else(|| "custom".to_string(), |p| p.profile().label),
            Duration::from_ps(self.cycle_time_ps),
            prob(self.emission_fraction, "emission_fraction")?,
            prob(self.collection_efficiency, "collection_efficiency")?,
        )
    }

    pub fn optical_stack(&self) -> Result<OpticalStack> {
        let profile = self.profile()?;
        let p_bsa = Probability::new(self.p_bsa).map_err(|_| Error::config(format!("p_bsa {} outside [0, 1]", self.p_bsa)))?;
        let p_mid = Probability::new(self.p_mid.unwrap_or(1.0))?;
        OpticalStack::for_hardware(&profile, p_bsa, p_mid)
    }

    pub fn geometry(&self, link_km: f64) -> Result<LinkGeometry> {
        LinkGeometry {
            length_m: link_km * 1000.0,
            refractive_index: self.refractive_index,
            attenuation_length_m: self.attenuation_length_km * 1000.0,
            ..LinkGeometry::fiber(1.0)?
        }
        .validated()
    }

    pub fn link_model(&self, link_km: f64) -> Result<LinkModel> {
        LinkModel::from_hardware(
            self.protocol,
            self.memory_n,
            &self.profile()?,
            &self.optical_stack()?,
            &self.geometry(link_km)?,
        )
    }

    /// Simulated time for one trial over links of model `model`.
    pub fn duration(&self, model: &LinkModel) -> Duration {
        model.tau_link * self.duration_in_tau_link
    }

    pub fn link_count(&self) -> usize {
        match self.topology {
            Topology::SingleLink => 1,
            Topology::Chain { link_count } => link_count,
        }
    }
}
