//! Physical and protocol parameters, plus the deterministic quantities derived
//! from them (propagation delay, transmission and success probabilities).

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;
pub const DEFAULT_REFRACTIVE_INDEX: f64 = 1.5;
/// 0.2 dB/km standard telecom fiber.
pub const DEFAULT_ATTENUATION_LENGTH_M: f64 = 22_000.0;

const PS_PER_NS: u64 = 1_000;
const PS_PER_US: u64 = 1_000_000;
const PS_PER_S: f64 = 1e12;

/// Simulation time as an integer count of picoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Duration(u64);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub const fn from_ps(ps: u64) -> Self {
        Duration(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        Duration(ns * PS_PER_NS)
    }

    pub const fn from_us(us: u64) -> Self {
        Duration(us * PS_PER_US)
    }

    /// Rounds to the nearest picosecond. Negative or non-finite input is rejected.
    pub fn from_secs_f64(secs: f64) -> Result<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return Err(Error::invalid(format!("duration must be finite and non-negative, got {secs} s")));
        }
        let ps = (secs * PS_PER_S).round();
        if ps > u64::MAX as f64 {
            return Err(Error::invalid(format!("duration {secs} s overflows the picosecond clock")));
        }
        Ok(Duration(ps as u64))
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_S
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_sub(self, rhs: Duration) -> Option<Duration> {
        self.0.checked_sub(rhs.0).map(Duration)
    }

    /// Splits into two parts summing exactly to `self`; the first is the floor half.
    pub const fn halves(self) -> (Duration, Duration) {
        let first = self.0 / 2;
        (Duration(first), Duration(self.0 - first))
    }

    /// Number of whole `period`s that fit in `self`.
    pub fn whole_periods(self, period: Duration) -> u64 {
        if period.is_zero() {
            0
        } else {
            self.0 / period.0
        }
    }
}

impl Add for Duration {
    type Output = Duration;

    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0.checked_add(rhs.0).expect("duration overflow"))
    }
}

impl AddAssign for Duration {
    fn add_assign(&mut self, rhs: Duration) {
        *self = *self + rhs;
    }
}

impl Mul<u64> for Duration {
    type Output = Duration;

    fn mul(self, rhs: u64) -> Duration {
        Duration(self.0.checked_mul(rhs).expect("duration overflow"))
    }
}

impl Sum for Duration {
    fn sum<I: Iterator<Item = Duration>>(iter: I) -> Duration {
        iter.fold(Duration::ZERO, Add::add)
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.0)
    }
}

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::config(format!("probability must lie in [0, 1], got {value}")))
        }
    }

    /// Clamps rounding noise just outside `[0, 1]`; NaN maps to zero.
    pub(crate) fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    pub const fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }

    pub fn powi(self, n: i32) -> Probability {
        Probability(self.0.powi(n))
    }
}

impl Mul for Probability {
    type Output = Probability;

    fn mul(self, rhs: Probability) -> Probability {
        Probability(self.0 * rhs.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// The optical channel between two neighbouring repeaters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub length_m: f64,
    pub refractive_index: f64,
    pub light_speed_m_per_s: f64,
    pub attenuation_length_m: f64,
}

impl LinkGeometry {
    /// Standard fiber (n = 1.5, 22 km attenuation length) of the given length.
    pub fn fiber(length_m: f64) -> Result<Self> {
        LinkGeometry {
            length_m,
            refractive_index: DEFAULT_REFRACTIVE_INDEX,
            light_speed_m_per_s: SPEED_OF_LIGHT_M_PER_S,
            attenuation_length_m: DEFAULT_ATTENUATION_LENGTH_M,
        }
        .validated()
    }

    pub fn fiber_km(length_km: f64) -> Result<Self> {
        Self::fiber(length_km * 1_000.0)
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.length_m.is_finite() && self.length_m >= 0.0) {
            return Err(Error::config(format!("link length must be >= 0 m, got {}", self.length_m)));
        }
        if !(self.refractive_index.is_finite() && self.refractive_index >= 1.0) {
            return Err(Error::config(format!(
                "refractive index must be >= 1, got {}",
                self.refractive_index
            )));
        }
        if !(self.light_speed_m_per_s.is_finite() && self.light_speed_m_per_s > 0.0) {
            return Err(Error::config("speed of light must be positive"));
        }
        if !(self.attenuation_length_m.is_finite() && self.attenuation_length_m > 0.0) {
            return Err(Error::config(format!(
                "attenuation length must be > 0 m, got {}",
                self.attenuation_length_m
            )));
        }
        Ok(self)
    }
}

/// Memory/photon interface characteristics of one repeater technology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub cycle_time: Duration,
    pub emission_fraction: Probability,
    pub collection_efficiency: Probability,
    pub label: String,
}

impl HardwareProfile {
    pub fn new(
        label: impl Into<String>,
        cycle_time: Duration,
        emission_fraction: Probability,
        collection_efficiency: Probability,
    ) -> Result<Self> {
        if cycle_time.is_zero() {
            return Err(Error::config("hardware cycle time must be positive"));
        }
        Ok(HardwareProfile { cycle_time, emission_fraction, collection_efficiency, label: label.into() })
    }

    pub fn interface_efficiency(&self) -> Probability {
        self.emission_fraction * self.collection_efficiency
    }
}

/// Linear-optics partial Bell-state analyzers cannot exceed this success probability.
pub const MAX_LINEAR_OPTICS_BSA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalStack {
    pub p_bsa: Probability,
    pub interface_efficiency: Probability,
    /// Entangled-pair generation probability of the midpoint source.
    pub p_mid: Probability,
}

impl OpticalStack {
    pub fn new(p_bsa: Probability, interface_efficiency: Probability, p_mid: Probability) -> Result<Self> {
        if p_bsa.value() > MAX_LINEAR_OPTICS_BSA {
            return Err(Error::config(format!(
                "p_bsa = {} exceeds the linear-optics ceiling of {MAX_LINEAR_OPTICS_BSA}",
                p_bsa
            )));
        }
        Ok(OpticalStack { p_bsa, interface_efficiency, p_mid })
    }

    pub fn for_hardware(profile: &HardwareProfile, p_bsa: Probability, p_mid: Probability) -> Result<Self> {
        Self::new(p_bsa, profile.interface_efficiency(), p_mid)
    }
}

/// Memory qubits assigned to one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBudget {
    /// N (or N'') for the symmetric protocols.
    pub n_per_side: usize,
    /// N_A.
    pub n_sender: usize,
    /// N_B.
    pub n_receiver: usize,
}

impl MemoryBudget {
    pub fn symmetric(n: usize) -> Self {
        MemoryBudget { n_per_side: n, n_sender: n, n_receiver: n }
    }

    /// Whether the sender/receiver split uses exactly the `2N` qubits of the symmetric budget.
    pub fn conserves_total(&self) -> bool {
        self.n_sender + self.n_receiver == 2 * self.n_per_side
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "mitm")]
    MeetInTheMiddle,
    #[serde(rename = "sr")]
    SenderReceiver,
    #[serde(rename = "mps")]
    MidpointSource,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] =
        [ProtocolKind::MeetInTheMiddle, ProtocolKind::SenderReceiver, ProtocolKind::MidpointSource];

    pub fn short_name(self) -> &'static str {
        match self {
            ProtocolKind::MeetInTheMiddle => "mitm",
            ProtocolKind::SenderReceiver => "sr",
            ProtocolKind::MidpointSource => "mps",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mitm" | "meetinthemiddle" | "meet-in-the-middle" => Ok(ProtocolKind::MeetInTheMiddle),
            "sr" | "senderreceiver" | "sender-receiver" => Ok(ProtocolKind::SenderReceiver),
            "mps" | "midpointsource" | "midpoint-source" => Ok(ProtocolKind::MidpointSource),
            other => Err(Error::config(format!("unknown protocol '{other}' (expected one of: mitm, sr, mps)"))),
        }
    }
}

/// Protocol selector together with its memory budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolConfig {
    MeetInTheMiddle { n: usize },
    SenderReceiver { n_sender: usize, n_receiver: usize },
    /// `attempts_per_bin` is K, the number of latch attempts (clock cycles) per bin.
    MidpointSource { n: usize, attempts_per_bin: usize },
}

impl ProtocolConfig {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolConfig::MeetInTheMiddle { .. } => ProtocolKind::MeetInTheMiddle,
            ProtocolConfig::SenderReceiver { .. } => ProtocolKind::SenderReceiver,
            ProtocolConfig::MidpointSource { .. } => ProtocolKind::MidpointSource,
        }
    }

    /// Memory slots on the (left, right) side of the link.
    pub fn slots(&self) -> (usize, usize) {
        match *self {
            ProtocolConfig::MeetInTheMiddle { n } => (n, n),
            ProtocolConfig::SenderReceiver { n_sender, n_receiver } => (n_sender, n_receiver),
            ProtocolConfig::MidpointSource { n, .. } => (n, n),
        }
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            ProtocolConfig::MidpointSource { attempts_per_bin: 0, .. } => {
                Err(Error::config("midpoint-source needs at least one attempt per bin"))
            }
            ok => Ok(ok),
        }
    }
}

/// Named hardware parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ion,
    Nv,
    Qd,
    Optimistic,
    Pessimistic,
}

/// p_BSA for SNSPD-based analyzers used with the ion, NV and QD presets.
pub const SNSPD_P_BSA: f64 = 0.24;

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Ion, Preset::Nv, Preset::Qd, Preset::Optimistic, Preset::Pessimistic];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ion => "ion",
            Preset::Nv => "nv",
            Preset::Qd => "qd",
            Preset::Optimistic => "optimistic",
            Preset::Pessimistic => "pessimistic",
        }
    }

    pub fn profile(self) -> HardwareProfile {
        let p = |v: f64| Probability(v);
        let (label, cycle, emission, collection) = match self {
            Preset::Ion => ("trapped ion (171Yb+)", Duration::from_us(1), 1.00, 0.05),
            Preset::Nv => ("diamond NV", Duration::from_ns(100), 0.05, 0.50),
            Preset::Qd => ("quantum dot (InGaAs)", Duration::from_ns(10), 1.00, 0.50),
            // Only the interface product is known for the two generic sets.
            Preset::Optimistic => ("optimistic", Duration::from_ns(1), 1.00, 0.50),
            Preset::Pessimistic => ("pessimistic", Duration::from_ns(1), 1.00, 0.10),
        };
        HardwareProfile { cycle_time: cycle, emission_fraction: p(emission), collection_efficiency: p(collection), label: label.into() }
    }

    pub fn p_bsa(self) -> Probability {
        match self {
            Preset::Ion | Preset::Nv | Preset::Qd => Probability(SNSPD_P_BSA),
            Preset::Optimistic => Probability(0.5),
            Preset::Pessimistic => Probability(0.1),
        }
    }

    pub fn valid_names() -> String {
        Preset::ALL.iter().map(|p| p.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown preset '{s}' (valid presets: {})", Preset::valid_names())))
    }
}

pub fn hardware_preset(name: &str) -> Result<HardwareProfile> {
    name.parse::<Preset>().map(Preset::profile)
}

/// One-way propagation delay `nL/c`, rounded to the nearest picosecond.
pub fn link_delay(geometry: &LinkGeometry) -> Duration {
    let secs = geometry.refractive_index * geometry.length_m / geometry.light_speed_m_per_s;
    Duration::from_secs_f64(secs).expect("validated geometry yields a finite delay")
}

/// Probability that a photon clears the memory/photon interface and half the fiber span.
pub fn optical_transmission(profile: &HardwareProfile, geometry: &LinkGeometry) -> Probability {
    let fiber = (-geometry.length_m / (2.0 * geometry.attenuation_length_m)).exp();
    Probability::clamped(profile.interface_efficiency().value() * fiber)
}

/// Per-attempt success probability `p` for meet-in-the-middle and sender-receiver.
pub fn link_success_probability(stack: &OpticalStack, p_optical: Probability) -> Probability {
    stack.p_bsa * p_optical * p_optical
}

/// Success probabilities for a single midpoint-source attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpsProbabilities {
    /// p_l'' = p_r'' = p_bsa * p_optical.
    pub p_side: Probability,
    pub p_mid: Probability,
    /// p'' = p_mid * p_side^2.
    pub p_pair: Probability,
}

pub fn mps_success_probability(stack: &OpticalStack, p_optical: Probability) -> MpsProbabilities {
    let p_side = stack.p_bsa * p_optical;
    MpsProbabilities { p_side, p_mid: stack.p_mid, p_pair: stack.p_mid * p_side * p_side }
}
