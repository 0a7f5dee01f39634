//! Control state machines for the three link protocols, plus round samplers
//! that draw the same outcome distribution without stepping the machines.
//!
//! Slot and transmission indices are 1-based throughout, matching the
//! message formats (`transmission i`, `memory qubit j`, `pair k`).

mod mitm;
mod mps;
mod sampler;
mod sr;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use mitm::{MitmInput, MitmNode};
pub use mps::{MpsInput, MpsReceiver};
pub use sampler::{sample_pair_count, sample_round};
pub use sr::{SrInput, SrReceiver};

use crate::analytic::{self, MpsEntanglement, RateBundle};
use crate::params::{
    link_delay, optical_transmission, Duration, HardwareProfile, LinkGeometry, OpticalStack, Probability,
    ProtocolConfig, ProtocolKind,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotState {
    Free,
    /// Photon sent, waiting for the analyzer's verdict.
    PhotonEmitted,
    /// Midpoint-source slot holding pair `pair`, not yet confirmed.
    Latched { pair: usize },
    ConfirmedEntangled { partner: usize },
    /// Receiver intake refusing photons (memory full, or bin already latched).
    Rejecting,
}

impl fmt::Display for SlotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotState::Free => f.write_str("free"),
            SlotState::PhotonEmitted => f.write_str("emitted"),
            SlotState::Latched { pair } => write!(f, "latched({pair})"),
            SlotState::ConfirmedEntangled { partner } => write!(f, "entangled({partner})"),
            SlotState::Rejecting => f.write_str("rejecting"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Success,
    Failure,
}

/// Classical heralding message.
///
/// - meet-in-the-middle: `M_i` from the midpoint analyzer to both nodes.
/// - sender-receiver: "transmission i failed" / "transmission i is entangled
///   with memory qubit j", from receiver to sender.
/// - midpoint-source: "photon k was latched into memory i" / "photon k in bin
///   i was rejected", exchanged between the receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BsaMessage {
    pub transmission_index: usize,
    pub verdict: Verdict,
    pub receiver_slot: Option<usize>,
    pub pair_id: Option<usize>,
}

impl BsaMessage {
    pub fn midpoint(transmission_index: usize, verdict: Verdict) -> Self {
        BsaMessage { transmission_index, verdict, receiver_slot: None, pair_id: None }
    }

    pub fn latched_into(transmission_index: usize, receiver_slot: usize) -> Self {
        BsaMessage { transmission_index, verdict: Verdict::Success, receiver_slot: Some(receiver_slot), pair_id: None }
    }

    pub fn transmission_failed(transmission_index: usize) -> Self {
        BsaMessage { transmission_index, verdict: Verdict::Failure, receiver_slot: None, pair_id: None }
    }

    pub fn latch_report(bin: usize, pair: usize, verdict: Verdict) -> Self {
        BsaMessage { transmission_index: bin, verdict, receiver_slot: None, pair_id: Some(pair) }
    }
}

/// Side effects requested by a state machine step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    EmitPhoton { slot: usize },
    Send(BsaMessage),
    /// `slot == None` refers to the receiver's intake rather than a memory slot.
    Transition { slot: Option<usize>, from: SlotState, to: SlotState },
    /// Round finished; `(local slot, remote slot)` pairs that are entangled.
    RoundComplete { pairs: Vec<(usize, usize)> },
}

/// One confirmed-entanglement round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub entangled_pairs: usize,
    /// `(left slot, right slot)`.
    pub slot_map: Vec<(usize, usize)>,
    pub wall_time: Duration,
}

/// Event trace line: `time_ps,node,slot,old_state,new_state,trigger`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: Duration,
    pub node: usize,
    pub slot: Option<usize>,
    pub old_state: SlotState,
    pub new_state: SlotState,
    pub trigger: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slot = self.slot.map_or_else(|| "-".to_string(), |s| s.to_string());
        write!(f, "{},{},{},{},{},{}", self.time.as_ps(), self.node, slot, self.old_state, self.new_state, self.trigger)
    }
}

pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Two-photon Bell-state measurement with loss heralding: success needs both photons.
pub fn sample_bsa<R: Rng + ?Sized>(rng: &mut R, left_arrived: bool, right_arrived: bool, p_bsa: Probability) -> Verdict {
    if left_arrived && right_arrived && bernoulli(rng, p_bsa.value()) {
        Verdict::Success
    } else {
        Verdict::Failure
    }
}

/// Per-attempt channel probabilities seen by a link.
///
/// For meet-in-the-middle `p_left`/`p_right` are the photon arrival
/// probabilities at the midpoint analyzer. For sender-receiver `p_left` is the
/// sender's photon reaching the receiver and `p_right` the receiver's local
/// photon. For midpoint-source they are the arrival probabilities of each
/// half of a pair, and a side latches with `p_bsa * p_side`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub p_bsa: Probability,
    pub p_left: Probability,
    pub p_right: Probability,
    pub p_mid: Probability,
}

impl Channel {
    /// Composite success probability `p` with lossless arrival.
    pub fn heralded(p: Probability) -> Self {
        Channel { p_bsa: p, p_left: Probability::ONE, p_right: Probability::ONE, p_mid: Probability::ONE }
    }

    /// Midpoint-source channel with per-side latch probability `p_side`.
    pub fn midpoint(p_side: Probability, p_mid: Probability) -> Self {
        Channel { p_bsa: p_side, p_left: Probability::ONE, p_right: Probability::ONE, p_mid }
    }

    pub fn from_optics(kind: ProtocolKind, stack: &OpticalStack, p_optical: Probability) -> Self {
        match kind {
            ProtocolKind::MeetInTheMiddle => {
                Channel { p_bsa: stack.p_bsa, p_left: p_optical, p_right: p_optical, p_mid: Probability::ONE }
            }
            ProtocolKind::SenderReceiver => Channel {
                p_bsa: stack.p_bsa,
                p_left: p_optical * p_optical,
                p_right: Probability::ONE,
                p_mid: Probability::ONE,
            },
            ProtocolKind::MidpointSource => {
                Channel { p_bsa: stack.p_bsa, p_left: p_optical, p_right: p_optical, p_mid: stack.p_mid }
            }
        }
    }

    /// `p` for meet-in-the-middle and sender-receiver.
    pub fn success_probability(&self) -> Probability {
        self.p_bsa * self.p_left * self.p_right
    }

    pub fn p_latch_left(&self) -> Probability {
        self.p_bsa * self.p_left
    }

    pub fn p_latch_right(&self) -> Probability {
        self.p_bsa * self.p_right
    }
}

/// Everything needed to run rounds of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub config: ProtocolConfig,
    pub channel: Channel,
    pub tau_link: Duration,
    pub tau_clock: Duration,
}

impl LinkModel {
    pub fn new(config: ProtocolConfig, channel: Channel, tau_link: Duration, tau_clock: Duration) -> Result<Self> {
        if tau_clock.is_zero() {
            return Err(Error::config("clock period must be positive"));
        }
        Ok(LinkModel { config: config.validated()?, channel, tau_link, tau_clock })
    }

    /// Builds the link for `memory_n` qubits per side, deriving N_A/N_B from the
    /// receiver-allocation rule (sender-receiver) or K from the attempts rule
    /// (midpoint-source).
    pub fn from_hardware(
        kind: ProtocolKind,
        memory_n: usize,
        profile: &HardwareProfile,
        stack: &OpticalStack,
        geometry: &LinkGeometry,
    ) -> Result<Self> {
        let p_optical = optical_transmission(profile, geometry);
        let channel = Channel::from_optics(kind, stack, p_optical);
        let config = match kind {
            ProtocolKind::MeetInTheMiddle => ProtocolConfig::MeetInTheMiddle { n: memory_n },
            ProtocolKind::SenderReceiver => {
                let budget = analytic::sr_receiver_allocation(memory_n, channel.success_probability())?;
                ProtocolConfig::SenderReceiver { n_sender: budget.n_sender, n_receiver: budget.n_receiver }
            }
            ProtocolKind::MidpointSource => ProtocolConfig::MidpointSource {
                n: memory_n,
                attempts_per_bin: analytic::mps_attempts_per_bin(channel.p_latch_left(), channel.p_mid)?,
            },
        };
        LinkModel::new(config, channel, link_delay(geometry), profile.cycle_time)
    }

    pub fn kind(&self) -> ProtocolKind {
        self.config.kind()
    }

    pub fn round_time(&self) -> Duration {
        analytic::round_time(&self.config, self.tau_link, self.tau_clock)
    }

    /// `None` unless the link runs midpoint-source.
    pub fn entanglement(&self) -> Option<MpsEntanglement> {
        match self.config {
            ProtocolConfig::MidpointSource { attempts_per_bin, .. } => Some(analytic::mps_entanglement(
                self.channel.p_latch_left(),
                self.channel.p_latch_right(),
                self.channel.p_mid,
                attempts_per_bin,
            )),
            _ => None,
        }
    }

    /// Closed-form rate for this link.
    pub fn analytic_rate(&self) -> RateBundle {
        let p = self.channel.success_probability();
        match self.config {
            ProtocolConfig::MeetInTheMiddle { n } => analytic::mitm_rate(n, p, self.tau_link, self.tau_clock),
            ProtocolConfig::SenderReceiver { n_sender, n_receiver } => {
                analytic::sr_rate(n_sender, n_receiver, p, self.tau_link, self.tau_clock)
            }
            ProtocolConfig::MidpointSource { n, .. } => {
                let ent = self.entanglement().expect("midpoint-source link");
                analytic::mps_rate(n, &ent, self.tau_link, self.tau_clock)
            }
        }
    }

    /// Expected confirmed pairs per round.
    pub fn expected_pairs_per_round(&self) -> f64 {
        self.analytic_rate().rate_per_s * self.round_time().as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn bsa_heralds_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_bsa(&mut rng, true, true, Probability::ONE), Verdict::Success);
        for _ in 0..100 {
            assert_eq!(sample_bsa(&mut rng, false, true, Probability::ONE), Verdict::Failure);
            assert_eq!(sample_bsa(&mut rng, true, false, Probability::ONE), Verdict::Failure);
        }
    }

    #[test]
    fn bsa_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let half = Probability::new(0.5).unwrap();
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_bsa(&mut rng, true, true, half) == Verdict::Success).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn trace_line_format() {
        let rec = TraceRecord {
            time: Duration::from_ns(3),
            node: 2,
            slot: Some(1),
            old_state: SlotState::Free,
            new_state: SlotState::ConfirmedEntangled { partner: 4 },
            trigger: "photon 4".into(),
        };
        assert_eq!(rec.to_string(), "3000,2,1,free,entangled(4),photon 4");
    }

    #[test]
    fn link_from_hardware() {
        let geo = LinkGeometry::fiber_km(10.0).unwrap();
        let prof = crate::params::Preset::Optimistic.profile();
        let stack = OpticalStack::new(Probability::new(0.5).unwrap(), prof.interface_efficiency(), Probability::ONE).unwrap();
        let sr = LinkModel::from_hardware(ProtocolKind::SenderReceiver, 100, &prof, &stack, &geo).unwrap();
        let mitm = LinkModel::from_hardware(ProtocolKind::MeetInTheMiddle, 100, &prof, &stack, &geo).unwrap();
        assert_eq!(sr.channel.success_probability(), mitm.channel.success_probability());
        match sr.config {
            ProtocolConfig::SenderReceiver { n_sender, n_receiver } => assert_eq!(n_sender + n_receiver, 200),
            _ => unreachable!(),
        }
        let mps = LinkModel::from_hardware(ProtocolKind::MidpointSource, 100, &prof, &stack, &geo).unwrap();
        let ent = mps.entanglement().unwrap();
        assert!(ent.p_latch.value() > 0.95);
        assert!(mps.analytic_rate().rate_per_s > mitm.analytic_rate().rate_per_s);
    }
}
