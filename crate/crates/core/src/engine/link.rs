use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::queue::{EventKind, EventQueue, TieKey};
use crate::params::{Duration, ProtocolConfig};
use crate::protocol::{
    bernoulli, sample_bsa, sample_pair_count, Action, BsaMessage, LinkModel, MitmInput, MitmNode, MpsInput,
    MpsReceiver, RoundOutcome, SrInput, SrReceiver, TraceRecord,
};
use crate::{Error, Result};

/// Node ids used by the stepped driver and in traces.
pub const LEFT_NODE: usize = 0;
pub const MIDPOINT_NODE: usize = 1;
pub const RIGHT_NODE: usize = 2;
const DRIVER_NODE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTrialStats {
    pub entanglement_events: u64,
    /// Whole rounds executed times the round time.
    pub elapsed: Duration,
    pub rate_per_s: f64,
    pub per_round_counts: Vec<u32>,
}

impl LinkTrialStats {
    fn from_counts(per_round_counts: Vec<u32>, round_time: Duration) -> Self {
        let entanglement_events = per_round_counts.iter().map(|&c| u64::from(c)).sum();
        let elapsed = round_time * per_round_counts.len() as u64;
        LinkTrialStats {
            entanglement_events,
            elapsed,
            rate_per_s: entanglement_events as f64 / elapsed.as_secs_f64(),
            per_round_counts,
        }
    }
}

pub(crate) fn rounds_within(model: &LinkModel, duration: Duration) -> Result<u64> {
    let round = model.round_time();
    let rounds = duration.whole_periods(round);
    if rounds == 0 {
        return Err(Error::invalid(format!("duration {duration} is shorter than one round ({round})")));
    }
    Ok(rounds)
}

/// Runs whole rounds of one link with the fast sampler.
pub fn run_link_trial(model: &LinkModel, duration: Duration, seed: u64) -> Result<LinkTrialStats> {
    let rounds = rounds_within(model, duration)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = (0..rounds).map(|_| sample_pair_count(&mut rng, model) as u32).collect();
    Ok(LinkTrialStats::from_counts(counts, model.round_time()))
}

/// Same contract as [`run_link_trial`], but every photon, analyzer verdict
/// and message passes through the protocol state machines.
pub fn run_link_trial_stepped(
    model: &LinkModel,
    duration: Duration,
    seed: u64,
    trace: Option<&mut dyn FnMut(TraceRecord)>,
) -> Result<LinkTrialStats> {
    let rounds = rounds_within(model, duration)?;
    let mut link = SteppedLink::new(*model, ChaCha8Rng::seed_from_u64(seed), trace);
    let outcomes = link.run(rounds)?;
    let counts = outcomes.iter().map(|o| o.entangled_pairs as u32).collect();
    Ok(LinkTrialStats::from_counts(counts, model.round_time()))
}

#[derive(Debug, Clone, Copy)]
enum LinkEvent {
    RoundStart { round: u64 },
    Tick { slot: usize },
    Emit { bin: usize, pair: usize },
    AtMidpoint { slot: usize, from_left: bool, arrived: bool },
    SrPhoton { index: usize, remote_arrived: bool, local_arrived: bool },
    MpsPhoton { bin: usize, pair: usize, arrived: bool },
    Message(BsaMessage),
    RoundEnd,
}

enum Machines {
    Mitm { left: MitmNode, right: MitmNode, pending: Vec<(Option<bool>, Option<bool>)> },
    Sr { alice: MitmNode, bob: SrReceiver },
    Mps { left: MpsReceiver, right: MpsReceiver },
}

/// Event-driven execution of one link: nodes 0 (left / sender), 1 (midpoint
/// analyzer or source) and 2 (right / receiver).
pub struct SteppedLink<'a> {
    model: LinkModel,
    rng: ChaCha8Rng,
    queue: EventQueue<LinkEvent>,
    machines: Machines,
    trace: Option<&'a mut dyn FnMut(TraceRecord)>,
    outcomes: Vec<RoundOutcome>,
    half_out: Duration,
    half_back: Duration,
}

impl<'a> SteppedLink<'a> {
    pub fn new(model: LinkModel, rng: ChaCha8Rng, trace: Option<&'a mut dyn FnMut(TraceRecord)>) -> Self {
        let round = model.round_time();
        let machines = match model.config {
            ProtocolConfig::MeetInTheMiddle { n } => Machines::Mitm {
                left: MitmNode::new(n, model.tau_clock, round),
                right: MitmNode::new(n, model.tau_clock, round),
                pending: vec![(None, None); n],
            },
            ProtocolConfig::SenderReceiver { n_sender, n_receiver } => Machines::Sr {
                alice: MitmNode::new(n_sender, model.tau_clock, round),
                bob: SrReceiver::new(n_receiver, model.channel.p_bsa, round),
            },
            ProtocolConfig::MidpointSource { n, attempts_per_bin } => Machines::Mps {
                left: MpsReceiver::new(n, attempts_per_bin, model.channel.p_bsa, round),
                right: MpsReceiver::new(n, attempts_per_bin, model.channel.p_bsa, round),
            },
        };
        let (half_out, half_back) = model.tau_link.halves();
        SteppedLink { model, rng, queue: EventQueue::new(), machines, trace, outcomes: Vec::new(), half_out, half_back }
    }

    /// Executes `rounds` consecutive rounds starting at time zero.
    pub fn run(&mut self, rounds: u64) -> Result<Vec<RoundOutcome>> {
        if rounds > 0 {
            self.push(Duration::ZERO, TieKey::new(DRIVER_NODE, 0, EventKind::Tick), LinkEvent::RoundStart { round: 0 })?;
        }
        while let Some(ev) = self.queue.pop() {
            self.handle(ev.time, ev.key.node, ev.payload, rounds)?;
        }
        Ok(std::mem::take(&mut self.outcomes))
    }

    fn push(&mut self, time: Duration, key: TieKey, ev: LinkEvent) -> Result<()> {
        self.queue.push(time, key, ev).map(|_| ())
    }

    fn handle(&mut self, now: Duration, node: usize, ev: LinkEvent, rounds: u64) -> Result<()> {
        let clock = self.model.tau_clock;
        let round_time = self.model.round_time();
        match ev {
            LinkEvent::RoundStart { round } => self.start_round(now, round, rounds, round_time),
            LinkEvent::Tick { slot } => {
                let machine = match &mut self.machines {
                    Machines::Mitm { left, right, .. } => if node == LEFT_NODE { left } else { right },
                    Machines::Sr { alice, .. } => alice,
                    Machines::Mps { .. } => unreachable!("midpoint-source links have no node ticks"),
                };
                let actions = machine.step(now, MitmInput::Tick)?;
                let n = machine.slots().len();
                self.apply(now, node, &actions, || format!("tick {slot}"))?;
                if slot < n {
                    self.push(now + clock, TieKey::new(node, slot + 1, EventKind::Tick), LinkEvent::Tick { slot: slot + 1 })?;
                }
                Ok(())
            }
            LinkEvent::Emit { bin, pair } => {
                let ch = self.model.channel;
                let generated = bernoulli(&mut self.rng, ch.p_mid.value());
                let left = generated && bernoulli(&mut self.rng, ch.p_left.value());
                let right = generated && bernoulli(&mut self.rng, ch.p_right.value());
                let at = now + self.half_out;
                self.push(at, TieKey::new(LEFT_NODE, bin, EventKind::Photon), LinkEvent::MpsPhoton { bin, pair, arrived: left })?;
                self.push(at, TieKey::new(RIGHT_NODE, bin, EventKind::Photon), LinkEvent::MpsPhoton { bin, pair, arrived: right })?;
                let ProtocolConfig::MidpointSource { n, attempts_per_bin } = self.model.config else {
                    unreachable!("source events only on midpoint-source links")
                };
                let next = if pair < attempts_per_bin {
                    Some((bin, pair + 1))
                } else if bin < n {
                    Some((bin + 1, 1))
                } else {
                    None
                };
                if let Some((bin, pair)) = next {
                    self.push(now + clock, TieKey::new(MIDPOINT_NODE, bin, EventKind::Tick), LinkEvent::Emit { bin, pair })?;
                }
                Ok(())
            }
            LinkEvent::AtMidpoint { slot, from_left, arrived } => {
                let Machines::Mitm { pending, .. } = &mut self.machines else {
                    unreachable!("analyzer events only on meet-in-the-middle links")
                };
                let entry = &mut pending[slot - 1];
                if from_left { entry.0 = Some(arrived) } else { entry.1 = Some(arrived) }
                if let (Some(l), Some(r)) = *entry {
                    *entry = (None, None);
                    let verdict = sample_bsa(&mut self.rng, l, r, self.model.channel.p_bsa);
                    let msg = BsaMessage::midpoint(slot, verdict);
                    let at = now + self.half_back;
                    self.push(at, TieKey::new(LEFT_NODE, slot, EventKind::Message), LinkEvent::Message(msg))?;
                    self.push(at, TieKey::new(RIGHT_NODE, slot, EventKind::Message), LinkEvent::Message(msg))?;
                }
                Ok(())
            }
            LinkEvent::SrPhoton { index, remote_arrived, local_arrived } => {
                let Machines::Sr { bob, .. } = &mut self.machines else { unreachable!() };
                let actions = bob.step(now, SrInput::Photon { index, remote_arrived, local_arrived }, &mut self.rng)?;
                self.apply(now, node, &actions, || format!("photon {index}"))
            }
            LinkEvent::MpsPhoton { bin, pair, arrived } => {
                let Machines::Mps { left, right } = &mut self.machines else { unreachable!() };
                let receiver = if node == LEFT_NODE { left } else { right };
                let actions = receiver.step(now, MpsInput::Photon { bin, pair, arrived }, &mut self.rng)?;
                self.apply(now, node, &actions, || format!("photon ({bin},{pair})"))
            }
            LinkEvent::Message(msg) => {
                let actions = match &mut self.machines {
                    Machines::Mitm { left, right, .. } => {
                        let m = if node == LEFT_NODE { left } else { right };
                        m.step(now, MitmInput::Bsa(msg))?
                    }
                    Machines::Sr { alice, .. } => alice.step(now, MitmInput::Bsa(msg))?,
                    Machines::Mps { left, right } => {
                        let m = if node == LEFT_NODE { left } else { right };
                        m.step(now, MpsInput::Remote(msg), &mut self.rng)?
                    }
                };
                self.apply(now, node, &actions, || describe(&msg))
            }
            LinkEvent::RoundEnd => {
                let actions = match &mut self.machines {
                    Machines::Mitm { left, right, .. } => {
                        if node == LEFT_NODE { left.step(now, MitmInput::RoundEnd)? } else { right.step(now, MitmInput::RoundEnd)? }
                    }
                    Machines::Sr { alice, bob } => {
                        if node == LEFT_NODE { alice.step(now, MitmInput::RoundEnd)? } else { bob.step(now, SrInput::RoundEnd, &mut self.rng)? }
                    }
                    Machines::Mps { left, right } => {
                        let m = if node == LEFT_NODE { left } else { right };
                        m.step(now, MpsInput::RoundEnd, &mut self.rng)?
                    }
                };
                self.apply(now, node, &actions, || "round end".to_string())
            }
        }
    }

    fn start_round(&mut self, t0: Duration, round: u64, rounds: u64, round_time: Duration) -> Result<()> {
        let end_key = |node| TieKey::new(node, 0, EventKind::RoundEnd);
        match self.model.config {
            ProtocolConfig::MeetInTheMiddle { n } => {
                if n > 0 {
                    for node in [LEFT_NODE, RIGHT_NODE] {
                        self.push(t0, TieKey::new(node, 1, EventKind::Tick), LinkEvent::Tick { slot: 1 })?;
                    }
                }
                for node in [LEFT_NODE, RIGHT_NODE] {
                    self.push(t0 + round_time, end_key(node), LinkEvent::RoundEnd)?;
                }
            }
            ProtocolConfig::SenderReceiver { n_sender, .. } => {
                if n_sender > 0 {
                    self.push(t0, TieKey::new(LEFT_NODE, 1, EventKind::Tick), LinkEvent::Tick { slot: 1 })?;
                }
                for node in [LEFT_NODE, RIGHT_NODE] {
                    self.push(t0 + round_time, end_key(node), LinkEvent::RoundEnd)?;
                }
            }
            ProtocolConfig::MidpointSource { n, .. } => {
                if n > 0 {
                    self.push(t0, TieKey::new(MIDPOINT_NODE, 1, EventKind::Tick), LinkEvent::Emit { bin: 1, pair: 1 })?;
                }
                // Receivers see the round shifted by the source-to-receiver delay.
                for node in [LEFT_NODE, RIGHT_NODE] {
                    self.push(t0 + self.half_out + round_time, end_key(node), LinkEvent::RoundEnd)?;
                }
            }
        }
        if round + 1 < rounds {
            self.push(
                t0 + round_time,
                TieKey::new(DRIVER_NODE, 0, EventKind::Tick),
                LinkEvent::RoundStart { round: round + 1 },
            )?;
        }
        Ok(())
    }

    fn apply(&mut self, now: Duration, node: usize, actions: &[Action], trigger: impl Fn() -> String) -> Result<()> {
        for action in actions {
            match action {
                Action::EmitPhoton { slot } => self.emit(now, node, *slot)?,
                Action::Send(msg) => {
                    let to = if node == LEFT_NODE { RIGHT_NODE } else { LEFT_NODE };
                    self.push(
                        now + self.model.tau_link,
                        TieKey::new(to, msg.transmission_index, EventKind::Message),
                        LinkEvent::Message(*msg),
                    )?;
                }
                Action::Transition { slot, from, to } => {
                    if let Some(sink) = self.trace.as_mut() {
                        sink(TraceRecord { time: now, node, slot: *slot, old_state: *from, new_state: *to, trigger: trigger() });
                    }
                }
                Action::RoundComplete { pairs } => {
                    if node == LEFT_NODE {
                        self.outcomes.push(RoundOutcome {
                            entangled_pairs: pairs.len(),
                            slot_map: pairs.clone(),
                            wall_time: self.model.round_time(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn emit(&mut self, now: Duration, node: usize, slot: usize) -> Result<()> {
        let ch = self.model.channel;
        match self.machines {
            Machines::Mitm { .. } => {
                let from_left = node == LEFT_NODE;
                let p = if from_left { ch.p_left } else { ch.p_right };
                let arrived = bernoulli(&mut self.rng, p.value());
                self.push(
                    now + self.half_out,
                    TieKey::new(MIDPOINT_NODE, slot, EventKind::Photon),
                    LinkEvent::AtMidpoint { slot, from_left, arrived },
                )
            }
            Machines::Sr { .. } => {
                let remote_arrived = bernoulli(&mut self.rng, ch.p_left.value());
                let local_arrived = bernoulli(&mut self.rng, ch.p_right.value());
                self.push(
                    now + self.model.tau_link,
                    TieKey::new(RIGHT_NODE, slot, EventKind::Photon),
                    LinkEvent::SrPhoton { index: slot, remote_arrived, local_arrived },
                )
            }
            Machines::Mps { .. } => Err(Error::violation("receivers do not emit photons")),
        }
    }
}

fn describe(msg: &BsaMessage) -> String {
    let verdict = match msg.verdict {
        crate::protocol::Verdict::Success => "success",
        crate::protocol::Verdict::Failure => "failure",
    };
    match (msg.receiver_slot, msg.pair_id) {
        (Some(j), _) => format!("message {} {verdict} slot {j}", msg.transmission_index),
        (_, Some(k)) => format!("message ({},{k}) {verdict}", msg.transmission_index),
        _ => format!("message {} {verdict}", msg.transmission_index),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Probability;
    use crate::protocol::{Channel, SlotState};

    fn model(config: ProtocolConfig, channel: Channel) -> LinkModel {
        LinkModel::new(config, channel, Duration::from_ns(100), Duration::from_ns(1)).unwrap()
    }

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn zero_duration_is_error() {
        let m = model(ProtocolConfig::MeetInTheMiddle { n: 2 }, Channel::heralded(p(0.5)));
        assert!(run_link_trial(&m, Duration::ZERO, 1).is_err());
        assert!(run_link_trial(&m, Duration::from_ns(101), 1).is_err());
        assert!(run_link_trial_stepped(&m, Duration::from_ns(50), 1, None).is_err());
    }

    #[test]
    fn whole_rounds_only() {
        let m = model(ProtocolConfig::MeetInTheMiddle { n: 2 }, Channel::heralded(p(0.5)));
        let s = run_link_trial(&m, Duration::from_ns(1000), 3).unwrap();
        assert_eq!(s.per_round_counts.len(), 9);
        assert_eq!(s.elapsed, Duration::from_ns(918));
        assert_eq!(s.rate_per_s, s.entanglement_events as f64 / s.elapsed.as_secs_f64());
    }

    #[test]
    fn deterministic_for_seed() {
        let m = model(ProtocolConfig::SenderReceiver { n_sender: 5, n_receiver: 3 }, Channel::heralded(p(0.3)));
        let d = Duration::from_us(50);
        assert_eq!(run_link_trial(&m, d, 17).unwrap(), run_link_trial(&m, d, 17).unwrap());
        assert_eq!(
            run_link_trial_stepped(&m, d, 17, None).unwrap(),
            run_link_trial_stepped(&m, d, 17, None).unwrap()
        );
    }

    #[test]
    fn stepped_certain_links_fill_memory() {
        let d = Duration::from_us(10);
        let mitm = model(ProtocolConfig::MeetInTheMiddle { n: 4 }, Channel::heralded(Probability::ONE));
        assert!(run_link_trial_stepped(&mitm, d, 0, None).unwrap().per_round_counts.iter().all(|&c| c == 4));
        let sr = model(ProtocolConfig::SenderReceiver { n_sender: 5, n_receiver: 2 }, Channel::heralded(Probability::ONE));
        assert!(run_link_trial_stepped(&sr, d, 0, None).unwrap().per_round_counts.iter().all(|&c| c == 2));
        let mps = model(
            ProtocolConfig::MidpointSource { n: 3, attempts_per_bin: 2 },
            Channel::midpoint(Probability::ONE, Probability::ONE),
        );
        assert!(run_link_trial_stepped(&mps, d, 0, None).unwrap().per_round_counts.iter().all(|&c| c == 3));
    }

    #[test]
    fn stepped_lossy_links_never_entangle() {
        let d = Duration::from_us(10);
        let lossy = Channel { p_left: Probability::ZERO, ..Channel::heralded(Probability::ONE) };
        for config in [
            ProtocolConfig::MeetInTheMiddle { n: 3 },
            ProtocolConfig::SenderReceiver { n_sender: 4, n_receiver: 2 },
            ProtocolConfig::MidpointSource { n: 3, attempts_per_bin: 3 },
        ] {
            let mut confirmed = 0;
            let mut sink = |r: TraceRecord| {
                if matches!(r.new_state, SlotState::ConfirmedEntangled { .. }) {
                    confirmed += 1;
                }
            };
            let s = run_link_trial_stepped(&model(config, lossy), d, 5, Some(&mut sink)).unwrap();
            assert_eq!(s.entanglement_events, 0);
            assert_eq!(confirmed, 0);
        }
    }

    #[test]
    fn trace_is_time_ordered_and_reproducible() {
        let m = model(ProtocolConfig::MidpointSource { n: 2, attempts_per_bin: 3 }, Channel::midpoint(p(0.6), p(0.8)));
        let collect = |seed| {
            let mut lines = Vec::new();
            let mut sink = |r: TraceRecord| lines.push(r);
            run_link_trial_stepped(&m, Duration::from_ns(500), seed, Some(&mut sink)).unwrap();
            lines
        };
        let a = collect(9);
        assert!(!a.is_empty());
        assert!(a.windows(2).all(|w| w[0].time <= w[1].time));
        assert_eq!(a, collect(9));
    }
}
