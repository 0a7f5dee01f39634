use rand::Rng;

use crate::params::{Duration, Probability};
use crate::protocol::{sample_bsa, Action, BsaMessage, SlotState, Verdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpsInput {
    /// Time slot of source pair `pair` in bin `bin`. `arrived` is false when no
    /// pair was generated or this half was lost.
    Photon { bin: usize, pair: usize, arrived: bool },
    /// Latch report from the other receiver.
    Remote(BsaMessage),
    RoundEnd,
}

#[derive(Debug, Clone, Copy, Default)]
struct RemoteView {
    latched: Option<usize>,
    /// Highest pair id reported so far for this bin.
    seen_through: usize,
}

/// Receiver control for midpoint-source.
///
/// During bin `i` every arriving photon is offered to memory qubit `i` until
/// one latches; the rest of the bin is rejected. Each photon produces a latch
/// report for the other receiver. Slot `i` is entangled only when both sides
/// latched the same pair id.
#[derive(Debug, Clone)]
pub struct MpsReceiver {
    slots: Vec<SlotState>,
    remote: Vec<RemoteView>,
    k_max: usize,
    p_bsa: Probability,
    round_time: Duration,
    round_start: Duration,
    /// 1-based, 0 before the first bin of a round.
    current_bin: usize,
    last_pair: usize,
    rejecting: bool,
    last_event: Option<Duration>,
}

impl MpsReceiver {
    pub fn new(n_bins: usize, k_max: usize, p_bsa: Probability, round_time: Duration) -> Self {
        MpsReceiver {
            slots: vec![SlotState::Free; n_bins],
            remote: vec![RemoteView::default(); n_bins],
            k_max,
            p_bsa,
            round_time,
            round_start: Duration::ZERO,
            current_bin: 0,
            last_pair: 0,
            rejecting: false,
            last_event: None,
        }
    }

    pub fn slots(&self) -> &[SlotState] {
        &self.slots
    }

    pub fn step<R: Rng + ?Sized>(&mut self, now: Duration, input: MpsInput, rng: &mut R) -> Result<Vec<Action>> {
        if let Some(last) = self.last_event {
            if now < last {
                return Err(Error::violation(format!("event at {now} precedes previous event at {last}")));
            }
        }
        self.last_event = Some(now);

        match input {
            MpsInput::Photon { bin, pair, arrived } => self.on_photon(bin, pair, arrived, rng),
            MpsInput::Remote(msg) => self.on_remote(msg),
            MpsInput::RoundEnd => self.on_round_end(now),
        }
    }

    fn on_photon<R: Rng + ?Sized>(&mut self, bin: usize, pair: usize, arrived: bool, rng: &mut R) -> Result<Vec<Action>> {
        if pair == 0 || pair > self.k_max {
            return Err(Error::violation(format!("photon {pair} outside 1..={} attempts per bin", self.k_max)));
        }
        if bin == 0 || bin > self.slots.len() {
            return Err(Error::violation(format!("bin {bin} outside 1..={}", self.slots.len())));
        }
        if bin < self.current_bin || (bin == self.current_bin && pair <= self.last_pair) {
            return Err(Error::violation(format!(
                "photon ({bin}, {pair}) arrived after ({}, {})",
                self.current_bin, self.last_pair
            )));
        }

        let mut actions = Vec::new();
        if bin > self.current_bin {
            if self.rejecting {
                actions.push(Action::Transition { slot: None, from: SlotState::Rejecting, to: SlotState::Free });
                self.rejecting = false;
            }
            self.current_bin = bin;
        }
        self.last_pair = pair;

        if self.rejecting {
            actions.push(Action::Send(BsaMessage::latch_report(bin, pair, Verdict::Failure)));
            return Ok(actions);
        }

        let slot = bin - 1;
        actions.push(Action::Transition { slot: Some(bin), from: self.slots[slot], to: SlotState::PhotonEmitted });
        let verdict = sample_bsa(rng, arrived, true, self.p_bsa);
        let to = match verdict {
            Verdict::Success => SlotState::Latched { pair },
            Verdict::Failure => SlotState::Free,
        };
        self.slots[slot] = to;
        actions.push(Action::Transition { slot: Some(bin), from: SlotState::PhotonEmitted, to });
        actions.push(Action::Send(BsaMessage::latch_report(bin, pair, verdict)));
        if verdict == Verdict::Success {
            self.rejecting = true;
            actions.push(Action::Transition { slot: None, from: SlotState::Free, to: SlotState::Rejecting });
            actions.extend(self.resolve(bin));
        }
        Ok(actions)
    }

    fn on_remote(&mut self, msg: BsaMessage) -> Result<Vec<Action>> {
        let bin = msg.transmission_index;
        let pair = msg
            .pair_id
            .ok_or_else(|| Error::violation("latch report without a pair id"))?;
        if bin == 0 || bin > self.slots.len() || pair == 0 || pair > self.k_max {
            return Err(Error::violation(format!("latch report for unknown photon ({bin}, {pair})")));
        }
        let view = &mut self.remote[bin - 1];
        view.seen_through = view.seen_through.max(pair);
        if msg.verdict == Verdict::Success {
            view.latched = Some(pair);
        }
        Ok(self.resolve(bin))
    }

    /// Confirms or discards the latched qubit of `bin` once the other side's
    /// outcome for that pair is known.
    fn resolve(&mut self, bin: usize) -> Vec<Action> {
        let slot = bin - 1;
        let SlotState::Latched { pair } = self.slots[slot] else {
            return Vec::new();
        };
        let view = self.remote[slot];
        let to = match view.latched {
            Some(remote_pair) if remote_pair == pair => SlotState::ConfirmedEntangled { partner: bin },
            Some(_) => SlotState::Free,
            None if view.seen_through >= pair => SlotState::Free,
            None => return Vec::new(),
        };
        self.slots[slot] = to;
        vec![Action::Transition { slot: Some(bin), from: SlotState::Latched { pair }, to }]
    }

    fn on_round_end(&mut self, now: Duration) -> Result<Vec<Action>> {
        let due = self.round_start + self.round_time;
        if now < due {
            return Err(Error::violation(format!("round end at {now} before the round boundary {due}")));
        }
        let mut actions = Vec::new();
        let mut pairs = Vec::new();
        for (idx, slot) in self.slots.iter_mut().enumerate() {
            if let SlotState::ConfirmedEntangled { partner } = *slot {
                pairs.push((idx + 1, partner));
            }
            if *slot != SlotState::Free {
                actions.push(Action::Transition { slot: Some(idx + 1), from: *slot, to: SlotState::Free });
                *slot = SlotState::Free;
            }
        }
        if self.rejecting {
            actions.push(Action::Transition { slot: None, from: SlotState::Rejecting, to: SlotState::Free });
        }
        actions.push(Action::RoundComplete { pairs });
        self.remote.iter_mut().for_each(|v| *v = RemoteView::default());
        self.current_bin = 0;
        self.last_pair = 0;
        self.rejecting = false;
        self.round_start = now;
        Ok(actions)
    }
}
