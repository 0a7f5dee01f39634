use crate::params::Duration;
use crate::protocol::{Action, BsaMessage, SlotState, Verdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitmInput {
    /// Clock edge; emits the next photon while the inner loop is running.
    Tick,
    Bsa(BsaMessage),
    /// The `tau_round` synchronization point.
    RoundEnd,
}

/// Repeater control for meet-in-the-middle. Also drives the sender side of
/// sender-receiver, with the longer round time.
///
/// The inner loop emits one photon per clock tick for slots `1..=N`; then the
/// node waits until the round boundary, uses every slot whose message
/// reported success and resets all memory.
#[derive(Debug, Clone)]
pub struct MitmNode {
    slots: Vec<SlotState>,
    tau_clock: Duration,
    round_time: Duration,
    /// 0-based index of the next slot to emit.
    next: usize,
    round_start: Duration,
    last_emit: Option<Duration>,
    last_event: Option<Duration>,
}

impl MitmNode {
    pub fn new(n: usize, tau_clock: Duration, round_time: Duration) -> Self {
        MitmNode {
            slots: vec![SlotState::Free; n],
            tau_clock,
            round_time,
            next: 0,
            round_start: Duration::ZERO,
            last_emit: None,
            last_event: None,
        }
    }

    pub fn slots(&self) -> &[SlotState] {
        &self.slots
    }

    /// True while the node is still in its emission loop.
    pub fn is_emitting(&self) -> bool {
        self.next < self.slots.len()
    }

    pub fn step(&mut self, now: Duration, input: MitmInput) -> Result<Vec<Action>> {
        if let Some(last) = self.last_event {
            if now < last {
                return Err(Error::violation(format!("event at {now} precedes previous event at {last}")));
            }
        }
        self.last_event = Some(now);

        match input {
            MitmInput::Tick => self.on_tick(now),
            MitmInput::Bsa(msg) => self.on_message(msg),
            MitmInput::RoundEnd => self.on_round_end(now),
        }
    }

    fn on_tick(&mut self, now: Duration) -> Result<Vec<Action>> {
        if !self.is_emitting() {
            return Ok(Vec::new());
        }
        if let Some(last) = self.last_emit {
            if now < last + self.tau_clock {
                return Err(Error::violation(format!(
                    "tick at {now} arrives before the emission at {last} completes"
                )));
            }
        }
        let i = self.next;
        self.next += 1;
        self.last_emit = Some(now);
        let from = std::mem::replace(&mut self.slots[i], SlotState::PhotonEmitted);
        Ok(vec![
            Action::Transition { slot: Some(i + 1), from, to: SlotState::PhotonEmitted },
            Action::EmitPhoton { slot: i + 1 },
        ])
    }

    fn on_message(&mut self, msg: BsaMessage) -> Result<Vec<Action>> {
        let i = msg.transmission_index;
        if i == 0 || i > self.slots.len() {
            return Err(Error::violation(format!("message for unknown transmission {i}")));
        }
        if self.slots[i - 1] != SlotState::PhotonEmitted {
            return Err(Error::violation(format!(
                "message for transmission {i} but slot is {}",
                self.slots[i - 1]
            )));
        }
        let to = match msg.verdict {
            Verdict::Success => SlotState::ConfirmedEntangled { partner: msg.receiver_slot.unwrap_or(i) },
            Verdict::Failure => SlotState::Free,
        };
        self.slots[i - 1] = to;
        Ok(vec![Action::Transition { slot: Some(i), from: SlotState::PhotonEmitted, to }])
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
        actions.push(Action::RoundComplete { pairs });
        self.next = 0;
        self.last_emit = None;
        self.round_start = now;
        Ok(actions)
    }
}
