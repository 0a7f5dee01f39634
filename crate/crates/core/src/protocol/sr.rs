use rand::Rng;

use crate::params::{Duration, Probability};
use crate::protocol::{sample_bsa, Action, BsaMessage, SlotState, Verdict};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrInput {
    /// Time slot of sender transmission `index`; `remote_arrived` is false when
    /// the sender's photon was lost in the fiber.
    Photon { index: usize, remote_arrived: bool, local_arrived: bool },
    RoundEnd,
}

/// Receiver (Bob) control for sender-receiver.
///
/// Each incoming transmission is latched into the next free memory qubit `j`
/// through the local analyzer. A failed latch resets the qubit for the next
/// photon; once all `N_B` qubits hold entanglement the intake rejects the
/// rest of the round.
#[derive(Debug, Clone)]
pub struct SrReceiver {
    slots: Vec<SlotState>,
    p_bsa: Probability,
    round_time: Duration,
    round_start: Duration,
    /// 0-based index of the next free slot (`j - 1`).
    next_free: usize,
    last_index: usize,
    last_event: Option<Duration>,
}

impl SrReceiver {
    pub fn new(n_receiver: usize, p_bsa: Probability, round_time: Duration) -> Self {
        SrReceiver {
            slots: vec![SlotState::Free; n_receiver],
            p_bsa,
            round_time,
            round_start: Duration::ZERO,
            next_free: 0,
            last_index: 0,
            last_event: None,
        }
    }

    pub fn slots(&self) -> &[SlotState] {
        &self.slots
    }

    pub fn is_full(&self) -> bool {
        self.next_free >= self.slots.len()
    }

    pub fn step<R: Rng + ?Sized>(&mut self, now: Duration, input: SrInput, rng: &mut R) -> Result<Vec<Action>> {
        if let Some(last) = self.last_event {
            if now < last {
                return Err(Error::violation(format!("event at {now} precedes previous event at {last}")));
            }
        }
        self.last_event = Some(now);

        match input {
            SrInput::Photon { index, remote_arrived, local_arrived } => {
                self.on_photon(index, remote_arrived, local_arrived, rng)
            }
            SrInput::RoundEnd => self.on_round_end(now),
        }
    }

    fn on_photon<R: Rng + ?Sized>(
        &mut self,
        index: usize,
        remote_arrived: bool,
        local_arrived: bool,
        rng: &mut R,
    ) -> Result<Vec<Action>> {
        if index <= self.last_index {
            return Err(Error::violation(format!(
                "transmission {index} arrived after transmission {}",
                self.last_index
            )));
        }
        self.last_index = index;

        if self.is_full() {
            return Ok(vec![Action::Send(BsaMessage::transmission_failed(index))]);
        }

        let j = self.next_free;
        let mut actions = vec![Action::Transition { slot: Some(j + 1), from: SlotState::Free, to: SlotState::PhotonEmitted }];
        match sample_bsa(rng, remote_arrived, local_arrived, self.p_bsa) {
            Verdict::Success => {
                let to = SlotState::ConfirmedEntangled { partner: index };
                self.slots[j] = to;
                self.next_free += 1;
                actions.push(Action::Transition { slot: Some(j + 1), from: SlotState::PhotonEmitted, to });
                actions.push(Action::Send(BsaMessage::latched_into(index, j + 1)));
                if self.is_full() {
                    actions.push(Action::Transition { slot: None, from: SlotState::Free, to: SlotState::Rejecting });
                }
            }
            Verdict::Failure => {
                actions.push(Action::Transition { slot: Some(j + 1), from: SlotState::PhotonEmitted, to: SlotState::Free });
                actions.push(Action::Send(BsaMessage::transmission_failed(index)));
            }
        }
        Ok(actions)
    }

    fn on_round_end(&mut self, now: Duration) -> Result<Vec<Action>> {
        let due = self.round_start + self.round_time;
        if now < due {
            return Err(Error::violation(format!("round end at {now} before the round boundary {due}")));
        }
        let mut actions = Vec::new();
        let mut pairs = Vec::new();
        let was_full = self.is_full() && !self.slots.is_empty();
        for (idx, slot) in self.slots.iter_mut().enumerate() {
            if let SlotState::ConfirmedEntangled { partner } = *slot {
                pairs.push((idx + 1, partner));
                actions.push(Action::Transition { slot: Some(idx + 1), from: *slot, to: SlotState::Free });
                *slot = SlotState::Free;
            }
        }
        if was_full {
            actions.push(Action::Transition { slot: None, from: SlotState::Rejecting, to: SlotState::Free });
        }
        actions.push(Action::RoundComplete { pairs });
        self.next_free = 0;
        self.last_index = 0;
        self.round_start = now;
        Ok(actions)
    }
}
