use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::purify::{purify, LinkPair, PURIFICATION_GROUP};
use crate::engine::queue::{EventKind, EventQueue, TieKey};
use crate::params::{Duration, Probability};
use crate::protocol::{sample_pair_count, LinkModel};
use crate::{Error, Result};

/// Memory qubits per repeater kept for purified pairs.
pub const DEFAULT_RESERVED_SLOTS: usize = 3;
/// Error of a raw link pair at fidelity 0.95.
pub const DEFAULT_EPSILON_IN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// One model per link, left to right.
    pub links: Vec<LinkModel>,
    pub reserved_slots: usize,
    pub epsilon_in: Probability,
    /// When false, raw pairs go straight to the reserved slots.
    pub purification: bool,
}

impl ChainConfig {
    pub fn uniform(model: LinkModel, link_count: usize) -> Self {
        ChainConfig {
            links: vec![model; link_count],
            reserved_slots: DEFAULT_RESERVED_SLOTS,
            epsilon_in: Probability::clamped(DEFAULT_EPSILON_IN),
            purification: true,
        }
    }

    pub fn validated(self) -> Result<Self> {
        if self.links.is_empty() {
            return Err(Error::config("a chain needs at least one link"));
        }
        if self.reserved_slots == 0 {
            return Err(Error::config("repeaters need at least one reserved slot"));
        }
        Ok(self)
    }
}

/// Bookkeeping totals; see [`ChainTrialStats::is_conserved`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCounters {
    pub raw_generated: u64,
    /// Raw pairs moved straight to reserved slots (purification off).
    pub raw_stored: u64,
    pub raw_discarded: u64,
    pub raw_pending: u64,
    pub purification_attempts: u64,
    pub purified_produced: u64,
    pub purified_discarded: u64,
    pub purified_swapped: u64,
    pub purified_pending: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrialStats {
    pub end_to_end_ebits: u64,
    pub elapsed: Duration,
    pub rate_per_s: f64,
    pub per_link_purified_counts: Vec<u64>,
    pub per_link_raw_counts: Vec<u64>,
    /// Mean summed link error of the delivered ebits.
    pub mean_ebit_error: Option<f64>,
    pub counters: ChainCounters,
}

impl ChainTrialStats {
    /// Every raw pair is purified, stored, discarded or still pending; every
    /// pair in the reserved slots is swapped, discarded or still pending; each
    /// ebit uses one pair per link.
    pub fn is_conserved(&self) -> bool {
        let c = &self.counters;
        let links = self.per_link_raw_counts.len() as u64;
        c.raw_generated == PURIFICATION_GROUP as u64 * c.purification_attempts + c.raw_stored + c.raw_discarded + c.raw_pending
            && c.purified_produced == c.purified_swapped + c.purified_discarded + c.purified_pending
            && c.purified_swapped == links * self.end_to_end_ebits
    }
}

#[derive(Debug, Clone, Copy)]
struct Held {
    pair: LinkPair,
    created: u64,
}

struct ChainState {
    raw: Vec<usize>,
    buffers: Vec<VecDeque<Held>>,
    /// Reserved slots in use at each of the `links + 1` repeaters.
    load: Vec<usize>,
    next_id: u64,
    ebits: u64,
    ebit_error_sum: f64,
    purified_per_link: Vec<u64>,
    raw_per_link: Vec<u64>,
    counters: ChainCounters,
}

/// Runs every link for the whole duration, purifying groups of seven raw
/// pairs and swapping as soon as each link holds a purified pair.
///
/// Link `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so a
/// one-link chain without purification reproduces [`super::run_link_trial`].
pub fn run_chain_trial(config: &ChainConfig, duration: Duration, seed: u64) -> Result<ChainTrialStats> {
    let config = config.clone().validated()?;
    let n_links = config.links.len();
    let mut rngs: Vec<ChaCha8Rng> = (0..n_links)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rng
        })
        .collect();
    let mut purify_rng = ChaCha8Rng::seed_from_u64(seed);
    purify_rng.set_stream(n_links as u64);

    let mut queue = EventQueue::new();
    for (i, link) in config.links.iter().enumerate() {
        let round = link.round_time();
        if round <= duration {
            queue.push(round, TieKey::new(i, 0, EventKind::RoundEnd), i)?;
        }
    }

    let mut st = ChainState {
        raw: vec![0; n_links],
        buffers: vec![VecDeque::new(); n_links],
        load: vec![0; n_links + 1],
        next_id: 0,
        ebits: 0,
        ebit_error_sum: 0.0,
        purified_per_link: vec![0; n_links],
        raw_per_link: vec![0; n_links],
        counters: ChainCounters::default(),
    };

    while let Some(ev) = queue.pop() {
        let i = ev.payload;
        let link = &config.links[i];
        let produced = sample_pair_count(&mut rngs[i], link) as u64;
        st.raw_per_link[i] += produced;
        st.counters.raw_generated += produced;

        if config.purification {
            st.raw[i] += produced as usize;
            while st.raw[i] >= PURIFICATION_GROUP {
                st.raw[i] -= PURIFICATION_GROUP;
                st.counters.purification_attempts += 1;
                let group = [LinkPair { link: i, error: config.epsilon_in }; PURIFICATION_GROUP];
                if let Some(pair) = purify(&group, config.epsilon_in, &mut purify_rng)? {
                    st.store(pair, config.reserved_slots);
                }
            }
        } else {
            st.counters.raw_stored += produced;
            for _ in 0..produced {
                st.store(LinkPair { link: i, error: config.epsilon_in }, config.reserved_slots);
            }
        }

        let next = ev.time + link.round_time();
        if next <= duration {
            queue.push(next, TieKey::new(i, 0, EventKind::RoundEnd), i)?;
        }
    }

    st.counters.raw_pending = st.raw.iter().map(|&r| r as u64).sum();
    st.counters.purified_pending = st.buffers.iter().map(|b| b.len() as u64).sum();
    let elapsed = duration;
    Ok(ChainTrialStats {
        end_to_end_ebits: st.ebits,
        elapsed,
        rate_per_s: if elapsed.is_zero() { 0.0 } else { st.ebits as f64 / elapsed.as_secs_f64() },
        per_link_purified_counts: st.purified_per_link,
        per_link_raw_counts: st.raw_per_link,
        mean_ebit_error: (st.ebits > 0).then(|| st.ebit_error_sum / st.ebits as f64),
        counters: st.counters,
    })
}

impl ChainState {
    fn store(&mut self, pair: LinkPair, capacity: usize) {
        let i = pair.link;
        self.purified_per_link[i] += 1;
        self.counters.purified_produced += 1;
        for repeater in [i, i + 1] {
            while self.load[repeater] >= capacity {
                self.evict_oldest_at(repeater);
            }
        }
        self.buffers[i].push_back(Held { pair, created: self.next_id });
        self.next_id += 1;
        self.load[i] += 1;
        self.load[i + 1] += 1;
        self.swap_while_ready();
    }

    /// Drops the oldest purified pair held at `repeater` (on either adjacent link).
    fn evict_oldest_at(&mut self, repeater: usize) {
        let candidates = [repeater.checked_sub(1), (repeater < self.buffers.len()).then_some(repeater)];
        let victim = candidates
            .into_iter()
            .flatten()
            .filter_map(|l| self.buffers[l].front().map(|h| (h.created, l)))
            .min()
            .map(|(_, l)| l)
            .expect("a full repeater holds at least one pair");
        self.buffers[victim].pop_front();
        self.load[victim] -= 1;
        self.load[victim + 1] -= 1;
        self.counters.purified_discarded += 1;
    }

    fn swap_while_ready(&mut self) {
        while self.buffers.iter().all(|b| !b.is_empty()) {
            let mut error = 0.0;
            for (l, buf) in self.buffers.iter_mut().enumerate() {
                let held = buf.pop_front().expect("checked non-empty");
                error += held.pair.error.value();
                self.load[l] -= 1;
                self.load[l + 1] -= 1;
            }
            self.counters.purified_swapped += self.buffers.len() as u64;
            self.ebits += 1;
            self.ebit_error_sum += error;
        }
    }
}
