use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::params::ProtocolConfig;
use crate::protocol::{bernoulli, LinkModel, RoundOutcome};

/// Draws one round attempt by attempt, recording which slots pair up.
pub fn sample_round<R: Rng + ?Sized>(rng: &mut R, model: &LinkModel) -> RoundOutcome {
    let ch = &model.channel;
    let mut slot_map = Vec::new();
    match model.config {
        ProtocolConfig::MeetInTheMiddle { n } => {
            let p = ch.success_probability().value();
            for i in 1..=n {
                if bernoulli(rng, p) {
                    slot_map.push((i, i));
                }
            }
        }
        ProtocolConfig::SenderReceiver { n_sender, n_receiver } => {
            let p = ch.success_probability().value();
            let mut j = 0;
            for i in 1..=n_sender {
                if j >= n_receiver {
                    break;
                }
                if bernoulli(rng, p) {
                    j += 1;
                    slot_map.push((i, j));
                }
            }
        }
        ProtocolConfig::MidpointSource { n, attempts_per_bin } => {
            let (p_l, p_r, p_m) = (ch.p_latch_left().value(), ch.p_latch_right().value(), ch.p_mid.value());
            for i in 1..=n {
                let (mut left, mut right) = (None, None);
                for k in 1..=attempts_per_bin {
                    if left.is_some() && right.is_some() {
                        break;
                    }
                    if !bernoulli(rng, p_m) {
                        continue;
                    }
                    if left.is_none() && bernoulli(rng, p_l) {
                        left = Some(k);
                    }
                    if right.is_none() && bernoulli(rng, p_r) {
                        right = Some(k);
                    }
                }
                if left.is_some() && left == right {
                    slot_map.push((i, i));
                }
            }
        }
    }
    RoundOutcome { entangled_pairs: slot_map.len(), slot_map, wall_time: model.round_time() }
}

/// Number of confirmed pairs in one round, drawn directly from the count
/// distribution. Same law as [`sample_round`], far fewer random draws.
pub fn sample_pair_count<R: Rng + ?Sized>(rng: &mut R, model: &LinkModel) -> usize {
    let ch = &model.channel;
    match model.config {
        ProtocolConfig::MeetInTheMiddle { n } => binomial(rng, n, ch.success_probability().value()),
        ProtocolConfig::SenderReceiver { n_sender, n_receiver } => {
            binomial(rng, n_sender, ch.success_probability().value()).min(n_receiver)
        }
        ProtocolConfig::MidpointSource { n, attempts_per_bin } => {
            let (p_l, p_r, p_m) = (ch.p_latch_left().value(), ch.p_latch_right().value(), ch.p_mid.value());
            (0..n).filter(|_| bin_entangled(rng, p_l, p_r, p_m, attempts_per_bin)).count()
        }
    }
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> usize {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n as u64, p).expect("p within (0, 1)").sample(rng) as usize
}

/// A bin entangles iff the first attempt where either side latches is a
/// joint latch. Skips ahead to that attempt with a geometric draw.
fn bin_entangled<R: Rng + ?Sized>(rng: &mut R, p_l: f64, p_r: f64, p_m: f64, k_max: usize) -> bool {
    let both = p_m * p_l * p_r;
    let any = p_m * (p_l + p_r - p_l * p_r);
    if any <= 0.0 || k_max == 0 {
        return false;
    }
    if any < 1.0 {
        let u = 1.0 - rng.random::<f64>();
        let first = (u.ln() / (-any).ln_1p()).ceil().max(1.0);
        if first > k_max as f64 {
            return false;
        }
    }
    rng.random::<f64>() * any < both
}
