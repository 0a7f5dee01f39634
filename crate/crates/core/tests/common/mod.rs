#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use replink::engine::run_link_trial_stepped;
use replink::params::{Duration, Probability, ProtocolConfig};
use replink::protocol::{
    sample_pair_count, sample_round, Action, BsaMessage, Channel, LinkModel, MpsInput, MpsReceiver, SlotState,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn p(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

pub fn model(config: ProtocolConfig, channel: Channel, tau_link: Duration, tau_clock: Duration) -> LinkModel {
    LinkModel::new(config, channel, tau_link, tau_clock).unwrap()
}

/// Histogram of per-round pair counts with `max + 1` bins.
pub fn histogram(counts: impl IntoIterator<Item = usize>, max: usize) -> Vec<u64> {
    let mut h = vec![0u64; max + 1];
    for c in counts {
        h[c] += 1;
    }
    h
}

pub fn stepped_histogram(m: &LinkModel, rounds: u64, seed: u64, max: usize) -> Vec<u64> {
    let stats = run_link_trial_stepped(m, m.round_time() * rounds, seed, None).unwrap();
    assert_eq!(stats.per_round_counts.len() as u64, rounds);
    histogram(stats.per_round_counts.iter().map(|&c| c as usize), max)
}

pub fn round_sampler_histogram(m: &LinkModel, rounds: u64, seed: u64, max: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    histogram((0..rounds).map(|_| sample_round(&mut rng, m).entangled_pairs), max)
}

pub fn count_sampler_histogram(m: &LinkModel, rounds: u64, seed: u64, max: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    histogram((0..rounds).map(|_| sample_pair_count(&mut rng, m)), max)
}

/// Two-sample chi-squared homogeneity test; returns the p-value.
///
/// Adjacent bins are pooled until each pooled bin has an expected count of
/// at least 5 in both samples.
pub fn chi_squared_p_value(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = na + nb;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        acc.0 += x as f64;
        acc.1 += y as f64;
        let col = acc.0 + acc.1;
        if col * na.min(nb) / total >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    if pooled.len() < 2 {
        return 1.0;
    }
    let stat: f64 = pooled
        .iter()
        .map(|&(x, y)| {
            let col = x + y;
            let (ea, eb) = (col * na / total, col * nb / total);
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let df = (pooled.len() - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

fn reports(actions: &[Action]) -> Vec<BsaMessage> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Send(m) => Some(*m),
            _ => None,
        })
        .collect()
}

/// Drives two midpoint-source receivers (certain latching on arrival) through
/// one bin with the given per-attempt arrivals, exchanges their reports and
/// returns whether both confirm entanglement. Panics if they disagree.
pub fn mps_bin_confirms(left_arrivals: &[bool], right_arrivals: &[bool]) -> bool {
    let k_max = left_arrivals.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let round = Duration::from_us(1);
    let mut left = MpsReceiver::new(1, k_max, Probability::ONE, round);
    let mut right = MpsReceiver::new(1, k_max, Probability::ONE, round);
    let (mut to_right, mut to_left) = (Vec::new(), Vec::new());
    for k in 0..k_max {
        let t = Duration::from_ns(k as u64);
        let a = left.step(t, MpsInput::Photon { bin: 1, pair: k + 1, arrived: left_arrivals[k] }, &mut rng).unwrap();
        let b = right.step(t, MpsInput::Photon { bin: 1, pair: k + 1, arrived: right_arrivals[k] }, &mut rng).unwrap();
        to_right.extend(reports(&a));
        to_left.extend(reports(&b));
    }
    let t = Duration::from_ns(500);
    for m in to_left {
        left.step(t, MpsInput::Remote(m), &mut rng).unwrap();
    }
    for m in to_right {
        right.step(t, MpsInput::Remote(m), &mut rng).unwrap();
    }
    let confirmed = |r: &MpsReceiver| matches!(r.slots()[0], SlotState::ConfirmedEntangled { .. });
    assert_eq!(confirmed(&left), confirmed(&right), "receivers disagree");
    confirmed(&left)
}

/// Exact entanglement probability of one bin, by enumerating every
/// (generated, left arrival, right arrival) outcome of all `k_max` attempts
/// and running the receivers on each.
pub fn mps_exact_by_enumeration(p_left: f64, p_right: f64, p_mid: f64, k_max: usize) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << (3 * k_max)) {
        let bit = |i: usize| mask >> i & 1 == 1;
        let mut weight = 1.0;
        let mut left = Vec::with_capacity(k_max);
        let mut right = Vec::with_capacity(k_max);
        let mut impossible = false;
        for k in 0..k_max {
            let (g, l, r) = (bit(3 * k), bit(3 * k + 1), bit(3 * k + 2));
            if !g && (l || r) {
                impossible = true;
                break;
            }
            weight *= if g { p_mid } else { 1.0 - p_mid };
            if g {
                weight *= if l { p_left } else { 1.0 - p_left };
                weight *= if r { p_right } else { 1.0 - p_right };
            }
            left.push(l);
            right.push(r);
        }
        if !impossible && weight > 0.0 && mps_bin_confirms(&left, &right) {
            total += weight;
        }
    }
    total
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}
