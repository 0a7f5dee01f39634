mod common;

use common::{
    chi_squared_p_value, count_sampler_histogram, model, mps_bin_confirms, mps_exact_by_enumeration, p,
    round_sampler_histogram, stepped_histogram,
};
use proptest::prelude::*;
use replink::analytic::mps_entanglement;
use replink::engine::run_link_trial_stepped;
use replink::params::{Duration, ProtocolConfig};
use replink::protocol::{Channel, LinkModel, TraceRecord};

const TAU_LINK: Duration = Duration::from_ns(300);
const CLOCK: Duration = Duration::from_ns(2);

fn lossy(p_bsa: f64, p_side: f64) -> Channel {
    Channel { p_bsa: p(p_bsa), p_left: p(p_side), p_right: p(p_side), p_mid: p(1.0) }
}

fn agree(m: &LinkModel, seed: u64, max: usize) {
    let stepped = stepped_histogram(m, 10_000, seed, max);
    let sampled = round_sampler_histogram(m, 10_000, seed + 1, max);
    let fast = count_sampler_histogram(m, 10_000, seed + 2, max);
    let (a, b) = (chi_squared_p_value(&stepped, &sampled), chi_squared_p_value(&stepped, &fast));
    assert!(a > 0.01 && b > 0.01, "{:?}: p-values {a:.4} {b:.4}\n{stepped:?}\n{sampled:?}\n{fast:?}", m.config);
}

#[test]
fn mitm_stepped_matches_samplers() {
    agree(&model(ProtocolConfig::MeetInTheMiddle { n: 3 }, lossy(0.5, 0.7), TAU_LINK, CLOCK), 1, 3);
    agree(&model(ProtocolConfig::MeetInTheMiddle { n: 1 }, lossy(0.9, 0.4), TAU_LINK, CLOCK), 2, 1);
}

#[test]
fn sr_stepped_matches_samplers() {
    let sr = |n_sender, n_receiver| ProtocolConfig::SenderReceiver { n_sender, n_receiver };
    let ch = Channel { p_bsa: p(0.6), p_left: p(0.5), p_right: p(1.0), p_mid: p(1.0) };
    agree(&model(sr(4, 1), ch, TAU_LINK, CLOCK), 3, 4);
    agree(&model(sr(3, 3), ch, TAU_LINK, CLOCK), 4, 4);
    agree(&model(sr(2, 0), ch, TAU_LINK, CLOCK), 5, 2);
}

#[test]
fn mps_stepped_matches_samplers() {
    let mps = |n, attempts_per_bin| ProtocolConfig::MidpointSource { n, attempts_per_bin };
    let half = Channel { p_bsa: p(0.7), p_left: p(0.6), p_right: p(0.6), p_mid: p(0.5) };
    agree(&model(mps(4, 2), half, TAU_LINK, CLOCK), 6, 4);
    agree(&model(mps(2, 5), Channel::midpoint(p(0.3), p(1.0)), TAU_LINK, CLOCK), 7, 2);
}

#[test]
fn mps_receivers_confirm_only_matching_attempts() {
    assert!(mps_bin_confirms(&[false, true, false], &[false, true, true]));
    assert!(!mps_bin_confirms(&[false, true, false], &[false, false, true]));
    assert!(!mps_bin_confirms(&[false, false], &[true, true]));
    assert!(mps_bin_confirms(&[true, true], &[true, false]));
}

#[test]
fn mps_enumeration_matches_attempt_sum() {
    for k in 1..=3 {
        for (pl, pr, pm) in [(0.5, 0.5, 1.0), (0.2, 0.9, 0.5), (1.0, 0.3, 0.25)] {
            let exact = mps_exact_by_enumeration(pl, pr, pm, k);
            let sum = mps_entanglement(p(pl), p(pr), p(pm), k).p_ent_sum.value();
            assert!((exact - sum).abs() < 1e-12, "K={k} ({pl}, {pr}, {pm}): {exact} vs {sum}");
        }
    }
}

fn trace(m: &LinkModel, rounds: u64, seed: u64) -> Vec<TraceRecord> {
    let mut out = Vec::new();
    let mut sink = |r: TraceRecord| out.push(r);
    run_link_trial_stepped(m, m.round_time() * rounds, seed, Some(&mut sink)).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stepped_trials_are_causal_and_bounded(
        kind in 0usize..3,
        n in 1usize..5,
        p_side in 0.05f64..1.0,
        p_bsa in 0.05f64..1.0,
        seed in any::<u64>(),
    ) {
        let config = match kind {
            0 => ProtocolConfig::MeetInTheMiddle { n },
            1 => ProtocolConfig::SenderReceiver { n_sender: n, n_receiver: n.div_ceil(2) },
            _ => ProtocolConfig::MidpointSource { n, attempts_per_bin: 3 },
        };
        let m = model(config, lossy(p_bsa, p_side), TAU_LINK, CLOCK);
        let records = trace(&m, 4, seed);
        prop_assert!(records.windows(2).all(|w| w[0].time <= w[1].time));
        prop_assert_eq!(&records, &trace(&m, 4, seed));

        let stats = run_link_trial_stepped(&m, m.round_time() * 20, seed, None).unwrap();
        let cap = match m.config {
            ProtocolConfig::SenderReceiver { n_receiver, .. } => n_receiver,
            _ => n,
        } as u32;
        prop_assert_eq!(stats.per_round_counts.len(), 20);
        prop_assert!(stats.per_round_counts.iter().all(|&c| c <= cap));
        prop_assert_eq!(stats.per_round_counts.iter().map(|&c| c as u64).sum::<u64>(), stats.entanglement_events);
    }
}
