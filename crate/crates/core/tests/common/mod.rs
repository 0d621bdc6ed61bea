#![allow(dead_code)]

use bufrelay::analytic::ChannelProbs;
use bufrelay::channel::HopState;
use bufrelay::config::ExperimentSpec;
use bufrelay::engine::{ChannelConfig, Relaying, ScenarioConfig, SchedulerPolicy, Simulation, SlotChannels};
use bufrelay::traffic::TrafficModel;

pub fn bernoulli_config(
    relaying: Relaying,
    p1: f64,
    p2: f64,
    traffic: TrafficModel,
    horizon_slots: u64,
    seed: u64,
) -> ScenarioConfig {
    ScenarioConfig {
        relaying,
        channel: ChannelConfig::Bernoulli {
            probs: ChannelProbs::new(p1, p2).unwrap(),
        },
        traffic,
        scheduler: SchedulerPolicy::default(),
        horizon_slots,
        slot_duration_s: 1e-3,
        seed,
        relay_buffer_cap_bits: None,
    }
}

/// Default fading scenario at a given Poisson rate.
pub fn fading_config(relaying: Relaying, rate_pps: f64, horizon_slots: u64, seed: u64) -> ScenarioConfig {
    let mut sc = ExperimentSpec::default().scenario;
    sc.relaying = relaying;
    sc.traffic = sc.traffic.with_rate(rate_pps).unwrap();
    sc.horizon_slots = horizon_slots;
    sc.seed = seed;
    sc
}

pub fn hop(good: bool) -> HopState {
    if good {
        HopState::Good
    } else {
        HopState::Bad
    }
}

/// The joint state sequence encoded by `code`, two bits per slot.
pub fn sequence(code: u32, horizon: usize) -> Vec<(bool, bool)> {
    (0..horizon)
        .map(|k| {
            let s = (code >> (2 * k)) & 3;
            (s & 1 == 1, s & 2 == 2)
        })
        .collect()
}

/// Queue contents after one slot, in whole bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSlot {
    pub bs: u64,
    pub relay: u64,
    pub delivered_cum: u64,
    /// (bit id, delivery slot) for bits delivered in this slot.
    pub delivered: Vec<(u64, u64)>,
}

/// Integer simulator of the two-subslot Bernoulli system fed by one bit per
/// slot for the first `n_bits` slots. Queues are plain lists of bit ids.
pub fn brute_force(buffered: bool, n_bits: u64, seq: &[(bool, bool)]) -> Vec<OracleSlot> {
    let mut bs: Vec<u64> = Vec::new();
    let mut relay: Vec<u64> = Vec::new();
    let mut next_id = 0;
    let mut delivered_cum = 0;
    let mut out = Vec::with_capacity(seq.len());
    for (k, &(g1, g2)) in seq.iter().enumerate() {
        let t = k as u64 + 1;
        if t <= n_bits {
            bs.push(next_id);
            next_id += 1;
        }
        let mut delivered = Vec::new();
        if buffered {
            if g1 && !bs.is_empty() {
                relay.push(bs.remove(0));
            }
            if g2 && !relay.is_empty() {
                delivered.push((relay.remove(0), t + 1));
            }
        } else if g1 && g2 && !bs.is_empty() {
            delivered.push((bs.remove(0), t + 1));
        }
        delivered_cum += delivered.len() as u64;
        out.push(OracleSlot {
            bs: bs.len() as u64,
            relay: relay.len() as u64,
            delivered_cum,
            delivered,
        });
    }
    out
}

/// The engine driven through the same sequence, reported in the oracle's terms.
pub fn engine_trace(buffered: bool, n_bits: u64, seq: &[(bool, bool)]) -> Vec<OracleSlot> {
    let relaying = if buffered {
        Relaying::Buffered
    } else {
        Relaying::Conventional
    };
    let cfg = bernoulli_config(
        relaying,
        0.5,
        0.5,
        TrafficModel::DeterministicBits { n_bits },
        seq.len() as u64,
        0,
    );
    let mut sim = Simulation::new(cfg).unwrap();
    let mut delivered_cum = 0.0;
    seq.iter()
        .map(|&(g1, g2)| {
            let outcome = sim
                .step_with(SlotChannels::Bernoulli { s1: hop(g1), s2: hop(g2) })
                .unwrap();
            delivered_cum += outcome.delivered_bits;
            let st = sim.state();
            OracleSlot {
                bs: exact_bits(st.bs.occupancy_bits()),
                relay: exact_bits(st.relay.occupancy_bits()),
                delivered_cum: exact_bits(delivered_cum),
                delivered: outcome
                    .delivered
                    .iter()
                    .map(|p| (p.id, p.delivery_slot.unwrap()))
                    .collect(),
            }
        })
        .collect()
}

/// Bernoulli occupancies must be whole bits.
pub fn exact_bits(x: f64) -> u64 {
    assert!(x >= 0.0 && x.fract() == 0.0, "non-integer bit count {x}");
    x as u64
}

/// Probability of a joint state sequence under product-form hop states.
pub fn sequence_probability(seq: &[(bool, bool)], p1: f64, p2: f64) -> f64 {
    seq.iter()
        .map(|&(g1, g2)| {
            let a = if g1 { p1 } else { 1.0 - p1 };
            let b = if g2 { p2 } else { 1.0 - p2 };
            a * b
        })
        .product()
}

/// Least-squares slope over the second half of a trace, recomputed here
/// independently of the metrics module.
pub fn second_half_slope(trace: &[f64]) -> f64 {
    let ys = &trace[trace.len() / 2..];
    let n = ys.len() as f64;
    let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
