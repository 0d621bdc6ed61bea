//! Statistics over a finished replication: delay CDFs, mean delay,
//! throughput and queue-stability verdicts.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::engine::ScenarioConfig;
use crate::error::{Error, Result};
use crate::traffic::Packet;

/// Traces shorter than this cannot be classified.
pub const MIN_STABILITY_HORIZON: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveredPacket {
    pub id: u64,
    pub arrival_slot: u64,
    pub delivery_slot: u64,
    pub size_bits: u64,
}

impl DeliveredPacket {
    pub fn from_packet(p: &Packet) -> Self {
        Self {
            id: p.id,
            arrival_slot: p.arrival_slot,
            delivery_slot: p.delivery_slot.expect("delivered packet carries a delivery slot"),
            size_bits: p.size_bits,
        }
    }

    pub fn delay_slots(&self) -> u64 {
        self.delivery_slot - self.arrival_slot
    }
}

/// Everything recorded by one replication. Traces hold one entry per slot,
/// sampled at the end of the slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub slot_duration_s: f64,
    pub q_bs_bits: Vec<f64>,
    pub q_relay_bits: Vec<f64>,
    pub delivered_bits_cum: Vec<f64>,
    /// Packets that joined the BS buffer in each slot.
    pub arrivals_per_slot: Vec<u32>,
    /// Delivered packets in delivery order.
    pub deliveries: Vec<DeliveredPacket>,
    /// Set for saturated sources, whose queueing delays are an artifact of
    /// the top-up and are left out of delay statistics.
    pub delays_suppressed: bool,
    pub arrived_packets: u64,
    pub arrived_bits: u64,
    pub delivered_packets: u64,
    /// Packets still queued at the horizon; excluded from delay statistics.
    pub censored_packets: u64,
    pub slots_with_delivery: u64,
    /// Largest per-slot violation of arrivals = queue change + deliveries.
    pub max_conservation_error_bits: f64,
}

impl MetricsRecord {
    pub fn horizon(&self) -> u64 {
        self.q_bs_bits.len() as u64
    }

    /// Delays in slots of packets that arrived after `warmup_slots`.
    pub fn delay_samples(&self, warmup_slots: u64) -> Vec<u64> {
        self.deliveries
            .iter()
            .filter(|d| d.arrival_slot > warmup_slots)
            .map(DeliveredPacket::delay_slots)
            .collect()
    }

    /// Fraction of slots that delivered at least one bit.
    pub fn delivery_fraction(&self) -> f64 {
        self.slots_with_delivery as f64 / self.horizon() as f64
    }

    pub fn delivered_bits(&self) -> f64 {
        self.delivered_bits_cum.last().copied().unwrap_or(0.0)
    }
}

/// Empirical CDF as `(delay_ms, cumulative probability)` at each distinct
/// delay.
pub fn delay_cdf(samples: &[u64], slot_duration_s: f64) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::Empty("no delay samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let ms_per_slot = slot_duration_s * 1e3;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (idx, &d) in sorted.iter().enumerate() {
        let last_of_run = idx + 1 == n || sorted[idx + 1] != d;
        if last_of_run {
            out.push((d as f64 * ms_per_slot, (idx + 1) as f64 / n as f64));
        }
    }
    if let Some(last) = out.last_mut() {
        last.1 = 1.0;
    }
    Ok(out)
}

pub fn mean_delay(samples: &[u64], slot_duration_s: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no delay samples".into()));
    }
    let total: u128 = samples.iter().map(|&s| s as u128).sum();
    Ok(total as f64 / samples.len() as f64 * slot_duration_s * 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub packets: u64,
    pub packets_per_s: f64,
    pub bits_per_slot: f64,
}

/// Deliveries whose last bit was served in a slot of `window`.
pub fn throughput(record: &MetricsRecord, window: RangeInclusive<u64>) -> Result<Throughput> {
    let (start, end) = (*window.start(), *window.end());
    if start < 1 || end < start {
        return Err(Error::Empty(format!("empty throughput window {start}..={end}")));
    }
    if end > record.horizon() {
        return Err(Error::domain(format!(
            "window end {end} beyond horizon {}",
            record.horizon()
        )));
    }
    let slots = end - start + 1;
    let served_in = |d: &DeliveredPacket| window.contains(&(d.delivery_slot - 1));
    let packets = record.deliveries.iter().filter(|d| served_in(d)).count() as u64;
    let cum = &record.delivered_bits_cum;
    let before = if start >= 2 { cum[start as usize - 2] } else { 0.0 };
    let bits = cum[end as usize - 1] - before;
    Ok(Throughput {
        packets,
        packets_per_s: packets as f64 / (slots as f64 * record.slot_duration_s),
        bits_per_slot: bits / slots as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Stability,
    /// Least-squares slope over the second half, bits per slot.
    pub slope_bits_per_slot: f64,
    /// Slope divided by the first-half mean occupancy (at least one bit).
    pub normalized_drift: f64,
    pub threshold_bits_per_slot: f64,
}

/// Default drift threshold as a fraction of a packet per slot.
pub const DEFAULT_DRIFT_FRACTION: f64 = 0.01;

/// Flags a queue trace as unstable when its occupancy keeps growing by more
/// than `threshold_bits_per_slot` per slot over the second half.
pub fn stability_classify(trace: &[f64], threshold_bits_per_slot: f64) -> Result<StabilityReport> {
    if trace.len() < MIN_STABILITY_HORIZON {
        return Err(Error::domain(format!(
            "stability needs at least {MIN_STABILITY_HORIZON} slots, got {}",
            trace.len()
        )));
    }
    let half = trace.len() / 2;
    let (first, second) = trace.split_at(half);
    let first_mean = first.iter().sum::<f64>() / first.len() as f64;
    let slope = least_squares_slope(second);
    let verdict = if slope > threshold_bits_per_slot {
        Stability::Unstable
    } else {
        Stability::Stable
    };
    Ok(StabilityReport {
        verdict,
        slope_bits_per_slot: slope,
        normalized_drift: slope / first_mean.max(1.0),
        threshold_bits_per_slot,
    })
}

fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
