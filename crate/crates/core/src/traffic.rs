//! Arrival processes feeding the BS buffer.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub arrival_slot: u64,
    pub size_bits: u64,
    pub delivery_slot: Option<u64>,
}

impl Packet {
    pub fn new(id: u64, arrival_slot: u64, size_bits: u64) -> Self {
        Self {
            id,
            arrival_slot,
            size_bits,
            delivery_slot: None,
        }
    }

    /// End-to-end delay in slots, once delivered.
    pub fn delay_slots(&self) -> Option<u64> {
        self.delivery_slot.map(|d| d - self.arrival_slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficModel {
    /// One single-bit packet per slot for slots `1..=n_bits`.
    DeterministicBits { n_bits: u64 },
    Poisson {
        rate_pps: f64,
        packet_size_bits: u64,
    },
    /// BS buffer is kept non-empty; used to measure service probabilities.
    Saturated { packet_size_bits: u64 },
}

impl TrafficModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TrafficModel::DeterministicBits { n_bits } if n_bits < 1 => {
                Err(Error::domain("deterministic traffic needs at least one bit"))
            }
            TrafficModel::Poisson { rate_pps, .. } if !(rate_pps >= 0.0 && rate_pps.is_finite()) => {
                Err(Error::domain(format!("arrival rate must be non-negative, got {rate_pps}")))
            }
            TrafficModel::Poisson { packet_size_bits: 0, .. }
            | TrafficModel::Saturated { packet_size_bits: 0 } => {
                Err(Error::domain("packet size must be at least one bit"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_saturated(&self) -> bool {
        matches!(self, TrafficModel::Saturated { .. })
    }

    pub fn rate_pps(&self) -> Option<f64> {
        match *self {
            TrafficModel::Poisson { rate_pps, .. } => Some(rate_pps),
            _ => None,
        }
    }

    /// Copy with the Poisson rate replaced; `None` for other laws.
    pub fn with_rate(&self, rate_pps: f64) -> Option<Self> {
        match *self {
            TrafficModel::Poisson { packet_size_bits, .. } => Some(TrafficModel::Poisson {
                rate_pps,
                packet_size_bits,
            }),
            _ => None,
        }
    }
}

/// Stateful generator: owns the packet id counter and the Poisson sampler.
#[derive(Debug, Clone)]
pub struct TrafficSource {
    model: TrafficModel,
    slot_duration_s: f64,
    poisson: Option<Poisson<f64>>,
    next_id: u64,
}

impl TrafficSource {
    pub fn new(model: TrafficModel, slot_duration_s: f64) -> Result<Self> {
        model.validate()?;
        if !(slot_duration_s > 0.0) {
            return Err(Error::domain("slot duration must be positive"));
        }
        let poisson = match model {
            TrafficModel::Poisson { rate_pps, .. } if rate_pps > 0.0 => Some(
                Poisson::new(rate_pps * slot_duration_s)
                    .map_err(|e| Error::domain(format!("poisson mean: {e}")))?,
            ),
            _ => None,
        };
        Ok(Self {
            model,
            slot_duration_s,
            poisson,
            next_id: 0,
        })
    }

    pub fn model(&self) -> TrafficModel {
        self.model
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_duration_s
    }

    /// Packets arriving at the start of slot `t`.
    ///
    /// For a saturated source, `bs_backlog_bits` and `floor_bits` decide the
    /// top-up: packets are added until the backlog reaches `floor_bits`. Both
    /// are ignored by the other laws.
    pub fn arrivals<R: Rng + ?Sized>(
        &mut self,
        t: u64,
        bs_backlog_bits: f64,
        floor_bits: f64,
        rng: &mut R,
    ) -> Result<Vec<Packet>> {
        if t < 1 {
            return Err(Error::domain("slot indices start at 1"));
        }
        let count = match self.model {
            TrafficModel::DeterministicBits { n_bits } => u64::from(t <= n_bits),
            TrafficModel::Poisson { .. } => match &self.poisson {
                Some(dist) => dist.sample(rng) as u64,
                None => 0,
            },
            TrafficModel::Saturated { packet_size_bits } => {
                let missing = (floor_bits - bs_backlog_bits).max(0.0);
                (missing / packet_size_bits as f64).ceil() as u64
            }
        };
        let size = self.packet_size_bits();
        Ok((0..count).map(|_| self.issue(t, size)).collect())
    }

    fn packet_size_bits(&self) -> u64 {
        match self.model {
            TrafficModel::DeterministicBits { .. } => 1,
            TrafficModel::Poisson { packet_size_bits, .. }
            | TrafficModel::Saturated { packet_size_bits } => packet_size_bits,
        }
    }

    fn issue(&mut self, t: u64, size_bits: u64) -> Packet {
        let p = Packet::new(self.next_id, t, size_bits);
        self.next_id += 1;
        p
    }
}

/// One-shot form of [`TrafficSource::arrivals`] for the non-saturated laws.
/// Packet ids start at `first_id`.
pub fn arrivals_for_slot<R: Rng + ?Sized>(
    model: TrafficModel,
    t: u64,
    slot_duration_s: f64,
    first_id: u64,
    rng: &mut R,
) -> Result<Vec<Packet>> {
    let mut source = TrafficSource::new(model, slot_duration_s)?;
    source.next_id = first_id;
    source.arrivals(t, 0.0, 0.0, rng)
}
