use serde::{Deserialize, Serialize};

/// Which hop transmits in a subslot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkChoice {
    BsToRelay,
    RelayToUser,
    Idle,
}

/// Backlog term used for the BS to relay weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `(q_bs - q_relay)+`, the backpressure form.
    #[default]
    Differential,
    /// `q_bs` alone.
    QueueLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// BS in the first subslot, relay in the second.
    FixedSubslots,
    MaxWeight { weight: WeightRule },
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        SchedulerPolicy::MaxWeight {
            weight: WeightRule::Differential,
        }
    }
}

impl SchedulerPolicy {
    /// Decision for subslot `subslot` (0 or 1) given the current backlogs and
    /// full-slot rates.
    pub fn choose(&self, subslot: usize, q_bs: f64, q_relay: f64, r_br: f64, r_ru: f64) -> LinkChoice {
        match *self {
            SchedulerPolicy::FixedSubslots if subslot == 0 => LinkChoice::BsToRelay,
            SchedulerPolicy::FixedSubslots => LinkChoice::RelayToUser,
            SchedulerPolicy::MaxWeight { weight } => max_weight(weight, q_bs, q_relay, r_br, r_ru),
        }
    }
}

/// Max-Weight decision with differential backlog on the first hop. Ties go to
/// the relay; `Idle` only when both weights vanish.
pub fn mw_schedule(q_bs: f64, q_relay: f64, r_br: f64, r_ru: f64) -> LinkChoice {
    max_weight(WeightRule::Differential, q_bs, q_relay, r_br, r_ru)
}

pub fn max_weight(rule: WeightRule, q_bs: f64, q_relay: f64, r_br: f64, r_ru: f64) -> LinkChoice {
    let backlog = match rule {
        WeightRule::Differential => (q_bs - q_relay).max(0.0),
        WeightRule::QueueLength => q_bs.max(0.0),
    };
    let w_br = backlog * r_br.max(0.0);
    let w_ru = q_relay.max(0.0) * r_ru.max(0.0);
    if w_br == 0.0 && w_ru == 0.0 {
        LinkChoice::Idle
    } else if w_ru >= w_br {
        LinkChoice::RelayToUser
    } else {
        LinkChoice::BsToRelay
    }
}
