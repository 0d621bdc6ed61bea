//! Closed-form results for the Bernoulli two-hop relay and the single-server
//! slotted queue, plus a finite Markov-chain solver for the buffered relay.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// Relay buffer size used by [`solve_buffered_bernoulli_chain`] callers that
/// want an effectively unbounded relay.
pub const DEFAULT_CHAIN_CAP: usize = 64;

/// Per-slot probabilities that each hop is Good.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProbs {
    /// BS to relay.
    pub p1: f64,
    /// Relay to user.
    pub p2: f64,
}

impl ChannelProbs {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let probs = Self { p1, p2 };
        probs.validate()?;
        Ok(probs)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p1", self.p1)?;
        check_probability("p2", self.p2)
    }
}

/// Distribution of the joint hop state `(s1, s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointStateDistribution {
    pub gg: f64,
    pub gb: f64,
    pub bg: f64,
    pub bb: f64,
}

impl JointStateDistribution {
    pub fn total(&self) -> f64 {
        self.gg + self.gb + self.bg + self.bb
    }
}

/// Slots in which the server of the single-queue system does not serve.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InactiveSlotSet {
    slots: BTreeSet<u64>,
}

impl InactiveSlotSet {
    /// Builds the set from strictly increasing slot indices, all at least 1.
    pub fn new(slots: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut prev = 0u64;
        for s in slots {
            if s < 1 {
                return Err(Error::domain("slot indices start at 1"));
            }
            if s <= prev {
                return Err(Error::domain(format!(
                    "inactive slots must be strictly increasing, got {s} after {prev}"
                )));
            }
            prev = s;
            set.insert(s);
        }
        Ok(Self { slots: set })
    }

    pub fn contains(&self, slot: u64) -> bool {
        self.slots.contains(&slot)
    }

    /// Number of inactive slots in `1..=slot`.
    pub fn count_through(&self, slot: u64) -> u64 {
        self.slots.range(..=slot).count() as u64
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.slots.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

pub fn joint_state_probs(p: ChannelProbs) -> Result<JointStateDistribution> {
    p.validate()?;
    let ChannelProbs { p1, p2 } = p;
    Ok(JointStateDistribution {
        gg: p1 * p2,
        gb: p1 * (1.0 - p2),
        bg: (1.0 - p1) * p2,
        bb: (1.0 - p1) * (1.0 - p2),
    })
}

/// Probability that the conventional (no relay buffer) system serves nothing
/// in a slot: every joint state except GG.
pub fn interruption_prob_conventional(p: ChannelProbs) -> Result<f64> {
    p.validate()?;
    Ok(1.0 - p.p1 * p.p2)
}

/// Delivery slot `i + n_i + 1` of bit `i`, where `n_i` counts the inactive
/// slots in `1..=i`.
///
/// This closed form only accounts for interruptions up to the bit's arrival.
/// An inactive slot falling after the arrival but before the bit reaches the
/// server delays it as well; [`fifo_delivery_slot`] handles that case.
pub fn deterministic_delivery_slot(i: u64, inactive: &InactiveSlotSet) -> Result<u64> {
    if i < 1 {
        return Err(Error::domain("bit index must be at least 1"));
    }
    Ok(i + inactive.count_through(i) + 1)
}

/// Exact delivery slot of bit `i` in the one-bit-per-slot system: bit `i` is
/// served in the `i`-th active slot and delivered at the start of the next.
pub fn fifo_delivery_slot(i: u64, inactive: &InactiveSlotSet) -> Result<u64> {
    if i < 1 {
        return Err(Error::domain("bit index must be at least 1"));
    }
    // Each inactive slot at or before the current candidate pushes service
    // back by one; iterate to the fixed point.
    let mut served_at = i;
    let mut counted = 0;
    loop {
        let n = inactive.count_through(served_at);
        if n == counted {
            return Ok(served_at + 1);
        }
        served_at += n - counted;
        counted = n;
    }
}

/// Stationary solution of the buffered Bernoulli relay under a saturated BS.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferedChainSolution {
    /// Long-run probability of each relay occupancy `0..=cap` at slot start.
    pub stationary: Vec<f64>,
    /// Long-run probability that a slot delivers a bit to the user.
    pub delivery_probability: f64,
}

impl BufferedChainSolution {
    pub fn interruption_probability(&self) -> f64 {
        1.0 - self.delivery_probability
    }
}

/// Solves the relay-occupancy chain of the buffered Bernoulli system.
///
/// Per slot: the BS hands one bit to the relay with probability `p1` unless the
/// relay holds `buffer_cap` bits, then the relay delivers one bit with
/// probability `p2` if it holds any (including the bit just received). The
/// chain starts empty; when it is reducible the distribution is the one on the
/// closed class reached from the empty state.
pub fn solve_buffered_bernoulli_chain(
    p: ChannelProbs,
    buffer_cap: usize,
) -> Result<BufferedChainSolution> {
    p.validate()?;
    if buffer_cap < 1 {
        return Err(Error::domain("buffer_cap must be at least 1"));
    }
    let n = buffer_cap + 1;
    let transition = chain_transition_matrix(p, buffer_cap);

    let class = closed_class_from_empty(&transition)?;
    let k = class.len();

    // Balance equations pi (P - I) = 0 restricted to the class; the last
    // equation is replaced by normalization.
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (row, &j) in class.iter().enumerate() {
        for (col, &i) in class.iter().enumerate() {
            a[(row, col)] = transition[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for col in 0..k {
        a[(k - 1, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;

    let solved = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numeric("singular balance equations".into()))?;
    if solved.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite stationary distribution".into()));
    }

    let mut stationary = vec![0.0; n];
    for (idx, &state) in class.iter().enumerate() {
        // Clamp rounding dust below zero.
        stationary[state] = solved[idx].max(0.0);
    }
    let total: f64 = stationary.iter().sum();
    stationary.iter_mut().for_each(|v| *v /= total);

    // A bit is available in subslot B unless the relay was empty and the BS
    // failed to hand one over.
    let delivery_probability = p.p2 * (1.0 - stationary[0] * (1.0 - p.p1));

    Ok(BufferedChainSolution {
        stationary,
        delivery_probability,
    })
}

fn chain_transition_matrix(p: ChannelProbs, cap: usize) -> Vec<Vec<f64>> {
    let n = cap + 1;
    let mut m = vec![vec![0.0; n]; n];
    for q in 0..n {
        let arrive = if q < cap { p.p1 } else { 0.0 };
        // After subslot A the relay holds q or q + 1 bits.
        let mut outcomes = vec![(q, 1.0 - arrive)];
        if arrive > 0.0 {
            outcomes.push((q + 1, arrive));
        }
        for (mid, w) in outcomes {
            if mid >= 1 {
                m[q][mid - 1] += w * p.p2;
                m[q][mid] += w * (1.0 - p.p2);
            } else {
                m[q][mid] += w;
            }
        }
    }
    m
}

/// States of the unique closed communicating class reachable from state 0.
fn closed_class_from_empty(transition: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = transition.len();
    let reach: Vec<Vec<bool>> = (0..n).map(|s| reachable_from(transition, s)).collect();
    let closed: Vec<usize> = (0..n)
        .filter(|&i| reach[0][i])
        .filter(|&i| (0..n).all(|j| !reach[i][j] || reach[j][i]))
        .collect();
    let Some(&root) = closed.first() else {
        return Err(Error::Numeric("no recurrent class reachable".into()));
    };
    let class: Vec<usize> = closed.iter().copied().filter(|&j| reach[root][j]).collect();
    if class.len() != closed.len() {
        return Err(Error::Numeric(
            "more than one recurrent class reachable from an empty relay".into(),
        ));
    }
    Ok(class)
}

fn reachable_from(transition: &[Vec<f64>], start: usize) -> Vec<bool> {
    let n = transition.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(s) = stack.pop() {
        for (t, &w) in transition[s].iter().enumerate() {
            if w > 0.0 && !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}
