//! Slotted two-hop simulation: BS buffer, relay, user.
//!
//! Every slot runs in the same order: channels are realized, arrivals join the
//! BS buffer, then the relaying mode serves the two subslots. A bit served in
//! slot `t` counts as delivered at the start of slot `t + 1`.

mod queue;
mod scheduler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::queue::{Chunk, NodeQueue, BIT_EPSILON};
pub use self::scheduler::{max_weight, mw_schedule, LinkChoice, SchedulerPolicy, WeightRule};
use crate::analytic::ChannelProbs;
use crate::channel::{bernoulli_draw, FadingModel, HopState, Link, LinkBudget};
use crate::error::{Error, Result};
use crate::metrics::{DeliveredPacket, MetricsRecord};
use crate::traffic::{Packet, TrafficModel, TrafficSource};

/// Stream ids carved out of one seed. Each consumer owns its stream so that
/// runs differing only in relaying mode see identical channels and arrivals.
const STREAM_BS_RELAY: u64 = 0;
const STREAM_RELAY_USER: u64 = 1;
const STREAM_TRAFFIC: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaying {
    /// Relay forwards in the subslot right after reception.
    Conventional,
    /// Relay buffers and a scheduler picks the active hop per subslot.
    Buffered,
}

impl Relaying {
    pub fn as_str(&self) -> &'static str {
        match self {
            Relaying::Conventional => "conventional",
            Relaying::Buffered => "buffered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    ConventionalBernoulli,
    BufferedBernoulli,
    ConventionalFading,
    BufferedFading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopConfig {
    pub budget: LinkBudget,
    pub fading: FadingModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelConfig {
    Bernoulli { probs: ChannelProbs },
    Fading { bs_relay: HopConfig, relay_user: HopConfig },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub relaying: Relaying,
    pub channel: ChannelConfig,
    pub traffic: TrafficModel,
    pub scheduler: SchedulerPolicy,
    pub horizon_slots: u64,
    pub slot_duration_s: f64,
    pub seed: u64,
    /// `None` is an unlimited relay buffer.
    pub relay_buffer_cap_bits: Option<f64>,
}

impl ScenarioConfig {
    pub fn mode(&self) -> Mode {
        match (self.relaying, &self.channel) {
            (Relaying::Conventional, ChannelConfig::Bernoulli { .. }) => Mode::ConventionalBernoulli,
            (Relaying::Buffered, ChannelConfig::Bernoulli { .. }) => Mode::BufferedBernoulli,
            (Relaying::Conventional, ChannelConfig::Fading { .. }) => Mode::ConventionalFading,
            (Relaying::Buffered, ChannelConfig::Fading { .. }) => Mode::BufferedFading,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon_slots < 1 {
            return Err(Error::config("horizon_slots", "must be at least 1"));
        }
        if !(self.slot_duration_s > 0.0 && self.slot_duration_s.is_finite()) {
            return Err(Error::config("slot_duration_s", "must be positive"));
        }
        if let Some(cap) = self.relay_buffer_cap_bits {
            if !(cap >= 1.0) {
                return Err(Error::config("relay_buffer_cap_bits", "must be at least 1 bit"));
            }
        }
        self.traffic
            .validate()
            .map_err(|e| Error::config("traffic", e.to_string()))?;
        match &self.channel {
            ChannelConfig::Bernoulli { probs } => probs
                .validate()
                .map_err(|e| Error::config("channel.p1/p2", e.to_string())),
            ChannelConfig::Fading { bs_relay, relay_user } => {
                for (name, hop) in [("bs_relay", bs_relay), ("relay_user", relay_user)] {
                    Link::new(hop.budget, hop.fading, self.slot_duration_s)
                        .map_err(|e| Error::config(name, e.to_string()))?;
                }
                Ok(())
            }
        }
    }
}

/// Channel state of both hops in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotChannels {
    Bernoulli { s1: HopState, s2: HopState },
    /// Full-slot bit capacities.
    Fading { r_br: f64, r_ru: f64 },
}

/// What happened in one slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotOutcome {
    pub moved_to_relay_bits: f64,
    pub delivered_bits: f64,
    /// Packets whose last bit reached the user, with `delivery_slot` set.
    pub delivered: Vec<Packet>,
    /// Link used in each subslot.
    pub subslots: [Option<LinkChoice>; 2],
}

/// Queues of the relay network at a slot boundary.
#[derive(Debug, Clone, Default)]
pub struct RelayState {
    pub bs: NodeQueue,
    pub relay: NodeQueue,
    /// Slot being served; 0 before the first slot.
    pub slot: u64,
    pub relay_cap_bits: Option<f64>,
}

impl RelayState {
    pub fn new(relay_cap_bits: Option<f64>) -> Self {
        Self {
            relay_cap_bits,
            ..Self::default()
        }
    }

    fn relay_room(&self) -> f64 {
        self.relay_cap_bits
            .map_or(f64::INFINITY, |cap| (cap - self.relay.occupancy_bits()).max(0.0))
    }

    fn deliver(&self, chunks: Vec<Chunk>, outcome: &mut SlotOutcome) {
        for c in chunks {
            outcome.delivered_bits += c.bits;
            if c.completes {
                let mut p = c.packet;
                p.delivery_slot = Some(self.slot + 1);
                outcome.delivered.push(p);
            }
        }
    }

    fn forward(&mut self, bits: f64, outcome: &mut SlotOutcome) {
        let chunks = self.bs.drain(bits.min(self.relay_room()));
        let moved: f64 = chunks.iter().map(|c| c.bits).sum();
        outcome.moved_to_relay_bits += moved;
        self.relay.receive(&chunks);
    }
}

/// Without a relay buffer one bit crosses both hops only in a GG slot.
pub fn step_conventional_bernoulli(state: &mut RelayState, s1: HopState, s2: HopState) -> SlotOutcome {
    let mut outcome = SlotOutcome::default();
    if s1.is_good() && s2.is_good() {
        let chunks = state.bs.drain(1.0);
        state.deliver(chunks, &mut outcome);
        outcome.subslots = [Some(LinkChoice::BsToRelay), Some(LinkChoice::RelayToUser)];
    }
    outcome
}

/// Subslot A moves one bit to the relay on a Good first hop (if there is
/// room); subslot B delivers one relay bit on a Good second hop.
pub fn step_buffered_bernoulli(state: &mut RelayState, s1: HopState, s2: HopState) -> SlotOutcome {
    let mut outcome = SlotOutcome::default();
    if s1.is_good() && state.relay_room() >= 1.0 {
        state.forward(1.0, &mut outcome);
        if outcome.moved_to_relay_bits > 0.0 {
            outcome.subslots[0] = Some(LinkChoice::BsToRelay);
        }
    }
    if s2.is_good() {
        let chunks = state.relay.drain(1.0);
        if !chunks.is_empty() {
            outcome.subslots[1] = Some(LinkChoice::RelayToUser);
        }
        state.deliver(chunks, &mut outcome);
    }
    outcome
}

/// End-to-end service of `min(r_br, r_ru) / 2` bits; nothing stays at the relay.
pub fn step_conventional_fading(state: &mut RelayState, r_br: f64, r_ru: f64) -> SlotOutcome {
    let mut outcome = SlotOutcome::default();
    let chunks = state.bs.drain(0.5 * r_br.min(r_ru));
    state.deliver(chunks, &mut outcome);
    outcome.subslots = [Some(LinkChoice::BsToRelay), Some(LinkChoice::RelayToUser)];
    outcome
}

/// Two scheduling epochs, each carrying half of the chosen hop's full-slot
/// rate. Decisions see the backlogs left by the previous subslot.
pub fn step_buffered_fading(
    state: &mut RelayState,
    r_br: f64,
    r_ru: f64,
    policy: SchedulerPolicy,
) -> SlotOutcome {
    let mut outcome = SlotOutcome::default();
    for sub in 0..2 {
        let choice = policy.choose(
            sub,
            state.bs.occupancy_bits(),
            state.relay.occupancy_bits(),
            r_br,
            r_ru,
        );
        match choice {
            LinkChoice::BsToRelay => state.forward(0.5 * r_br, &mut outcome),
            LinkChoice::RelayToUser => {
                let chunks = state.relay.drain(0.5 * r_ru);
                state.deliver(chunks, &mut outcome);
            }
            LinkChoice::Idle => {}
        }
        outcome.subslots[sub] = Some(choice);
    }
    outcome
}

enum ChannelSampler {
    Bernoulli(ChannelProbs),
    Fading { bs_relay: Link, relay_user: Link },
}

/// A single replication, advanced one slot at a time.
pub struct Simulation {
    config: ScenarioConfig,
    state: RelayState,
    sampler: ChannelSampler,
    traffic: TrafficSource,
    rng_bs_relay: ChaCha8Rng,
    rng_relay_user: ChaCha8Rng,
    rng_traffic: ChaCha8Rng,
    delivered_cum: f64,
    delivered_cum_trace: Vec<f64>,
    arrivals_trace: Vec<u32>,
    deliveries: Vec<DeliveredPacket>,
    delivered_packets: u64,
    arrived_packets: u64,
    arrived_bits: u64,
    slots_with_delivery: u64,
    max_conservation_error: f64,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let sampler = match config.channel {
            ChannelConfig::Bernoulli { probs } => ChannelSampler::Bernoulli(probs),
            ChannelConfig::Fading { bs_relay, relay_user } => ChannelSampler::Fading {
                bs_relay: Link::new(bs_relay.budget, bs_relay.fading, config.slot_duration_s)?,
                relay_user: Link::new(relay_user.budget, relay_user.fading, config.slot_duration_s)?,
            },
        };
        let horizon = config.horizon_slots as usize;
        Ok(Self {
            config,
            state: RelayState::new(config.relay_buffer_cap_bits),
            sampler,
            traffic: TrafficSource::new(config.traffic, config.slot_duration_s)?,
            rng_bs_relay: stream(config.seed, STREAM_BS_RELAY),
            rng_relay_user: stream(config.seed, STREAM_RELAY_USER),
            rng_traffic: stream(config.seed, STREAM_TRAFFIC),
            delivered_cum: 0.0,
            delivered_cum_trace: Vec::with_capacity(horizon),
            arrivals_trace: Vec::with_capacity(horizon),
            deliveries: Vec::new(),
            delivered_packets: 0,
            arrived_packets: 0,
            arrived_bits: 0,
            slots_with_delivery: 0,
            max_conservation_error: 0.0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &RelayState {
        &self.state
    }

    /// Slots completed so far.
    pub fn slot(&self) -> u64 {
        self.state.slot
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.config.horizon_slots
    }

    /// Draws the next slot's channels from the seeded streams. Both hops are
    /// drawn every slot whatever the mode.
    pub fn next_channels(&mut self) -> SlotChannels {
        match &self.sampler {
            ChannelSampler::Bernoulli(p) => SlotChannels::Bernoulli {
                s1: bernoulli_draw(p.p1, &mut self.rng_bs_relay),
                s2: bernoulli_draw(p.p2, &mut self.rng_relay_user),
            },
            ChannelSampler::Fading { bs_relay, relay_user } => SlotChannels::Fading {
                r_br: bs_relay.realize(&mut self.rng_bs_relay).rate_bits_full_slot,
                r_ru: relay_user.realize(&mut self.rng_relay_user).rate_bits_full_slot,
            },
        }
    }

    /// Bits that could leave the BS this slot; the saturated source keeps at
    /// least this much queued.
    fn saturation_floor(&self, channels: &SlotChannels) -> f64 {
        match (*channels, self.config.relaying) {
            (SlotChannels::Bernoulli { .. }, _) => 1.0,
            (SlotChannels::Fading { r_br, r_ru }, Relaying::Conventional) => 0.5 * r_br.min(r_ru),
            (SlotChannels::Fading { r_br, .. }, Relaying::Buffered) => r_br,
        }
    }

    /// Runs one slot with the given channel states.
    pub fn step_with(&mut self, channels: SlotChannels) -> Result<SlotOutcome> {
        if self.is_done() {
            return Err(Error::domain("simulation horizon already reached"));
        }
        let t = self.state.slot + 1;
        self.state.slot = t;

        let q_before = self.state.bs.occupancy_bits() + self.state.relay.occupancy_bits();
        let floor = self.saturation_floor(&channels);
        let arrivals = self.traffic.arrivals(
            t,
            self.state.bs.occupancy_bits(),
            floor,
            &mut self.rng_traffic,
        )?;
        let mut arrived_now = 0u64;
        self.arrivals_trace.push(arrivals.len() as u32);
        for p in arrivals {
            arrived_now += p.size_bits;
            self.arrived_packets += 1;
            self.state.bs.push(p);
        }
        self.arrived_bits += arrived_now;

        let outcome = match (self.config.mode(), channels) {
            (Mode::ConventionalBernoulli, SlotChannels::Bernoulli { s1, s2 }) => {
                step_conventional_bernoulli(&mut self.state, s1, s2)
            }
            (Mode::BufferedBernoulli, SlotChannels::Bernoulli { s1, s2 }) => {
                step_buffered_bernoulli(&mut self.state, s1, s2)
            }
            (Mode::ConventionalFading, SlotChannels::Fading { r_br, r_ru }) => {
                step_conventional_fading(&mut self.state, r_br, r_ru)
            }
            (Mode::BufferedFading, SlotChannels::Fading { r_br, r_ru }) => {
                step_buffered_fading(&mut self.state, r_br, r_ru, self.config.scheduler)
            }
            (mode, _) => {
                return Err(Error::config(
                    "channel",
                    format!("slot channels do not match mode {mode:?}"),
                ))
            }
        };

        let q_after = self.state.bs.occupancy_bits() + self.state.relay.occupancy_bits();
        let imbalance = (arrived_now as f64 - (q_after - q_before) - outcome.delivered_bits).abs();
        self.max_conservation_error = self.max_conservation_error.max(imbalance);

        self.delivered_cum += outcome.delivered_bits;
        if outcome.delivered_bits > 0.0 {
            self.slots_with_delivery += 1;
        }
        self.delivered_packets += outcome.delivered.len() as u64;
        self.deliveries.extend(outcome.delivered.iter().map(DeliveredPacket::from_packet));
        self.state.bs.record();
        self.state.relay.record();
        self.delivered_cum_trace.push(self.delivered_cum);
        Ok(outcome)
    }

    /// Draws channels and runs one slot.
    pub fn step(&mut self) -> Result<SlotOutcome> {
        let channels = self.next_channels();
        self.step_with(channels)
    }

    pub fn finish(mut self) -> MetricsRecord {
        MetricsRecord {
            config: self.config,
            seed: self.config.seed,
            slot_duration_s: self.config.slot_duration_s,
            q_bs_bits: self.state.bs.take_trace(),
            q_relay_bits: self.state.relay.take_trace(),
            delivered_bits_cum: self.delivered_cum_trace,
            arrivals_per_slot: self.arrivals_trace,
            deliveries: self.deliveries,
            delays_suppressed: self.config.traffic.is_saturated(),
            arrived_packets: self.arrived_packets,
            arrived_bits: self.arrived_bits,
            delivered_packets: self.delivered_packets,
            censored_packets: self.arrived_packets - self.delivered_packets,
            slots_with_delivery: self.slots_with_delivery,
            max_conservation_error_bits: self.max_conservation_error,
        }
    }
}

/// Runs a full replication.
pub fn run(config: &ScenarioConfig) -> Result<MetricsRecord> {
    let mut sim = Simulation::new(*config)?;
    while !sim.is_done() {
        sim.step()?;
    }
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::channel::HopState::{Bad, Good};

    fn loaded(bits: u64) -> RelayState {
        let mut s = RelayState::new(None);
        s.slot = 1;
        s.bs.push(Packet::new(0, 1, bits));
        s
    }

    #[test]
    fn conventional_bernoulli_serves_only_gg() {
        let mut s = loaded(5);
        let o = step_conventional_bernoulli(&mut s, Good, Good);
        assert_eq!(o.delivered_bits, 1.0);
        assert_eq!(s.bs.occupancy_bits(), 4.0);
        for (a, b) in [(Good, Bad), (Bad, Good), (Bad, Bad)] {
            let o = step_conventional_bernoulli(&mut s, a, b);
            assert_eq!(o.delivered_bits, 0.0);
            assert_eq!(s.bs.occupancy_bits(), 4.0);
            assert_eq!(s.relay.occupancy_bits(), 0.0);
        }
        let mut empty = RelayState::new(None);
        assert_eq!(step_conventional_bernoulli(&mut empty, Good, Good).delivered_bits, 0.0);
    }

    #[test]
    fn buffered_bernoulli_relays_within_slot() {
        let mut s = loaded(3);
        let o = step_buffered_bernoulli(&mut s, Good, Good);
        assert_eq!(o.moved_to_relay_bits, 1.0);
        assert_eq!(o.delivered_bits, 1.0);
        assert_eq!(s.relay.occupancy_bits(), 0.0);

        let o = step_buffered_bernoulli(&mut s, Bad, Bad);
        assert_eq!(o.moved_to_relay_bits + o.delivered_bits, 0.0);
        assert_eq!(s.bs.occupancy_bits(), 2.0);
    }

    #[test]
    fn buffered_bernoulli_respects_cap() {
        let mut s = loaded(10);
        s.relay_cap_bits = Some(2.0);
        for _ in 0..5 {
            step_buffered_bernoulli(&mut s, Good, Bad);
        }
        assert_eq!(s.relay.occupancy_bits(), 2.0);
        assert_eq!(s.bs.occupancy_bits(), 8.0);
    }

    #[test]
    fn conventional_fading_examples() {
        let mut s = loaded(1_000_000);
        assert_eq!(step_conventional_fading(&mut s, 0.0, 500.0).delivered_bits, 0.0);
        assert_abs_diff_eq!(step_conventional_fading(&mut s, 360.0, 180.0).delivered_bits, 90.0);
        assert_eq!(s.relay.occupancy_bits(), 0.0);

        let mut s = loaded(40);
        let o = step_conventional_fading(&mut s, 360.0, 360.0);
        assert_abs_diff_eq!(o.delivered_bits, 40.0);
        assert_eq!(o.delivered.len(), 1);
        assert_eq!(o.delivered[0].delivery_slot, Some(2));
    }

    #[test]
    fn buffered_fading_grants_bs_while_backlog_dominates() {
        // After subslot 0 the relay holds 50 bits; (10000 - 50) * 100 beats
        // 50 * 400, so the BS keeps the channel.
        let mut s = loaded(10_000);
        let o = step_buffered_fading(&mut s, 100.0, 400.0, SchedulerPolicy::default());
        assert_eq!(o.subslots, [Some(LinkChoice::BsToRelay), Some(LinkChoice::BsToRelay)]);
        assert_abs_diff_eq!(s.relay.occupancy_bits(), 100.0);
        assert_eq!(o.delivered_bits, 0.0);
    }

    #[test]
    fn buffered_fading_drains_relay_when_bs_empty() {
        let mut s = RelayState::new(None);
        s.slot = 1;
        s.relay.push(Packet::new(0, 1, 1000));
        let o = step_buffered_fading(&mut s, 500.0, 200.0, SchedulerPolicy::default());
        assert_eq!(o.subslots, [Some(LinkChoice::RelayToUser), Some(LinkChoice::RelayToUser)]);
        assert_abs_diff_eq!(o.delivered_bits, 200.0);
        assert_abs_diff_eq!(s.relay.occupancy_bits(), 800.0);
    }

    #[test]
    fn buffered_fading_dead_second_hop_never_delivers() {
        let mut s = loaded(5_000);
        for _ in 0..50 {
            s.slot += 1;
            let o = step_buffered_fading(&mut s, 300.0, 0.0, SchedulerPolicy::default());
            assert_eq!(o.delivered_bits, 0.0);
        }
        assert!(s.relay.occupancy_bits() > 0.0);
    }

    #[test]
    fn fixed_subslots_policy() {
        let mut s = loaded(1000);
        let o = step_buffered_fading(&mut s, 300.0, 100.0, SchedulerPolicy::FixedSubslots);
        assert_abs_diff_eq!(o.moved_to_relay_bits, 150.0);
        assert_abs_diff_eq!(o.delivered_bits, 50.0);
    }

    #[test]
    fn invalid_config_names_field() {
        let mut cfg = ScenarioConfig {
            relaying: Relaying::Conventional,
            channel: ChannelConfig::Bernoulli {
                probs: ChannelProbs { p1: 0.5, p2: 0.5 },
            },
            traffic: TrafficModel::DeterministicBits { n_bits: 3 },
            scheduler: SchedulerPolicy::default(),
            horizon_slots: 0,
            slot_duration_s: 1e-3,
            seed: 0,
            relay_buffer_cap_bits: None,
        };
        match run(&cfg) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "horizon_slots"),
            other => panic!("unexpected {other:?}"),
        }
        cfg.horizon_slots = 10;
        cfg.channel = ChannelConfig::Bernoulli {
            probs: ChannelProbs { p1: 1.5, p2: 0.5 },
        };
        assert!(matches!(run(&cfg), Err(Error::Config { .. })));
    }
}
