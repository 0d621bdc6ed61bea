//! Experiment files.
//!
//! A TOML document with optional sections `[scenario]`, `[channel]`,
//! `[topology]`, `[bs_relay]`, `[relay_user]`, `[traffic]`, `[scheduler]`,
//! `[metrics]` and `[experiment]`. Every key has a default, so an empty file
//! describes the reference scenario: 1000 m cell with the relay halfway to a
//! cell-edge user, 1 ms slots, 180 kHz, -174 dBm/Hz noise, Poisson arrivals of
//! 1000-bit packets, Rician (6 dB) first hop, Rayleigh second hop and 10000
//! slots. See the README for the full key list.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::ChannelProbs;
use crate::channel::{FadingModel, LinkBudget};
use crate::engine::{ChannelConfig, HopConfig, Relaying, ScenarioConfig, SchedulerPolicy, WeightRule};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_DRIFT_FRACTION;
use crate::traffic::TrafficModel;

pub const DEFAULT_HORIZON_SLOTS: u64 = 10_000;
pub const DEFAULT_SLOT_DURATION_S: f64 = 1e-3;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 180_000.0;
pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -174.0;
pub const DEFAULT_CELL_RADIUS_M: f64 = 1000.0;
pub const DEFAULT_MIN_UE_DISTANCE_M: f64 = 50.0;
pub const DEFAULT_PACKET_SIZE_BITS: u64 = 1000;
pub const DEFAULT_RATE_PPS: f64 = 50.0;
pub const DEFAULT_RICIAN_K_DB: f64 = 6.0;
pub const DEFAULT_BS_TX_DBM: f64 = 46.0;
/// Effective relay power. Puts the mean relay-to-user SNR near -1 dB at the
/// cell edge, where conventional relaying saturates between 60 and 100
/// packets/s.
pub const DEFAULT_RELAY_TX_DBM: f64 = -25.0;
pub const DEFAULT_BS_RELAY_PATHLOSS: (f64, f64) = (100.7, 23.5);
pub const DEFAULT_RELAY_USER_PATHLOSS: (f64, f64) = (103.8, 20.9);

/// Post-processing options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Packets arriving in slots `1..=warmup_slots` are left out of delay and
    /// throughput statistics.
    pub warmup_slots: u64,
    /// Unstable when the queue grows faster than this fraction of a packet
    /// per slot.
    pub drift_threshold_fraction: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            warmup_slots: 0,
            drift_threshold_fraction: DEFAULT_DRIFT_FRACTION,
        }
    }
}

/// A fully resolved batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Base scenario; `relaying` and the Poisson rate are replaced per cell.
    pub scenario: ScenarioConfig,
    pub modes: Vec<Relaying>,
    /// Poisson arrival rates in packets/s.
    pub sweep: Option<Vec<f64>>,
    /// One replication per seed.
    pub seeds: Vec<u64>,
    /// Not echoed in outputs: neither affects results.
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub parallel: usize,
    pub metrics: MetricsOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec::from_toml_str("").expect("defaults are valid")
    }
}

/// Command-line overrides applied on top of a parsed file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallel: Option<usize>,
    pub modes: Option<Vec<Relaying>>,
    pub sweep: Option<Vec<f64>>,
}

impl ExperimentSpec {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(src).map_err(|e| toml_error(src, &e))?;
        file.resolve().map_err(|e| attach_line(src, e))
    }

    pub fn apply(mut self, o: Overrides) -> Result<Self> {
        if let Some(dir) = o.output_dir {
            self.output_dir = dir;
        }
        if let Some(seed) = o.seed {
            let n = self.seeds.len() as u64;
            self.seeds = (0..n).map(|k| seed + k).collect();
            self.scenario.seed = seed;
        }
        if let Some(k) = o.parallel {
            if k < 1 {
                return Err(Error::config("parallel", "must be at least 1"));
            }
            self.parallel = k;
        }
        if let Some(modes) = o.modes {
            if modes.is_empty() {
                return Err(Error::config("mode", "at least one relaying mode is required"));
            }
            self.modes = modes;
        }
        if let Some(sweep) = o.sweep {
            validate_sweep(&sweep, &self.scenario.traffic)?;
            self.sweep = Some(sweep);
        }
        Ok(self)
    }

    /// Arrival rates to run: the sweep, or the scenario's own rate.
    pub fn rates(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.iter().map(|&r| Some(r)).collect(),
            None => vec![self.scenario.traffic.rate_pps()],
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io_path("reading", path, e))?;
    ExperimentSpec::from_toml_str(&src)
}

pub fn parse_mode(s: &str) -> Result<Vec<Relaying>> {
    match s {
        "conventional" => Ok(vec![Relaying::Conventional]),
        "buffered" => Ok(vec![Relaying::Buffered]),
        "both" => Ok(vec![Relaying::Conventional, Relaying::Buffered]),
        other => Err(Error::config(
            "mode",
            format!("expected conventional, buffered or both, got `{other}`"),
        )),
    }
}

fn validate_sweep(sweep: &[f64], traffic: &TrafficModel) -> Result<()> {
    if !matches!(traffic, TrafficModel::Poisson { .. }) {
        return Err(Error::config("experiment.sweep", "a rate sweep needs Poisson traffic"));
    }
    if sweep.is_empty() {
        return Err(Error::config("experiment.sweep", "must not be empty"));
    }
    if sweep.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::config("experiment.sweep", "rates must be positive"));
    }
    if sweep.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("experiment.sweep", "rates must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    scenario: ScenarioSection,
    channel: ChannelSection,
    topology: TopologySection,
    bs_relay: HopSection,
    relay_user: HopSection,
    traffic: TrafficSection,
    scheduler: SchedulerSection,
    metrics: MetricsSection,
    experiment: ExperimentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    horizon_slots: i64,
    slot_duration_s: f64,
    seed: u64,
    relay_buffer_cap_bits: Option<f64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            horizon_slots: DEFAULT_HORIZON_SLOTS as i64,
            slot_duration_s: DEFAULT_SLOT_DURATION_S,
            seed: 1,
            relay_buffer_cap_bits: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ChannelKind {
    #[default]
    Fading,
    Bernoulli,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ChannelSection {
    kind: ChannelKind,
    bandwidth_hz: f64,
    noise_psd_dbm_hz: f64,
    p1: Option<f64>,
    p2: Option<f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            kind: ChannelKind::Fading,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            noise_psd_dbm_hz: DEFAULT_NOISE_PSD_DBM_HZ,
            p1: None,
            p2: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TopologySection {
    cell_radius_m: f64,
    min_ue_distance_m: f64,
    /// Defaults to half the cell radius.
    relay_distance_m: Option<f64>,
    /// BS to user, collinear with the relay. Defaults to the cell edge.
    user_distance_m: Option<f64>,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            cell_radius_m: DEFAULT_CELL_RADIUS_M,
            min_ue_distance_m: DEFAULT_MIN_UE_DISTANCE_M,
            relay_distance_m: None,
            user_distance_m: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FadingKind {
    Rayleigh,
    Rician,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HopSection {
    tx_power_dbm: Option<f64>,
    pathloss_a_db: Option<f64>,
    pathloss_b: Option<f64>,
    fading: Option<FadingKind>,
    rician_k_db: Option<f64>,
}

struct HopDefaults {
    tx_power_dbm: f64,
    pathloss: (f64, f64),
    fading: FadingKind,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TrafficKind {
    #[default]
    Poisson,
    Deterministic,
    Saturated,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrafficSection {
    model: TrafficKind,
    rate_pps: f64,
    packet_size_bits: i64,
    n_bits: Option<i64>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            model: TrafficKind::Poisson,
            rate_pps: DEFAULT_RATE_PPS,
            packet_size_bits: DEFAULT_PACKET_SIZE_BITS as i64,
            n_bits: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyKind {
    #[default]
    MaxWeight,
    FixedSubslots,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SchedulerSection {
    policy: PolicyKind,
    weight: WeightRule,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MetricsSection {
    warmup_slots: i64,
    drift_threshold_fraction: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            warmup_slots: 0,
            drift_threshold_fraction: DEFAULT_DRIFT_FRACTION,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ExperimentSection {
    modes: String,
    sweep: Option<Vec<f64>>,
    replications: i64,
    seeds: Option<Vec<u64>>,
    output_dir: PathBuf,
    parallel: i64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            modes: "both".into(),
            sweep: None,
            replications: 1,
            seeds: None,
            output_dir: PathBuf::from("out"),
            parallel: 1,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, format!("must be positive, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

fn at_least(field: &str, v: i64, min: i64) -> Result<u64> {
    if v >= min {
        Ok(v as u64)
    } else {
        Err(Error::config(field, format!("must be at least {min}, got {v}")))
    }
}

impl FileConfig {
    fn resolve(self) -> Result<ExperimentSpec> {
        let s = &self.scenario;
        let horizon_slots = at_least("scenario.horizon_slots", s.horizon_slots, 1)?;
        let slot_duration_s = positive("scenario.slot_duration_s", s.slot_duration_s)?;
        if let Some(cap) = s.relay_buffer_cap_bits {
            if !(cap >= 1.0) {
                return Err(Error::config(
                    "scenario.relay_buffer_cap_bits",
                    "must be at least 1 bit",
                ));
            }
        }

        let channel = self.resolve_channel()?;
        let traffic = self.resolve_traffic()?;

        let scheduler = match self.scheduler.policy {
            PolicyKind::FixedSubslots => SchedulerPolicy::FixedSubslots,
            PolicyKind::MaxWeight => SchedulerPolicy::MaxWeight {
                weight: self.scheduler.weight,
            },
        };

        let e = &self.experiment;
        let modes = parse_mode(&e.modes).map_err(|err| match err {
            Error::Config { message, .. } => Error::config("experiment.modes", message),
            other => other,
        })?;
        let seeds = match &e.seeds {
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::config("experiment.seeds", "must not be empty"));
                }
                if e.replications != 1 && e.replications as usize != list.len() {
                    return Err(Error::config(
                        "experiment.replications",
                        format!("{} replications but {} seeds", e.replications, list.len()),
                    ));
                }
                list.clone()
            }
            None => {
                let n = at_least("experiment.replications", e.replications, 1)?;
                (0..n).map(|k| s.seed + k).collect()
            }
        };
        if let Some(sweep) = &e.sweep {
            validate_sweep(sweep, &traffic)?;
        }
        let parallel = at_least("experiment.parallel", e.parallel, 1)? as usize;

        let m = &self.metrics;
        let metrics = MetricsOptions {
            warmup_slots: at_least("metrics.warmup_slots", m.warmup_slots, 0)?,
            drift_threshold_fraction: positive(
                "metrics.drift_threshold_fraction",
                m.drift_threshold_fraction,
            )?,
        };
        if metrics.warmup_slots >= horizon_slots {
            return Err(Error::config(
                "metrics.warmup_slots",
                "must be shorter than the horizon",
            ));
        }

        let scenario = ScenarioConfig {
            relaying: modes[0],
            channel,
            traffic,
            scheduler,
            horizon_slots,
            slot_duration_s,
            seed: seeds[0],
            relay_buffer_cap_bits: s.relay_buffer_cap_bits,
        };
        scenario.validate()?;

        Ok(ExperimentSpec {
            scenario,
            modes,
            sweep: e.sweep.clone(),
            seeds,
            output_dir: e.output_dir.clone(),
            parallel,
            metrics,
        })
    }

    fn resolve_channel(&self) -> Result<ChannelConfig> {
        let c = &self.channel;
        match c.kind {
            ChannelKind::Bernoulli => {
                let p1 = c
                    .p1
                    .ok_or_else(|| Error::config("channel.p1", "required for bernoulli channels"))?;
                let p2 = c
                    .p2
                    .ok_or_else(|| Error::config("channel.p2", "required for bernoulli channels"))?;
                for (name, p) in [("channel.p1", p1), ("channel.p2", p2)] {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::config(name, format!("{p} is not a probability")));
                    }
                }
                Ok(ChannelConfig::Bernoulli {
                    probs: ChannelProbs { p1, p2 },
                })
            }
            ChannelKind::Fading => {
                if c.p1.is_some() || c.p2.is_some() {
                    return Err(Error::config(
                        "channel.p1",
                        "p1/p2 only apply to bernoulli channels",
                    ));
                }
                let bandwidth_hz = positive("channel.bandwidth_hz", c.bandwidth_hz)?;
                let noise_psd_dbm_hz = finite("channel.noise_psd_dbm_hz", c.noise_psd_dbm_hz)?;

                let t = &self.topology;
                let radius = positive("topology.cell_radius_m", t.cell_radius_m)?;
                let min_ue = finite("topology.min_ue_distance_m", t.min_ue_distance_m)?;
                let relay_d =
                    positive("topology.relay_distance_m", t.relay_distance_m.unwrap_or(radius / 2.0))?;
                let user_d = positive("topology.user_distance_m", t.user_distance_m.unwrap_or(radius))?;
                if user_d < min_ue || user_d > radius {
                    return Err(Error::config(
                        "topology.user_distance_m",
                        format!("must lie between {min_ue} m and the cell radius {radius} m"),
                    ));
                }
                if relay_d >= user_d {
                    return Err(Error::config(
                        "topology.relay_distance_m",
                        "relay must sit between the BS and the user",
                    ));
                }

                let hop = |section: &HopSection,
                           name: &str,
                           distance_m: f64,
                           defaults: HopDefaults|
                 -> Result<HopConfig> {
                    let field = |k: &str| format!("{name}.{k}");
                    let tx = finite(&field("tx_power_dbm"), section.tx_power_dbm.unwrap_or(defaults.tx_power_dbm))?;
                    let a = finite(&field("pathloss_a_db"), section.pathloss_a_db.unwrap_or(defaults.pathloss.0))?;
                    let b = finite(&field("pathloss_b"), section.pathloss_b.unwrap_or(defaults.pathloss.1))?;
                    let fading = match section.fading.unwrap_or(defaults.fading) {
                        FadingKind::Rayleigh => {
                            if section.rician_k_db.is_some() {
                                return Err(Error::config(
                                    field("rician_k_db"),
                                    "only applies to rician fading",
                                ));
                            }
                            FadingModel::Rayleigh
                        }
                        FadingKind::Rician => FadingModel::Rician {
                            k_db: finite(
                                &field("rician_k_db"),
                                section.rician_k_db.unwrap_or(DEFAULT_RICIAN_K_DB),
                            )?,
                        },
                    };
                    Ok(HopConfig {
                        budget: LinkBudget {
                            tx_power_dbm: tx,
                            distance_m,
                            pathloss_a_db: a,
                            pathloss_b: b,
                            noise_psd_dbm_hz,
                            bandwidth_hz,
                        },
                        fading,
                    })
                };

                Ok(ChannelConfig::Fading {
                    bs_relay: hop(
                        &self.bs_relay,
                        "bs_relay",
                        relay_d,
                        HopDefaults {
                            tx_power_dbm: DEFAULT_BS_TX_DBM,
                            pathloss: DEFAULT_BS_RELAY_PATHLOSS,
                            fading: FadingKind::Rician,
                        },
                    )?,
                    relay_user: hop(
                        &self.relay_user,
                        "relay_user",
                        user_d - relay_d,
                        HopDefaults {
                            tx_power_dbm: DEFAULT_RELAY_TX_DBM,
                            pathloss: DEFAULT_RELAY_USER_PATHLOSS,
                            fading: FadingKind::Rayleigh,
                        },
                    )?,
                })
            }
        }
    }

    fn resolve_traffic(&self) -> Result<TrafficModel> {
        let t = &self.traffic;
        let packet_size_bits = at_least("traffic.packet_size_bits", t.packet_size_bits, 1)?;
        Ok(match t.model {
            TrafficKind::Poisson => {
                if !(t.rate_pps >= 0.0 && t.rate_pps.is_finite()) {
                    return Err(Error::config(
                        "traffic.rate_pps",
                        format!("must be non-negative packets/s, got {}", t.rate_pps),
                    ));
                }
                TrafficModel::Poisson {
                    rate_pps: t.rate_pps,
                    packet_size_bits,
                }
            }
            TrafficKind::Deterministic => {
                let n = t
                    .n_bits
                    .ok_or_else(|| Error::config("traffic.n_bits", "required for deterministic traffic"))?;
                TrafficModel::DeterministicBits {
                    n_bits: at_least("traffic.n_bits", n, 1)?,
                }
            }
            TrafficKind::Saturated => TrafficModel::Saturated { packet_size_bits },
        })
    }
}

/// Converts a TOML syntax/type error into a config error naming the key and
/// line.
fn toml_error(src: &str, err: &toml::de::Error) -> Error {
    let message = err.message().trim().to_string();
    let Some(span) = err.span() else {
        return Error::Config {
            field: "<document>".into(),
            line: None,
            message,
        };
    };
    let line = src[..span.start.min(src.len())].matches('\n').count() + 1;
    let text = src.lines().nth(line - 1).unwrap_or("");
    let key = text.split('=').next().unwrap_or("").trim();
    let section = section_at(src, line);
    let field = match (section, key.is_empty() || key.starts_with('[')) {
        (_, true) => key.trim_matches(|c| c == '[' || c == ']').to_string(),
        (Some(sec), false) => format!("{sec}.{key}"),
        (None, false) => key.to_string(),
    };
    Error::Config {
        field,
        line: Some(line),
        message,
    }
}

/// Table header in force at 1-based `line`.
fn section_at(src: &str, line: usize) -> Option<String> {
    src.lines()
        .take(line)
        .filter_map(|l| {
            let l = l.trim();
            (l.starts_with('[') && l.ends_with(']')).then(|| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
        })
        .last()
}

/// Finds the line of `section.key` in the source, if present.
fn locate(src: &str, field: &str) -> Option<usize> {
    let (section, key) = field.rsplit_once('.')?;
    let mut current = String::new();
    for (idx, raw) in src.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') && l.ends_with(']') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(idx + 1);
                }
            }
        }
    }
    None
}

fn attach_line(src: &str, err: Error) -> Error {
    match err {
        Error::Config {
            field,
            line: None,
            message,
        } => Error::Config {
            line: locate(src, &field),
            field,
            message,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config_err(src: &str) -> (String, Option<usize>, String) {
        match ExperimentSpec::from_toml_str(src) {
            Err(Error::Config { field, line, message }) => (field, line, message),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_reference_defaults() {
        let spec = ExperimentSpec::from_toml_str("").unwrap();
        let s = &spec.scenario;
        assert_eq!(s.horizon_slots, 10_000);
        assert_eq!(s.slot_duration_s, 1e-3);
        assert_eq!(
            s.traffic,
            TrafficModel::Poisson {
                rate_pps: 50.0,
                packet_size_bits: 1000
            }
        );
        let ChannelConfig::Fading { bs_relay, relay_user } = s.channel else {
            panic!("fading expected");
        };
        assert_eq!(bs_relay.budget.distance_m, 500.0);
        assert_eq!(relay_user.budget.distance_m, 500.0);
        assert_eq!(bs_relay.budget.bandwidth_hz, 180_000.0);
        assert_eq!(bs_relay.budget.noise_psd_dbm_hz, -174.0);
        assert_eq!(bs_relay.fading, FadingModel::Rician { k_db: 6.0 });
        assert_eq!(relay_user.fading, FadingModel::Rayleigh);
        assert_eq!(spec.modes, vec![Relaying::Conventional, Relaying::Buffered]);
        assert_eq!(spec.seeds, vec![1]);
        assert_eq!(s.relay_buffer_cap_bits, None);
        assert_eq!(
            s.scheduler,
            SchedulerPolicy::MaxWeight {
                weight: WeightRule::Differential
            }
        );
    }

    #[test]
    fn zero_horizon_rejected_with_line() {
        let (field, line, _) = config_err("# comment\n[scenario]\nhorizon_slots = 0\n");
        assert_eq!(field, "scenario.horizon_slots");
        assert_eq!(line, Some(3));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let (field, line, message) = config_err("[traffic]\nrate_pps = 10\nburstiness = 2\n");
        assert_eq!(field, "traffic.burstiness");
        assert_eq!(line, Some(3));
        assert!(message.contains("burstiness"), "{message}");

        let (field, line, _) = config_err("[gizmo]\nx = 1\n");
        assert_eq!(field, "gizmo");
        assert_eq!(line, Some(1));
    }

    #[test]
    fn type_and_unit_violations() {
        let (field, line, _) = config_err("[channel]\nbandwidth_hz = \"wide\"\n");
        assert_eq!(field, "channel.bandwidth_hz");
        assert_eq!(line, Some(2));
        let (field, _, _) = config_err("[channel]\nbandwidth_hz = -5.0\n");
        assert_eq!(field, "channel.bandwidth_hz");
        let (field, _, _) = config_err("[channel]\nkind = \"bernoulli\"\np1 = 0.5\n");
        assert_eq!(field, "channel.p2");
        let (field, line, _) = config_err("[channel]\nkind = \"bernoulli\"\np1 = 1.5\np2 = 0.5\n");
        assert_eq!((field.as_str(), line), ("channel.p1", Some(3)));
        let (field, _, _) = config_err("[traffic]\nmodel = \"deterministic\"\n");
        assert_eq!(field, "traffic.n_bits");
        let (field, _, _) = config_err("[topology]\nuser_distance_m = 20\n");
        assert_eq!(field, "topology.user_distance_m");
        let (field, _, _) = config_err("[relay_user]\nrician_k_db = 3\n");
        assert_eq!(field, "relay_user.rician_k_db");
    }

    #[test]
    fn sweep_parsing_and_validation() {
        let spec = ExperimentSpec::from_toml_str(
            "[experiment]\nsweep = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]\nreplications = 5\n",
        )
        .unwrap();
        assert_eq!(spec.sweep.as_ref().unwrap().len(), 10);
        assert_eq!(spec.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(spec.rates().len(), 10);

        let (field, line, _) = config_err("[experiment]\nsweep = [10, 10]\n");
        assert_eq!((field.as_str(), line), ("experiment.sweep", Some(2)));
        let (field, _, _) = config_err("[experiment]\nsweep = [-1.0]\n");
        assert_eq!(field, "experiment.sweep");
        let (field, _, _) =
            config_err("[traffic]\nmodel = \"saturated\"\n[experiment]\nsweep = [1.0]\n");
        assert_eq!(field, "experiment.sweep");
    }

    #[test]
    fn seeds_and_overrides() {
        let spec = ExperimentSpec::from_toml_str("[experiment]\nseeds = [7, 9, 11]\n").unwrap();
        assert_eq!(spec.seeds, vec![7, 9, 11]);
        let (field, _, _) = config_err("[experiment]\nseeds = [7, 9]\nreplications = 3\n");
        assert_eq!(field, "experiment.replications");

        let spec = spec
            .apply(Overrides {
                output_dir: Some("elsewhere".into()),
                seed: Some(100),
                parallel: Some(4),
                modes: Some(parse_mode("buffered").unwrap()),
                sweep: Some(vec![5.0, 15.0]),
            })
            .unwrap();
        assert_eq!(spec.seeds, vec![100, 101, 102]);
        assert_eq!(spec.parallel, 4);
        assert_eq!(spec.modes, vec![Relaying::Buffered]);
        assert_eq!(spec.output_dir, PathBuf::from("elsewhere"));
        assert!(parse_mode("sometimes").is_err());
    }

    #[test]
    fn bernoulli_and_custom_hops() {
        let spec = ExperimentSpec::from_toml_str(
            "[channel]\nkind = \"bernoulli\"\np1 = 0.8\np2 = 0.9\n\
             [traffic]\nmodel = \"saturated\"\npacket_size_bits = 1\n\
             [scenario]\nrelay_buffer_cap_bits = 64\n",
        )
        .unwrap();
        assert_eq!(
            spec.scenario.channel,
            ChannelConfig::Bernoulli {
                probs: ChannelProbs { p1: 0.8, p2: 0.9 }
            }
        );
        assert_eq!(spec.scenario.relay_buffer_cap_bits, Some(64.0));

        let spec = ExperimentSpec::from_toml_str(
            "[relay_user]\ntx_power_dbm = 30\nfading = \"rician\"\n[topology]\nuser_distance_m = 800\n",
        )
        .unwrap();
        let ChannelConfig::Fading { relay_user, .. } = spec.scenario.channel else {
            panic!()
        };
        assert_eq!(relay_user.budget.tx_power_dbm, 30.0);
        assert_eq!(relay_user.budget.distance_m, 300.0);
        assert_eq!(relay_user.fading, FadingModel::Rician { k_db: 6.0 });
    }
}
