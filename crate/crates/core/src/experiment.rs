//! Batch runs over (rate x mode x seed) and the files they produce.
//!
//! Output layout inside the experiment directory:
//!
//! - `trace_<mode>_<rate>_<seed>.csv`: `slot,q_bs_bits,q_relay_bits,delivered_bits_cum`
//! - `cdf_<mode>_<rate>.csv`: `delay_ms,cum_prob`, pooled over seeds
//! - `summary.json`: per-cell and per-group statistics plus the resolved spec
//!
//! CSV files open with `#` comment lines carrying the seed(s) and the JSON
//! scenario echo. `<rate>` is the Poisson rate in packets/s, or `na`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentSpec, MetricsOptions};
use crate::engine::{run, Relaying, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::{
    delay_cdf, mean_delay, stability_classify, throughput, MetricsRecord, StabilityReport,
    MIN_STABILITY_HORIZON,
};
use crate::traffic::TrafficModel;

/// One (rate, mode, seed) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mode: Relaying,
    pub rate_pps: Option<f64>,
    pub seed: u64,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{} rate={} seed={}", self.mode.as_str(), rate_label(self.rate_pps), self.seed)
    }

    pub fn scenario(&self, base: &ScenarioConfig) -> ScenarioConfig {
        let mut s = *base;
        s.relaying = self.mode;
        s.seed = self.seed;
        if let Some(rate) = self.rate_pps {
            if let Some(t) = base.traffic.with_rate(rate) {
                s.traffic = t;
            }
        }
        s
    }
}

pub fn rate_label(rate: Option<f64>) -> String {
    rate.map_or_else(|| "na".to_string(), |r| format!("{r}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: Relaying,
    pub rate_pps: Option<f64>,
    pub seed: u64,
    pub arrived_packets: u64,
    pub delivered_packets: u64,
    pub censored_packets: u64,
    /// Delivered-only mean; `None` when delays are suppressed or nothing was delivered.
    pub mean_delay_ms: Option<f64>,
    /// Packets/s that arrived after warm-up.
    pub offered_pps: f64,
    pub throughput_pps: f64,
    pub throughput_bits_per_slot: f64,
    pub delivery_fraction: f64,
    pub bs_stability: Option<StabilityReport>,
    pub relay_stability: Option<StabilityReport>,
    pub max_conservation_error_bits: f64,
}

/// Derives the summary statistics of one replication.
pub fn summarize(record: &MetricsRecord, opts: &MetricsOptions) -> Result<CellSummary> {
    let horizon = record.horizon();
    let warmup = opts.warmup_slots.min(horizon.saturating_sub(1));
    let window = (warmup + 1)..=horizon;
    let tp = throughput(record, window)?;
    let samples = record.delay_samples(warmup);
    let mean_delay_ms = if record.delays_suppressed || samples.is_empty() {
        None
    } else {
        Some(mean_delay(&samples, record.slot_duration_s)?)
    };
    let offered: u64 = record.arrivals_per_slot[warmup as usize..]
        .iter()
        .map(|&n| u64::from(n))
        .sum();
    let window_s = (horizon - warmup) as f64 * record.slot_duration_s;

    let threshold = opts.drift_threshold_fraction * packet_size_bits(&record.config.traffic) as f64;
    let classify = |trace: &[f64]| -> Result<Option<StabilityReport>> {
        if trace.len() < MIN_STABILITY_HORIZON {
            Ok(None)
        } else {
            stability_classify(trace, threshold).map(Some)
        }
    };
    let relay_stability = match record.config.relaying {
        Relaying::Buffered => classify(&record.q_relay_bits)?,
        Relaying::Conventional => None,
    };

    Ok(CellSummary {
        mode: record.config.relaying,
        rate_pps: record.config.traffic.rate_pps(),
        seed: record.seed,
        arrived_packets: record.arrived_packets,
        delivered_packets: record.delivered_packets,
        censored_packets: record.censored_packets,
        mean_delay_ms,
        offered_pps: offered as f64 / window_s,
        throughput_pps: tp.packets_per_s,
        throughput_bits_per_slot: tp.bits_per_slot,
        delivery_fraction: record.delivery_fraction(),
        bs_stability: classify(&record.q_bs_bits)?,
        relay_stability,
        max_conservation_error_bits: record.max_conservation_error_bits,
    })
}

fn packet_size_bits(traffic: &TrafficModel) -> u64 {
    match *traffic {
        TrafficModel::DeterministicBits { .. } => 1,
        TrafficModel::Poisson { packet_size_bits, .. }
        | TrafficModel::Saturated { packet_size_bits } => packet_size_bits,
    }
}

/// Replications of one (mode, rate) pooled together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mode: Relaying,
    pub rate_pps: Option<f64>,
    pub replications: usize,
    /// Mean over all delivered packets of all replications.
    pub pooled_mean_delay_ms: Option<f64>,
    pub mean_offered_pps: f64,
    pub mean_throughput_pps: f64,
    /// Replications whose BS queue was classified unstable.
    pub bs_unstable: usize,
    pub relay_unstable: usize,
    pub cdf_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seeds: Vec<u64>,
    pub spec: ExperimentSpec,
    pub cells: Vec<CellSummary>,
    pub groups: Vec<GroupSummary>,
}

/// All cells of a spec, rate-major, then mode, then seed.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for rate in spec.rates() {
        for &mode in &spec.modes {
            for &seed in &spec.seeds {
                out.push(Cell {
                    mode,
                    rate_pps: rate,
                    seed,
                });
            }
        }
    }
    out
}

/// Runs every cell without touching the filesystem.
pub fn run_cells(spec: &ExperimentSpec) -> Result<Vec<(Cell, MetricsRecord)>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallel)
        .build()
        .map_err(|e| Error::config("parallel", e.to_string()))?;
    pool.install(|| {
        cells(spec)
            .into_par_iter()
            .map(|cell| {
                run(&cell.scenario(&spec.scenario))
                    .map(|r| (cell, r))
                    .map_err(|e| Error::Scenario {
                        scenario: cell.label(),
                        source: Box::new(e),
                    })
            })
            .collect()
    })
}

/// Runs the experiment and writes its files under `spec.output_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io_path("creating", dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallel)
        .build()
        .map_err(|e| Error::config("parallel", e.to_string()))?;

    // Each task writes only its own trace file and hands back the summary
    // plus the delay samples needed for the pooled CDF.
    let results: Vec<(Cell, CellSummary, Vec<u64>)> = pool.install(|| {
        cells(spec)
            .into_par_iter()
            .map(|cell| {
                let wrap = |e: Error| Error::Scenario {
                    scenario: cell.label(),
                    source: Box::new(e),
                };
                let record = run(&cell.scenario(&spec.scenario)).map_err(wrap)?;
                write_trace(dir, &cell, &record).map_err(wrap)?;
                let summary = summarize(&record, &spec.metrics).map_err(wrap)?;
                let samples = if record.delays_suppressed {
                    Vec::new()
                } else {
                    record.delay_samples(spec.metrics.warmup_slots)
                };
                Ok((cell, summary, samples))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut groups = Vec::new();
    for rate in spec.rates() {
        for &mode in &spec.modes {
            let members: Vec<&(Cell, CellSummary, Vec<u64>)> = results
                .iter()
                .filter(|(c, _, _)| c.mode == mode && c.rate_pps == rate)
                .collect();
            let pooled: Vec<u64> = members.iter().flat_map(|(_, _, s)| s.iter().copied()).collect();
            let n = members.len();
            let cdf_file = if pooled.is_empty() {
                None
            } else {
                let name = format!("cdf_{}_{}.csv", mode.as_str(), rate_label(rate));
                let cdf = delay_cdf(&pooled, spec.scenario.slot_duration_s)?;
                let scenario = Cell { mode, rate_pps: rate, seed: spec.seeds[0] }.scenario(&spec.scenario);
                write_cdf(&dir.join(&name), &spec.seeds, &scenario, &cdf)?;
                Some(name)
            };
            groups.push(GroupSummary {
                mode,
                rate_pps: rate,
                replications: n,
                pooled_mean_delay_ms: if pooled.is_empty() {
                    None
                } else {
                    Some(mean_delay(&pooled, spec.scenario.slot_duration_s)?)
                },
                mean_offered_pps: members.iter().map(|(_, s, _)| s.offered_pps).sum::<f64>() / n as f64,
                mean_throughput_pps: members.iter().map(|(_, s, _)| s.throughput_pps).sum::<f64>()
                    / n as f64,
                bs_unstable: count_unstable(members.iter().map(|(_, s, _)| s.bs_stability)),
                relay_unstable: count_unstable(members.iter().map(|(_, s, _)| s.relay_stability)),
                cdf_file,
            });
        }
    }

    let summary = ExperimentSummary {
        seeds: spec.seeds.clone(),
        spec: spec.clone(),
        cells: results.into_iter().map(|(_, s, _)| s).collect(),
        groups,
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Encode(e.to_string()))?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io_path("writing", &path, e))?;
    Ok(summary)
}

fn count_unstable(reports: impl Iterator<Item = Option<StabilityReport>>) -> usize {
    reports
        .filter(|r| matches!(r, Some(r) if r.verdict == crate::metrics::Stability::Unstable))
        .count()
}

pub fn trace_file_name(cell: &Cell) -> String {
    format!("trace_{}_{}_{}.csv", cell.mode.as_str(), rate_label(cell.rate_pps), cell.seed)
}

fn header_lines(out: &mut impl Write, seeds: &str, scenario: &ScenarioConfig) -> std::io::Result<()> {
    let echo = serde_json::to_string(scenario).map_err(std::io::Error::other)?;
    writeln!(out, "# seed: {seeds}")?;
    writeln!(out, "# config: {echo}")
}

fn write_trace(dir: &Path, cell: &Cell, record: &MetricsRecord) -> Result<()> {
    let path = dir.join(trace_file_name(cell));
    let io = |e: std::io::Error| Error::io_path("writing", &path, e);
    let file = File::create(&path).map_err(io)?;
    let mut out = BufWriter::new(file);
    header_lines(&mut out, &record.seed.to_string(), &record.config).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Encode(format!("{}: {e}", path.display()));
    w.write_record(["slot", "q_bs_bits", "q_relay_bits", "delivered_bits_cum"])
        .map_err(csv_err)?;
    for (i, ((bs, relay), cum)) in record
        .q_bs_bits
        .iter()
        .zip(&record.q_relay_bits)
        .zip(&record.delivered_bits_cum)
        .enumerate()
    {
        w.write_record(&[
            (i + 1).to_string(),
            bs.to_string(),
            relay.to_string(),
            cum.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

fn write_cdf(path: &PathBuf, seeds: &[u64], scenario: &ScenarioConfig, cdf: &[(f64, f64)]) -> Result<()> {
    let io = |e: std::io::Error| Error::io_path("writing", path, e);
    let file = File::create(path).map_err(io)?;
    let mut out = BufWriter::new(file);
    let seeds = serde_json::to_string(seeds).map_err(|e| Error::Encode(e.to_string()))?;
    header_lines(&mut out, &seeds, scenario).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Encode(format!("{}: {e}", path.display()));
    w.write_record(["delay_ms", "cum_prob"]).map_err(csv_err)?;
    for (d, p) in cdf {
        w.write_record(&[d.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}
