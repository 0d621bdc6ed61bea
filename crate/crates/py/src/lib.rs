use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bufrelay::analytic::{self, ChannelProbs, InactiveSlotSet};
use bufrelay::channel::{self, LinkBudget};
use bufrelay::config::{parse_config, parse_mode, ExperimentSpec, MetricsOptions, Overrides};
use bufrelay::engine::{self, LinkChoice};
use bufrelay::experiment;
use bufrelay::metrics;
use bufrelay::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Numeric(_) | Error::Encode(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn probs(p1: f64, p2: f64) -> PyResult<ChannelProbs> {
    ChannelProbs::new(p1, p2).map_err(py_err)
}

fn inactive(slots: Vec<u64>) -> PyResult<InactiveSlotSet> {
    InactiveSlotSet::new(slots).map_err(py_err)
}

/// Returns (P(GG), P(GB), P(BG), P(BB)).
#[pyfunction]
fn joint_state_probs(p1: f64, p2: f64) -> PyResult<(f64, f64, f64, f64)> {
    let d = analytic::joint_state_probs(probs(p1, p2)?).map_err(py_err)?;
    Ok((d.gg, d.gb, d.bg, d.bb))
}

#[pyfunction]
fn interruption_prob_conventional(p1: f64, p2: f64) -> PyResult<f64> {
    analytic::interruption_prob_conventional(probs(p1, p2)?).map_err(py_err)
}

#[pyfunction]
fn deterministic_delivery_slot(i: u64, inactive_slots: Vec<u64>) -> PyResult<u64> {
    analytic::deterministic_delivery_slot(i, &inactive(inactive_slots)?).map_err(py_err)
}

#[pyfunction]
fn fifo_delivery_slot(i: u64, inactive_slots: Vec<u64>) -> PyResult<u64> {
    analytic::fifo_delivery_slot(i, &inactive(inactive_slots)?).map_err(py_err)
}

/// Returns (stationary relay distribution, delivery probability).
#[pyfunction]
#[pyo3(signature = (p1, p2, buffer_cap = analytic::DEFAULT_CHAIN_CAP))]
fn solve_buffered_bernoulli_chain(p1: f64, p2: f64, buffer_cap: usize) -> PyResult<(Vec<f64>, f64)> {
    let sol = analytic::solve_buffered_bernoulli_chain(probs(p1, p2)?, buffer_cap).map_err(py_err)?;
    Ok((sol.stationary, sol.delivery_probability))
}

#[pyfunction]
fn pathloss_db(pathloss_a_db: f64, pathloss_b: f64, distance_m: f64) -> PyResult<f64> {
    let budget = LinkBudget {
        tx_power_dbm: 0.0,
        distance_m,
        pathloss_a_db,
        pathloss_b,
        noise_psd_dbm_hz: 0.0,
        bandwidth_hz: 1.0,
    };
    channel::pathloss_db(&budget).map_err(py_err)
}

#[pyfunction]
fn noise_power_dbm(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> PyResult<f64> {
    channel::noise_power_dbm(noise_psd_dbm_hz, bandwidth_hz).map_err(py_err)
}

/// Returns "bs_to_relay", "relay_to_user" or "idle".
#[pyfunction]
fn mw_schedule(q_bs: f64, q_relay: f64, r_br: f64, r_ru: f64) -> &'static str {
    match engine::mw_schedule(q_bs, q_relay, r_br, r_ru) {
        LinkChoice::BsToRelay => "bs_to_relay",
        LinkChoice::RelayToUser => "relay_to_user",
        LinkChoice::Idle => "idle",
    }
}

#[pyfunction]
#[pyo3(signature = (samples, slot_duration_s = 1e-3))]
fn delay_cdf(samples: Vec<u64>, slot_duration_s: f64) -> PyResult<Vec<(f64, f64)>> {
    metrics::delay_cdf(&samples, slot_duration_s).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (samples, slot_duration_s = 1e-3))]
fn mean_delay(samples: Vec<u64>, slot_duration_s: f64) -> PyResult<f64> {
    metrics::mean_delay(&samples, slot_duration_s).map_err(py_err)
}

/// A resolved scenario, built from the same TOML format as the CLI.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    spec: ExperimentSpec,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(Self {
            spec: ExperimentSpec::from_toml_str(toml).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            spec: parse_config(&path).map_err(py_err)?,
        })
    }

    /// Copy with relaying set to "conventional" or "buffered".
    fn with_mode(&self, mode: &str) -> PyResult<Self> {
        let modes = parse_mode(mode).map_err(py_err)?;
        if modes.len() != 1 {
            return Err(PyValueError::new_err("pick a single relaying mode"));
        }
        let mut out = self.clone();
        out.spec.scenario.relaying = modes[0];
        out.spec.modes = modes;
        Ok(out)
    }

    fn with_rate(&self, rate_pps: f64) -> PyResult<Self> {
        let mut out = self.clone();
        out.spec.scenario.traffic = self
            .spec
            .scenario
            .traffic
            .with_rate(rate_pps)
            .ok_or_else(|| PyValueError::new_err("scenario traffic is not Poisson"))?;
        out.spec.scenario.validate().map_err(py_err)?;
        Ok(out)
    }

    fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.spec.scenario.seed = seed;
        out
    }

    fn with_horizon(&self, horizon_slots: u64) -> PyResult<Self> {
        let mut out = self.clone();
        out.spec.scenario.horizon_slots = horizon_slots;
        out.spec.scenario.validate().map_err(py_err)?;
        Ok(out)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.spec.scenario.relaying.as_str()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.spec.scenario.seed
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec.scenario).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Runs one replication of the scenario.
    fn run(&self) -> PyResult<PyMetrics> {
        let record = engine::run(&self.spec.scenario).map_err(py_err)?;
        Ok(PyMetrics {
            record,
            options: self.spec.metrics,
        })
    }

    /// Runs the full experiment (modes x rates x seeds) and writes its files.
    /// Returns the summary as JSON.
    #[pyo3(signature = (output_dir = None))]
    fn run_experiment(&self, output_dir: Option<PathBuf>) -> PyResult<String> {
        let spec = self
            .spec
            .clone()
            .apply(Overrides {
                output_dir,
                ..Overrides::default()
            })
            .map_err(py_err)?;
        let summary = experiment::run_experiment(&spec).map_err(py_err)?;
        serde_json::to_string(&summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pyclass(name = "Metrics")]
struct PyMetrics {
    record: metrics::MetricsRecord,
    options: MetricsOptions,
}

#[pymethods]
impl PyMetrics {
    #[getter]
    fn q_bs_bits(&self) -> Vec<f64> {
        self.record.q_bs_bits.clone()
    }

    #[getter]
    fn q_relay_bits(&self) -> Vec<f64> {
        self.record.q_relay_bits.clone()
    }

    #[getter]
    fn delivered_bits_cum(&self) -> Vec<f64> {
        self.record.delivered_bits_cum.clone()
    }

    #[getter]
    fn delivered_packets(&self) -> u64 {
        self.record.delivered_packets
    }

    #[getter]
    fn arrived_packets(&self) -> u64 {
        self.record.arrived_packets
    }

    #[getter]
    fn censored_packets(&self) -> u64 {
        self.record.censored_packets
    }

    #[getter]
    fn delivery_fraction(&self) -> f64 {
        self.record.delivery_fraction()
    }

    #[getter]
    fn max_conservation_error_bits(&self) -> f64 {
        self.record.max_conservation_error_bits
    }

    /// Per-packet delays in slots.
    fn delay_samples(&self) -> Vec<u64> {
        self.record.delay_samples(self.options.warmup_slots)
    }

    fn mean_delay_ms(&self) -> PyResult<f64> {
        metrics::mean_delay(&self.delay_samples(), self.record.slot_duration_s).map_err(py_err)
    }

    fn delay_cdf(&self) -> PyResult<Vec<(f64, f64)>> {
        metrics::delay_cdf(&self.delay_samples(), self.record.slot_duration_s).map_err(py_err)
    }

    /// Summary statistics (mean delay, throughput, stability) as JSON.
    fn summary_json(&self) -> PyResult<String> {
        let s = experiment::summarize(&self.record, &self.options).map_err(py_err)?;
        serde_json::to_string(&s).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pymodule]
#[pyo3(name = "bufrelay")]
fn bufrelay_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(joint_state_probs, m)?)?;
    m.add_function(wrap_pyfunction!(interruption_prob_conventional, m)?)?;
    m.add_function(wrap_pyfunction!(deterministic_delivery_slot, m)?)?;
    m.add_function(wrap_pyfunction!(fifo_delivery_slot, m)?)?;
    m.add_function(wrap_pyfunction!(solve_buffered_bernoulli_chain, m)?)?;
    m.add_function(wrap_pyfunction!(pathloss_db, m)?)?;
    m.add_function(wrap_pyfunction!(noise_power_dbm, m)?)?;
    m.add_function(wrap_pyfunction!(mw_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(delay_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(mean_delay, m)?)?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyMetrics>()?;
    Ok(())
}
