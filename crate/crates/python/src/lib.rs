//! Python bindings: topologies, networks, likelihoods, checkpoints and the
//! experiment harness.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spikenet::checkpoint::Checkpoint as CoreCheckpoint;
use spikenet::harness::{cmd_eval, cmd_train, EvalSettings, ExperimentConfig, SplitChoice};
use spikenet::{glm, Error, HyperParams, Parameters, SpikeRecord, SpikingMode, Topology as CoreTopology};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn record_from(rows: Vec<Vec<u8>>) -> PyResult<SpikeRecord> {
    let rows: Vec<Vec<bool>> = rows.into_iter().map(|r| r.into_iter().map(|b| b != 0).collect()).collect();
    SpikeRecord::from_rows(&rows).map_err(py_err)
}

fn record_rows(r: &SpikeRecord) -> Vec<Vec<bool>> {
    (0..r.rows()).map(|i| r.row(i).to_vec()).collect()
}

/// Graph of neurons and exogenous inputs with a visible/hidden partition.
#[pyclass(name = "Topology", module = "pyspikenet", skip_from_py_object)]
#[derive(Clone)]
struct Topology(CoreTopology);

#[pymethods]
impl Topology {
    #[staticmethod]
    fn layered(visible: usize, hidden_layers: Vec<usize>, exogenous: usize) -> Self {
        Self(CoreTopology::layered(visible, &hidden_layers, exogenous))
    }

    #[staticmethod]
    #[pyo3(signature = (visible, hidden, exogenous, readout_feedback = true))]
    fn fully_connected(visible: usize, hidden: usize, exogenous: usize, readout_feedback: bool) -> Self {
        if readout_feedback {
            Self(CoreTopology::fully_connected(visible, hidden, exogenous))
        } else {
            Self(CoreTopology::fully_connected_readout(visible, hidden, exogenous))
        }
    }

    #[getter]
    fn neuron_count(&self) -> usize {
        self.0.neuron_count()
    }

    #[getter]
    fn exogenous_count(&self) -> usize {
        self.0.exogenous_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.0.edge_count()
    }

    #[getter]
    fn visible(&self) -> Vec<usize> {
        self.0.visible().to_vec()
    }

    #[getter]
    fn hidden(&self) -> Vec<usize> {
        self.0.hidden().to_vec()
    }

    /// Source labels of neuron `i`'s parents, e.g. `["x0", "n3"]`.
    fn parents(&self, neuron: usize) -> PyResult<Vec<String>> {
        if neuron >= self.0.neuron_count() {
            return Err(py_err(Error::UnknownNeuron(neuron)));
        }
        Ok(self.0.parents(neuron).iter().map(|&j| self.0.source(j).to_string()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(neurons={}, visible={}, hidden={}, exogenous={}, edges={})",
            self.0.neuron_count(),
            self.0.visible().len(),
            self.0.hidden().len(),
            self.0.exogenous_count(),
            self.0.edge_count()
        )
    }
}

/// Parameters, topology and time constants of one network.
#[pyclass(name = "Network", module = "pyspikenet", skip_from_py_object)]
#[derive(Clone)]
struct Network {
    topology: CoreTopology,
    hyper: HyperParams,
    params: Parameters,
}

#[pymethods]
impl Network {
    /// Weights drawn uniformly from `seed`; biases start at zero.
    #[new]
    #[pyo3(signature = (topology, seed = 0, tau_mem = 20.0, tau_syn = 5.0, tau_ref = 10.0, threshold = 1.0, bandwidth = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        topology: PyRef<'_, Topology>,
        seed: u64,
        tau_mem: f64,
        tau_syn: f64,
        tau_ref: f64,
        threshold: f64,
        bandwidth: f64,
    ) -> PyResult<Self> {
        let hyper = HyperParams {
            tau_mem,
            tau_syn,
            tau_ref,
            threshold,
            bandwidth,
        };
        hyper.validate().map_err(py_err)?;
        Ok(Self {
            params: Parameters::init_uniform(&topology.0, seed),
            topology: topology.0.clone(),
            hyper,
        })
    }

    #[getter]
    fn topology(&self) -> Topology {
        Topology(self.topology.clone())
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.params.weights.clone()
    }

    #[setter]
    fn set_weights(&mut self, w: Vec<f64>) -> PyResult<()> {
        let p = Parameters {
            weights: w,
            biases: self.params.biases.clone(),
        };
        p.check(&self.topology).map_err(py_err)?;
        self.params = p;
        Ok(())
    }

    #[getter]
    fn biases(&self) -> Vec<f64> {
        self.params.biases.clone()
    }

    #[setter]
    fn set_biases(&mut self, b: Vec<f64>) -> PyResult<()> {
        let p = Parameters {
            weights: self.params.weights.clone(),
            biases: b,
        };
        p.check(&self.topology).map_err(py_err)?;
        self.params = p;
        Ok(())
    }

    /// Runs over the horizon of `exogenous` (one 0/1 row per input channel).
    /// Returns `(spikes, potentials)`: one row per neuron, one potential
    /// vector per step.
    #[pyo3(signature = (exogenous, stochastic = false, seed = 0, clamp = None))]
    fn run(
        &self,
        exogenous: Vec<Vec<u8>>,
        stochastic: bool,
        seed: u64,
        clamp: Option<Vec<Vec<u8>>>,
    ) -> PyResult<(Vec<Vec<bool>>, Vec<Vec<f64>>)> {
        let input = record_from(exogenous)?;
        let clamp = clamp.map(record_from).transpose()?;
        let mode = if stochastic {
            SpikingMode::Stochastic
        } else {
            SpikingMode::Deterministic
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let traj = spikenet::run_trajectory(
            &self.params,
            &self.topology,
            &self.hyper,
            &input,
            mode,
            clamp.as_ref(),
            &mut rng,
        )
        .map_err(py_err)?;
        Ok((record_rows(&traj.spikes), traj.potentials))
    }

    /// Exact `-log p(x)` over all hidden trajectories (tiny networks only).
    fn marginal_nll(&self, visible: Vec<Vec<u8>>, exogenous: Vec<Vec<u8>>) -> PyResult<f64> {
        glm::marginal_nll_exact(&record_from(visible)?, &record_from(exogenous)?, &self.params, &self.topology, &self.hyper)
            .map_err(py_err)
    }

    /// Exact expectation of the sampled upper bound (tiny networks only).
    fn expected_bound(&self, visible: Vec<Vec<u8>>, exogenous: Vec<Vec<u8>>) -> PyResult<f64> {
        glm::expected_bound_exact(&record_from(visible)?, &record_from(exogenous)?, &self.params, &self.topology, &self.hyper)
            .map_err(py_err)
    }

    fn to_checkpoint(&self) -> PyResult<Checkpoint> {
        CoreCheckpoint::new(self.topology.clone(), self.hyper, self.params.clone())
            .map(Checkpoint)
            .map_err(py_err)
    }
}

/// Flat `key = value` checkpoint.
#[pyclass(name = "Checkpoint", module = "pyspikenet", skip_from_py_object)]
#[derive(Clone)]
struct Checkpoint(CoreCheckpoint);

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        CoreCheckpoint::load(path).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        CoreCheckpoint::from_text(text).map(Self).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn meta<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in &self.0.meta {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn network(&self) -> Network {
        Network {
            topology: self.0.topology.clone(),
            hyper: self.0.hyper,
            params: self.0.params.clone(),
        }
    }

    fn __eq__(&self, other: PyRef<'_, Checkpoint>) -> bool {
        self.0 == other.0
    }
}

#[pyfunction]
fn spike_probability(u: f64, bandwidth: f64) -> PyResult<f64> {
    glm::spike_probability(u, bandwidth).map_err(py_err)
}

#[pyfunction]
fn nll_local(spike: bool, u: f64, bandwidth: f64) -> f64 {
    glm::nll_local(spike, u, bandwidth)
}

fn load_config(config: &str, overrides: Vec<String>) -> PyResult<ExperimentConfig> {
    if std::path::Path::new(config).is_file() {
        ExperimentConfig::load(config, &overrides)
    } else {
        ExperimentConfig::from_toml_with(config, &overrides)
    }
    .map_err(py_err)
}

/// Trains from an experiment configuration (a TOML path or TOML text) and
/// returns `(records, checkpoint)`, each record a dict.
#[pyfunction]
#[pyo3(signature = (config, overrides = Vec::new()))]
fn train<'py>(py: Python<'py>, config: &str, overrides: Vec<String>) -> PyResult<(Vec<Bound<'py, PyDict>>, Checkpoint)> {
    let cfg = load_config(config, overrides)?;
    let out = py.detach(|| cmd_train(&cfg)).map_err(py_err)?;
    let mut records = Vec::with_capacity(out.records.len());
    for r in &out.records {
        let d = PyDict::new(py);
        d.set_item("examples_seen", r.examples_seen)?;
        d.set_item("batch_size", r.batch_size)?;
        d.set_item("train_accuracy", r.train_accuracy)?;
        d.set_item("test_accuracy", r.test_accuracy)?;
        d.set_item("mean_loss_or_bound", r.mean_loss_or_bound)?;
        d.set_item("wall_time", r.wall_time)?;
        records.push(d);
    }
    Ok((records, Checkpoint(out.checkpoint)))
}

/// Accuracy of `checkpoint` on the configured dataset's test (or train) split.
#[pyfunction]
#[pyo3(signature = (checkpoint, config, overrides = Vec::new(), split = "test"))]
fn evaluate(checkpoint: PyRef<'_, Checkpoint>, config: &str, overrides: Vec<String>, split: &str) -> PyResult<f64> {
    let cfg = load_config(config, overrides)?;
    let split = match split {
        "train" => SplitChoice::Train,
        "test" => SplitChoice::Test,
        other => return Err(PyValueError::new_err(format!("unknown split `{other}`"))),
    };
    let ds = cfg.dataset.load().map_err(py_err)?;
    let settings: EvalSettings = cfg.eval;
    cmd_eval(&checkpoint.0, &ds, split, &settings)
        .map(|e| e.accuracy)
        .map_err(py_err)
}

#[pymodule]
fn pyspikenet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<Network>()?;
    m.add_class::<Checkpoint>()?;
    m.add_function(wrap_pyfunction!(spike_probability, m)?)?;
    m.add_function(wrap_pyfunction!(nll_local, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
