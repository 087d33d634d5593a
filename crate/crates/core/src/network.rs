//! Discrete-time spike response dynamics.
//!
//! Every source `j` (neuron or exogenous channel) drives a second-order
//! autoregressive filter
//!
//! ```text
//! p[t] = exp(-1/tau_mem) * p[t-1] + q[t-1]
//! q[t] = exp(-1/tau_syn) * q[t-1] + s[t-1]
//! ```
//!
//! and every neuron drives a first-order refractory filter
//! `r[t] = exp(-1/tau_ref) * r[t-1] + s[t-1]`. The membrane potential is
//! `u[t] = sum_j w_ij p_j[t] - r_i[t] + bias_i`. A spike at step `t` first
//! reaches `p` at step `t + 2`.
//!
//! Every synapse leaving `j` carries the same spikes, so traces are stored
//! once per source and shared by all its outgoing edges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm;
use crate::params::{HyperParams, Parameters};
use crate::record::SpikeRecord;
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    /// Synaptic trace `p` per source.
    pub syn_p: Vec<f64>,
    /// Auxiliary synaptic trace `q` per source.
    pub syn_q: Vec<f64>,
    /// Refractory trace `r` per neuron; enters the potential negatively.
    pub ref_r: Vec<f64>,
    /// Membrane potential per neuron at the current step.
    pub potential: Vec<f64>,
    /// Spikes of every source at the previous step.
    pub last_spikes: Vec<bool>,
}

impl NetworkState {
    pub fn new(topology: &Topology) -> Self {
        let sources = topology.source_count();
        let neurons = topology.neuron_count();
        Self {
            syn_p: vec![0.0; sources],
            syn_q: vec![0.0; sources],
            ref_r: vec![0.0; neurons],
            potential: vec![0.0; neurons],
            last_spikes: vec![false; sources],
        }
    }

    fn neuron_count(&self) -> usize {
        self.ref_r.len()
    }
}

/// Advances all traces by one step given the spikes of step `t - 1`.
///
/// `p` reads the previous value of `q` before `q` itself is updated.
pub fn step_traces(state: &mut NetworkState, prev_spikes: &[bool], hyper: &HyperParams) -> Result<()> {
    if prev_spikes.len() != state.syn_p.len() {
        return Err(Error::DimensionMismatch {
            what: "previous spike vector",
            expected: state.syn_p.len(),
            got: prev_spikes.len(),
        });
    }
    let (a, b, c) = (hyper.syn_decay(), hyper.mem_decay(), hyper.ref_decay());
    for ((p, q), &s) in state.syn_p.iter_mut().zip(state.syn_q.iter_mut()).zip(prev_spikes) {
        *p = b * *p + *q;
        *q = a * *q + f64::from(u8::from(s));
    }
    for (r, &s) in state.ref_r.iter_mut().zip(prev_spikes) {
        *r = c * *r + f64::from(u8::from(s));
    }
    Ok(())
}

/// `u_i = sum_j w_ij p_j - r_i + bias_i` from the traces currently in `state`.
pub fn membrane_potential(
    state: &NetworkState,
    params: &Parameters,
    topology: &Topology,
    neuron: usize,
) -> Result<f64> {
    if neuron >= topology.neuron_count() || neuron >= state.neuron_count() {
        return Err(Error::UnknownNeuron(neuron));
    }
    Ok(potential_unchecked(state, params, topology, neuron))
}

#[inline]
fn potential_unchecked(state: &NetworkState, params: &Parameters, topology: &Topology, neuron: usize) -> f64 {
    let weights = &params.weights[topology.edge_range(neuron)];
    let drive: f64 = weights
        .iter()
        .zip(topology.parents(neuron))
        .map(|(w, &j)| w * state.syn_p[j])
        .sum();
    drive - state.ref_r[neuron] + params.biases[neuron]
}

/// Heaviside threshold with `Θ(0) = 1`.
#[inline]
pub fn srm_spike(u: f64, threshold: f64) -> bool {
    u - threshold >= 0.0
}

/// How neurons turn their potential into spikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikingMode {
    /// Threshold crossing.
    #[default]
    Deterministic,
    /// Bernoulli draw with probability `sigmoid(bandwidth * u)`.
    Stochastic,
}

/// A network instance stepping through time.
///
/// Stepping is split in two halves so callers can inspect potentials before
/// the spikes of a step are fixed: [`Simulator::advance`] updates traces and
/// potentials, [`Simulator::emit`] records the spikes that the next step
/// will see.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub params: &'a Parameters,
    pub topology: &'a Topology,
    pub hyper: &'a HyperParams,
    pub state: NetworkState,
}

impl<'a> Simulator<'a> {
    pub fn new(params: &'a Parameters, topology: &'a Topology, hyper: &'a HyperParams) -> Result<Self> {
        params.check(topology)?;
        hyper.validate()?;
        Ok(Self {
            params,
            topology,
            hyper,
            state: NetworkState::new(topology),
        })
    }

    /// Starts from an arbitrary state instead of the all-zero one.
    pub fn with_state(mut self, state: NetworkState) -> Result<Self> {
        if state.syn_p.len() != self.topology.source_count()
            || state.syn_q.len() != self.topology.source_count()
            || state.last_spikes.len() != self.topology.source_count()
            || state.ref_r.len() != self.topology.neuron_count()
            || state.potential.len() != self.topology.neuron_count()
        {
            return Err(Error::DimensionMismatch {
                what: "network state",
                expected: self.topology.source_count(),
                got: state.syn_p.len(),
            });
        }
        self.state = state;
        Ok(self)
    }

    /// Moves to the next step and computes every membrane potential.
    pub fn advance(&mut self) -> &[f64] {
        let prev = std::mem::take(&mut self.state.last_spikes);
        step_traces(&mut self.state, &prev, self.hyper).expect("state sized from topology");
        self.state.last_spikes = prev;
        for i in 0..self.topology.neuron_count() {
            self.state.potential[i] = potential_unchecked(&self.state, self.params, self.topology, i);
        }
        &self.state.potential
    }

    /// Records the neuron spikes and exogenous inputs of the current step.
    pub fn emit(&mut self, spikes: &[bool], exogenous: &[bool]) -> Result<()> {
        let n = self.topology.neuron_count();
        if spikes.len() != n {
            return Err(Error::DimensionMismatch {
                what: "neuron spike vector",
                expected: n,
                got: spikes.len(),
            });
        }
        if exogenous.len() != self.topology.exogenous_count() {
            return Err(Error::DimensionMismatch {
                what: "exogenous input vector",
                expected: self.topology.exogenous_count(),
                got: exogenous.len(),
            });
        }
        self.state.last_spikes[..n].copy_from_slice(spikes);
        self.state.last_spikes[n..].copy_from_slice(exogenous);
        Ok(())
    }

    /// Spike decisions for the current potentials.
    pub fn decide<R: Rng + ?Sized>(&self, mode: SpikingMode, rng: &mut R) -> Vec<bool> {
        match mode {
            SpikingMode::Deterministic => self
                .state
                .potential
                .iter()
                .map(|&u| srm_spike(u, self.hyper.threshold))
                .collect(),
            SpikingMode::Stochastic => self
                .state
                .potential
                .iter()
                .map(|&u| {
                    let p = glm::spike_probability(u, self.hyper.bandwidth)
                        .expect("bandwidth validated at construction");
                    glm::sample_spike(p, rng)
                })
                .collect(),
        }
    }

    /// One full step: traces, potentials, spikes.
    pub fn step<R: Rng + ?Sized>(&mut self, exogenous: &[bool], mode: SpikingMode, rng: &mut R) -> Result<Vec<bool>> {
        self.advance();
        let spikes = self.decide(mode, rng);
        self.emit(&spikes, exogenous)?;
        Ok(spikes)
    }
}

/// Advances `state` by one step and returns the spikes emitted at that step.
#[allow(clippy::too_many_arguments)]
pub fn step_network<R: Rng + ?Sized>(
    state: &mut NetworkState,
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
    exogenous: &[bool],
    mode: SpikingMode,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let mut sim = Simulator::new(params, topology, hyper)?.with_state(std::mem::replace(
        state,
        NetworkState::new(topology),
    ))?;
    let out = sim.step(exogenous, mode, rng);
    *state = sim.state;
    out
}

/// Spikes and potentials of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One row per neuron.
    pub spikes: SpikeRecord,
    /// `potentials[t][i]` is the potential of neuron `i` at column `t`.
    pub potentials: Vec<Vec<f64>>,
}

/// Runs the network over the horizon of `exogenous`.
///
/// With `clamp`, visible neurons compute their potential as usual but the
/// spikes they emit are replaced by the clamped rows (ordered as the visible
/// set), so hidden neurons are sampled conditionally on the data.
pub fn run_trajectory<R: Rng + ?Sized>(
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
    exogenous: &SpikeRecord,
    mode: SpikingMode,
    clamp: Option<&SpikeRecord>,
    rng: &mut R,
) -> Result<Trajectory> {
    check_exogenous(topology, exogenous)?;
    let horizon = exogenous.horizon();
    if let Some(c) = clamp {
        check_visible(topology, c, horizon)?;
    }
    let mut sim = Simulator::new(params, topology, hyper)?;
    let mut spikes = SpikeRecord::zeros(topology.neuron_count(), horizon);
    let mut potentials = Vec::with_capacity(horizon);
    for t in 0..horizon {
        potentials.push(sim.advance().to_vec());
        let mut s = sim.decide(mode, rng);
        if let Some(c) = clamp {
            for (k, &i) in topology.visible().iter().enumerate() {
                s[i] = c.get(k, t);
            }
        }
        for (i, &b) in s.iter().enumerate() {
            spikes.set(i, t, b);
        }
        sim.emit(&s, &exogenous.column(t))?;
    }
    Ok(Trajectory { spikes, potentials })
}

pub(crate) fn check_exogenous(topology: &Topology, exogenous: &SpikeRecord) -> Result<()> {
    if exogenous.rows() != topology.exogenous_count() {
        return Err(Error::DimensionMismatch {
            what: "exogenous channels",
            expected: topology.exogenous_count(),
            got: exogenous.rows(),
        });
    }
    Ok(())
}

pub(crate) fn check_visible(topology: &Topology, visible: &SpikeRecord, horizon: usize) -> Result<()> {
    if visible.rows() != topology.visible().len() {
        return Err(Error::DimensionMismatch {
            what: "visible rows",
            expected: topology.visible().len(),
            got: visible.rows(),
        });
    }
    if visible.horizon() != horizon {
        return Err(Error::DimensionMismatch {
            what: "visible horizon",
            expected: horizon,
            got: visible.horizon(),
        });
    }
    Ok(())
}
