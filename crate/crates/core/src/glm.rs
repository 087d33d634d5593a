//! Probabilistic spiking: Bernoulli firing with probability
//! `sigmoid(bandwidth * u)`, per-spike cross-entropy, sequence likelihoods and
//! the sampled upper bound on the visible negative log-likelihood.

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{check_exogenous, check_visible, run_trajectory, SpikingMode, Simulator};
use crate::params::{HyperParams, Parameters};
use crate::record::SpikeRecord;
use crate::topology::Topology;

/// Probabilities used for sampling are kept this far away from 0 and 1.
pub const PROB_FLOOR: f64 = 1e-12;

/// Upper limit on `|H| * T` for exhaustive enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Plain logistic function, evaluated on the stable branch for each sign.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(bandwidth * u)`, clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub fn spike_probability(u: f64, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    Ok(sigmoid(bandwidth * u).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
}

/// Bernoulli draw.
#[inline]
pub fn sample_spike<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < prob
}

/// Cross-entropy `l(s, sigmoid(bandwidth * u))` through the log-sigmoid, so
/// saturated predictions never round to `ln 0`.
#[inline]
pub fn nll_local(spike: bool, u: f64, bandwidth: f64) -> f64 {
    let x = bandwidth * u;
    if spike {
        softplus(-x)
    } else {
        softplus(x)
    }
}

/// Per-neuron, per-step cross-entropy terms of a spike sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodBreakdown {
    neurons: usize,
    /// Column-major: term of neuron `i` at column `t` is `per_term[t * neurons + i]`.
    pub per_term: Vec<f64>,
    pub total: f64,
}

impl LikelihoodBreakdown {
    pub fn term(&self, neuron: usize, t: usize) -> f64 {
        self.per_term[t * self.neurons + neuron]
    }

    /// Sum of the terms of the given neurons.
    pub fn sum_over(&self, neurons: &[usize]) -> f64 {
        let horizon = self.per_term.len().checked_div(self.neurons).unwrap_or(0);
        (0..horizon)
            .flat_map(|t| neurons.iter().map(move |&i| (i, t)))
            .map(|(i, t)| self.term(i, t))
            .sum()
    }
}

/// Negative log-probability of a fully observed sequence (`record` holds one
/// row per neuron), replayed with every spike given.
pub fn sequence_nll_complete(
    record: &SpikeRecord,
    exogenous: &SpikeRecord,
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
) -> Result<LikelihoodBreakdown> {
    check_exogenous(topology, exogenous)?;
    if record.rows() != topology.neuron_count() {
        return Err(Error::DimensionMismatch {
            what: "record rows",
            expected: topology.neuron_count(),
            got: record.rows(),
        });
    }
    if record.horizon() != exogenous.horizon() {
        return Err(Error::DimensionMismatch {
            what: "record horizon",
            expected: exogenous.horizon(),
            got: record.horizon(),
        });
    }
    let n = topology.neuron_count();
    let mut sim = Simulator::new(params, topology, hyper)?;
    let mut per_term = Vec::with_capacity(n * record.horizon());
    for t in 0..record.horizon() {
        let u = sim.advance();
        let s = record.column(t);
        per_term.extend(u.iter().zip(&s).map(|(&u, &s)| nll_local(s, u, hyper.bandwidth)));
        sim.emit(&s, &exogenous.column(t))?;
    }
    let total = per_term.iter().sum();
    Ok(LikelihoodBreakdown {
        neurons: n,
        per_term,
        total,
    })
}

/// One hidden trajectory from an exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct HiddenOutcome {
    /// One row per hidden neuron.
    pub hidden: SpikeRecord,
    /// `log p(h || x)`: hidden cross-entropy terms, negated.
    pub log_prob_hidden: f64,
    /// `sum_t sum_{i in X} l(x_it, sigmoid(u_it))` under this hidden trajectory.
    pub visible_nll: f64,
}

/// Every hidden trajectory compatible with the clamped visible data.
///
/// Guarded by [`ENUMERATION_LIMIT`]; meant for testing small instances.
pub fn enumerate_hidden(
    visible: &SpikeRecord,
    exogenous: &SpikeRecord,
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
) -> Result<Vec<HiddenOutcome>> {
    check_exogenous(topology, exogenous)?;
    let horizon = exogenous.horizon();
    check_visible(topology, visible, horizon)?;
    let hidden = topology.hidden();
    let bits = hidden.len() * horizon;
    if bits > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            hidden: hidden.len(),
            horizon,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut full = SpikeRecord::zeros(topology.neuron_count(), horizon);
    for (k, &i) in topology.visible().iter().enumerate() {
        for t in 0..horizon {
            full.set(i, t, visible.get(k, t));
        }
    }
    let mut out = Vec::with_capacity(1 << bits);
    for code in 0u64..(1u64 << bits) {
        let mut h = SpikeRecord::zeros(hidden.len(), horizon);
        for (k, &i) in hidden.iter().enumerate() {
            for t in 0..horizon {
                let b = (code >> (k * horizon + t)) & 1 == 1;
                h.set(k, t, b);
                full.set(i, t, b);
            }
        }
        let terms = sequence_nll_complete(&full, exogenous, params, topology, hyper)?;
        out.push(HiddenOutcome {
            hidden: h,
            log_prob_hidden: -terms.sum_over(hidden),
            visible_nll: terms.sum_over(topology.visible()),
        });
    }
    Ok(out)
}

/// `-log sum_h p(x, h)` by exhaustive enumeration over hidden trajectories.
pub fn marginal_nll_exact(
    visible: &SpikeRecord,
    exogenous: &SpikeRecord,
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
) -> Result<f64> {
    let outcomes = enumerate_hidden(visible, exogenous, params, topology, hyper)?;
    let log_joint: Vec<f64> = outcomes
        .iter()
        .map(|o| o.log_prob_hidden - o.visible_nll)
        .collect();
    let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_joint.iter().map(|l| (l - max).exp()).sum();
    Ok(-(max + sum.ln()))
}

/// Exact expectation of the visible cross-entropy under `p(h || x)`: the
/// upper bound on [`marginal_nll_exact`].
pub fn expected_bound_exact(
    visible: &SpikeRecord,
    exogenous: &SpikeRecord,
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
) -> Result<f64> {
    let outcomes = enumerate_hidden(visible, exogenous, params, topology, hyper)?;
    Ok(outcomes
        .iter()
        .map(|o| o.log_prob_hidden.exp() * o.visible_nll)
        .sum())
}

/// A single hidden trajectory drawn with the visible neurons clamped.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    /// One row per neuron; visible rows equal the data.
    pub record: SpikeRecord,
    pub log_prob_hidden: f64,
    /// Visible cross-entropy summed over visible neurons, one entry per step.
    pub bound_terms: Vec<f64>,
    pub potentials: Vec<Vec<f64>>,
}

impl TrajectorySample {
    /// Single-sample estimate of the bound.
    pub fn bound(&self) -> f64 {
        self.bound_terms.iter().sum()
    }
}

pub fn bound_sample<R: Rng + ?Sized>(
    visible: &SpikeRecord,
    exogenous: &SpikeRecord,
    params: &Parameters,
    topology: &Topology,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<TrajectorySample> {
    let traj = run_trajectory(
        params,
        topology,
        hyper,
        exogenous,
        SpikingMode::Stochastic,
        Some(visible),
        rng,
    )?;
    let mut bound_terms = Vec::with_capacity(exogenous.horizon());
    let mut log_prob_hidden = 0.0;
    for (t, u) in traj.potentials.iter().enumerate() {
        bound_terms.push(
            topology
                .visible()
                .iter()
                .map(|&i| nll_local(traj.spikes.get(i, t), u[i], hyper.bandwidth))
                .sum(),
        );
        log_prob_hidden -= topology
            .hidden()
            .iter()
            .map(|&i| nll_local(traj.spikes.get(i, t), u[i], hyper.bandwidth))
            .sum::<f64>();
    }
    Ok(TrajectorySample {
        record: traj.spikes,
        log_prob_hidden,
        bound_terms,
        potentials: traj.potentials,
    })
}
