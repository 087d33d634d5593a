//! Maximum-likelihood training of probabilistic (GLM) networks through the
//! sampled upper bound on the visible negative log-likelihood.
//!
//! Visible neurons follow a two-factor rule, `(x - sigmoid(u)) * pre`.
//! Hidden neurons follow a REINFORCE three-factor rule,
//! `(global_error - baseline) * (h - sigmoid(u)) * pre`, where the global
//! error is the visible cross-entropy summed over visible neurons. Both
//! terms are scaled by the bandwidth when accumulated, which makes them
//! exact gradients of the bound for any bandwidth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::UpdateAccumulator;
use crate::error::{Error, Result};
use crate::glm::{nll_local, sample_spike, spike_probability};
use crate::network::{check_exogenous, check_visible, NetworkState, Simulator};
use crate::params::{HyperParams, Parameters};
use crate::record::SpikeRecord;
use crate::topology::Topology;

/// `(x - sigmoid(bandwidth * u)) * pre`.
#[inline]
pub fn visible_contribution(x: bool, u: f64, bandwidth: f64, pre_trace: f64) -> f64 {
    (f64::from(u8::from(x)) - crate::glm::sigmoid(bandwidth * u)) * pre_trace
}

/// Visible cross-entropy at one step, summed over visible neurons.
pub fn global_error(x: &[bool], u: &[f64], bandwidth: f64) -> f64 {
    x.iter().zip(u).map(|(&x, &u)| nll_local(x, u, bandwidth)).sum()
}

/// `(global_error - baseline) * (h - sigmoid(bandwidth * u)) * pre`.
#[inline]
pub fn hidden_contribution(e_bar: f64, h: bool, u: f64, bandwidth: f64, pre_trace: f64, baseline: f64) -> f64 {
    (e_bar - baseline) * (f64::from(u8::from(h)) - crate::glm::sigmoid(bandwidth * u)) * pre_trace
}

/// Which global error multiplies a hidden neuron's score at step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenCredit {
    /// The visible error of the same step.
    #[default]
    SameStep,
    /// The visible error summed from step `t` to the end of the example.
    /// Unbiased for the bound gradient at every horizon.
    RewardToGo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmTrainState {
    pub acc: UpdateAccumulator,
    /// Running mean of the per-step global error.
    pub baseline: f64,
    pub baseline_decay: f64,
    pub baseline_enabled: bool,
}

impl GlmTrainState {
    pub fn new(topology: &Topology, baseline_enabled: bool, baseline_decay: f64) -> Self {
        Self {
            acc: UpdateAccumulator::new(topology),
            baseline: 0.0,
            baseline_decay,
            baseline_enabled,
        }
    }

    fn observe(&mut self, e_bar: f64) {
        if self.baseline_enabled {
            self.baseline = self.baseline_decay * self.baseline + (1.0 - self.baseline_decay) * e_bar;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmTrainer {
    pub learn_bias: bool,
    pub samples_per_example: usize,
    pub hidden_credit: HiddenCredit,
    /// Multiplies every hidden-neuron update.
    pub hidden_scale: f64,
}

impl Default for GlmTrainer {
    fn default() -> Self {
        Self {
            learn_bias: true,
            samples_per_example: 1,
            hidden_credit: HiddenCredit::SameStep,
            hidden_scale: 1.0,
        }
    }
}

enum HiddenSpikes<'a, R: ?Sized> {
    Sample(&'a mut R),
    Given(&'a SpikeRecord),
}

impl GlmTrainer {
    /// Samples hidden spikes with the visible neurons clamped to `target`,
    /// accumulates the gradient of the bound and returns the sampled bound.
    ///
    /// With several samples per example, gradients and bound are averaged.
    #[allow(clippy::too_many_arguments)]
    pub fn train_step<R: Rng + ?Sized>(
        &self,
        params: &Parameters,
        topology: &Topology,
        hyper: &HyperParams,
        exogenous: &SpikeRecord,
        target: &SpikeRecord,
        state: &mut GlmTrainState,
        rng: &mut R,
    ) -> Result<f64> {
        let samples = self.samples_per_example.max(1);
        let weight = 1.0 / samples as f64;
        let mut bound = 0.0;
        for _ in 0..samples {
            bound += weight
                * self.accumulate(
                    params,
                    topology,
                    hyper,
                    exogenous,
                    target,
                    state,
                    HiddenSpikes::Sample(rng),
                    None,
                    weight,
                )?;
        }
        state.acc.count += 1;
        Ok(bound)
    }

    /// Accumulates the update for a caller-chosen hidden trajectory (one row
    /// per hidden neuron) instead of a sampled one, optionally from a given
    /// initial state. Does not bump the example count.
    #[allow(clippy::too_many_arguments)]
    pub fn accumulate_given(
        &self,
        params: &Parameters,
        topology: &Topology,
        hyper: &HyperParams,
        exogenous: &SpikeRecord,
        target: &SpikeRecord,
        hidden: &SpikeRecord,
        state: &mut GlmTrainState,
        initial: Option<NetworkState>,
        weight: f64,
    ) -> Result<f64> {
        if hidden.rows() != topology.hidden().len() || hidden.horizon() != exogenous.horizon() {
            return Err(Error::DimensionMismatch {
                what: "hidden trajectory",
                expected: topology.hidden().len(),
                got: hidden.rows(),
            });
        }
        self.accumulate::<rand_chacha::ChaCha8Rng>(
            params,
            topology,
            hyper,
            exogenous,
            target,
            state,
            HiddenSpikes::Given(hidden),
            initial,
            weight,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate<R: Rng + ?Sized>(
        &self,
        params: &Parameters,
        topology: &Topology,
        hyper: &HyperParams,
        exogenous: &SpikeRecord,
        target: &SpikeRecord,
        state: &mut GlmTrainState,
        mut hidden_spikes: HiddenSpikes<'_, R>,
        initial: Option<NetworkState>,
        weight: f64,
    ) -> Result<f64> {
        check_exogenous(topology, exogenous)?;
        let horizon = exogenous.horizon();
        check_visible(topology, target, horizon)?;
        let mut sim = Simulator::new(params, topology, hyper)?;
        if let Some(s) = initial {
            sim = sim.with_state(s)?;
        }
        let bw = hyper.bandwidth;
        let hidden_weight = weight * bw * self.hidden_scale;
        let n = topology.neuron_count();
        let mut bound = 0.0;
        let mut spikes = vec![false; n];
        let mut visible_x = Vec::with_capacity(topology.visible().len());
        let mut visible_u = Vec::with_capacity(topology.visible().len());
        // reward-to-go: per-step hidden score terms, weighted once the
        // remaining error is known
        let mut deferred: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
        let baseline_at_start = state.baseline;

        for t in 0..horizon {
            let u = sim.advance().to_vec();
            visible_x.clear();
            visible_u.clear();
            for (k, &i) in topology.visible().iter().enumerate() {
                let x = target.get(k, t);
                spikes[i] = x;
                visible_x.push(x);
                visible_u.push(u[i]);
                let post = weight * bw * visible_contribution(x, u[i], bw, 1.0);
                let range = topology.edge_range(i);
                for (g, &j) in state.acc.grads[range].iter_mut().zip(topology.parents(i)) {
                    *g -= post * sim.state.syn_p[j];
                }
                if self.learn_bias {
                    state.acc.bias_grads[i] -= post;
                }
            }
            for (k, &i) in topology.hidden().iter().enumerate() {
                spikes[i] = match &mut hidden_spikes {
                    HiddenSpikes::Sample(rng) => sample_spike(spike_probability(u[i], bw)?, *rng),
                    HiddenSpikes::Given(rec) => rec.get(k, t),
                };
            }
            let e_bar = global_error(&visible_x, &visible_u, bw);
            bound += e_bar;

            match self.hidden_credit {
                HiddenCredit::SameStep => {
                    let baseline = if state.baseline_enabled { state.baseline } else { 0.0 };
                    for &i in topology.hidden() {
                        let post = hidden_weight * hidden_contribution(e_bar, spikes[i], u[i], bw, 1.0, baseline);
                        if post == 0.0 {
                            continue;
                        }
                        let range = topology.edge_range(i);
                        for (g, &j) in state.acc.grads[range].iter_mut().zip(topology.parents(i)) {
                            *g += post * sim.state.syn_p[j];
                        }
                        if self.learn_bias {
                            state.acc.bias_grads[i] += post;
                        }
                    }
                }
                HiddenCredit::RewardToGo => {
                    let scores: Vec<f64> = topology
                        .hidden()
                        .iter()
                        .map(|&i| hidden_weight * hidden_contribution(1.0, spikes[i], u[i], bw, 1.0, 0.0))
                        .collect();
                    let traces = sim.state.syn_p.clone();
                    deferred.push((e_bar, scores, traces));
                }
            }
            let observed = e_bar;
            sim.emit(&spikes, &exogenous.column(t))?;
            // baseline tracks the error after it has been used for this step
            if self.hidden_credit == HiddenCredit::SameStep {
                state.observe(observed);
            }
        }

        if self.hidden_credit == HiddenCredit::RewardToGo {
            let baseline = if state.baseline_enabled { baseline_at_start } else { 0.0 };
            let mut to_go = 0.0;
            let steps = deferred.len();
            for (t, (e_bar, scores, traces)) in deferred.iter().enumerate().rev() {
                to_go += e_bar;
                let centred = to_go - baseline * (steps - t) as f64;
                for (h, &i) in topology.hidden().iter().enumerate() {
                    let post = centred * scores[h];
                    if post == 0.0 {
                        continue;
                    }
                    let range = topology.edge_range(i);
                    for (g, &j) in state.acc.grads[range].iter_mut().zip(topology.parents(i)) {
                        *g += post * traces[j];
                    }
                    if self.learn_bias {
                        state.acc.bias_grads[i] += post;
                    }
                }
            }
            for (e_bar, _, _) in &deferred {
                state.observe(*e_bar);
            }
        }
        Ok(bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::sequence_nll_complete;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    #[test]
    fn contribution_examples() {
        assert!((visible_contribution(true, 0.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(visible_contribution(true, 60.0, 1.0, 1.0).abs() < 1e-20);
        assert_eq!(visible_contribution(false, 0.3, 1.0, 0.0), 0.0);
        assert_eq!(hidden_contribution(0.7, true, 0.2, 1.0, 1.0, 0.7), 0.0);
        assert!(hidden_contribution(1.0, true, 60.0, 1.0, 1.0, 0.0).abs() < 1e-20);
        assert!((hidden_contribution(1.0, true, 0.0, 1.0, 2.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn global_error_examples() {
        assert!((global_error(&[true], &[0.0], 1.0) - LN_2).abs() < 1e-15);
        assert!(global_error(&[true, false], &[60.0, -60.0], 1.0) < 1e-20);
        assert!(global_error(&[false, true, true], &[0.3, -2.0, 4.0], 1.5) >= 0.0);
    }

    #[test]
    fn no_hidden_reduces_to_visible_rule() {
        let topo = Topology::fully_connected(2, 0, 2);
        let params = Parameters::init_uniform(&topo, 8);
        let hyper = HyperParams::default();
        let ex = SpikeRecord::from_u8_rows(&[&[1, 0, 1, 1, 0], &[0, 1, 1, 0, 1]]).unwrap();
        let x = SpikeRecord::from_u8_rows(&[&[1, 1, 0, 1, 0], &[0, 0, 1, 1, 1]]).unwrap();
        let trainer = GlmTrainer::default();
        let mut state = GlmTrainState::new(&topo, true, 0.99);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bound = trainer.train_step(&params, &topo, &hyper, &ex, &x, &mut state, &mut rng).unwrap();
        let nll = sequence_nll_complete(&x, &ex, &params, &topo, &hyper).unwrap();
        assert!((bound - nll.total).abs() < 1e-12);

        // explicit two-factor sum for the first edge of neuron 0
        let traj = crate::network::run_trajectory(
            &params,
            &topo,
            &hyper,
            &ex,
            crate::SpikingMode::Deterministic,
            Some(&x),
            &mut rng,
        )
        .unwrap();
        let mut sim = Simulator::new(&params, &topo, &hyper).unwrap();
        let src = topo.parents(0)[0];
        let mut expected = 0.0;
        for t in 0..5 {
            let u = sim.advance()[0];
            expected -= visible_contribution(x.get(0, t), u, 1.0, sim.state.syn_p[src]);
            sim.emit(&traj.spikes.column(t), &ex.column(t)).unwrap();
        }
        assert!((state.acc.grads[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn seeded_steps_are_reproducible() {
        let topo = Topology::fully_connected(1, 3, 2);
        let params = Parameters::init_uniform(&topo, 2);
        let hyper = HyperParams::default();
        let ex = SpikeRecord::from_u8_rows(&[&[1, 0, 1, 1, 0, 1], &[0, 1, 1, 0, 1, 1]]).unwrap();
        let x = SpikeRecord::from_u8_rows(&[&[1, 1, 0, 1, 0, 0]]).unwrap();
        let run = || {
            let mut state = GlmTrainState::new(&topo, true, 0.9);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let b = GlmTrainer::default()
                .train_step(&params, &topo, &hyper, &ex, &x, &mut state, &mut rng)
                .unwrap();
            (b, state)
        };
        let (b1, s1) = run();
        let (b2, s2) = run();
        assert_eq!(b1, b2);
        assert_eq!(s1, s2);
        assert!(s1.baseline > 0.0);
    }

    #[test]
    fn disabled_baseline_stays_zero() {
        let topo = Topology::fully_connected(1, 1, 1);
        let params = Parameters::init_uniform(&topo, 2);
        let hyper = HyperParams::default();
        let ex = SpikeRecord::from_u8_rows(&[&[1, 0, 1]]).unwrap();
        let x = SpikeRecord::from_u8_rows(&[&[1, 1, 0]]).unwrap();
        let mut state = GlmTrainState::new(&topo, false, 0.99);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        GlmTrainer::default()
            .train_step(&params, &topo, &hyper, &ex, &x, &mut state, &mut rng)
            .unwrap();
        assert_eq!(state.baseline, 0.0);
    }
}
