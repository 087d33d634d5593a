//! Surrogate-gradient training of threshold (SRM) networks.
//!
//! Each step contributes `error * post * pre` to the gradient of every edge:
//! the error signal of the post-synaptic neuron, the surrogate derivative of
//! its threshold at the current potential, and the pre-synaptic trace. Credit
//! is only assigned within the same step; there is no backward pass through
//! time.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::UpdateAccumulator;
use crate::error::{Error, Result};
use crate::glm::{nll_local, sigmoid, PROB_FLOOR};
use crate::network::{check_exogenous, check_visible, srm_spike, NetworkState, Simulator};
use crate::params::{HyperParams, Parameters};
use crate::record::SpikeRecord;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateVariant {
    Sigmoid,
    Rectifier,
    Exponential,
}

/// Smooth stand-in for the derivative of the threshold function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateKind {
    pub variant: SurrogateVariant,
    pub slope: f64,
}

impl Default for SurrogateKind {
    fn default() -> Self {
        Self {
            variant: SurrogateVariant::Sigmoid,
            slope: 1.0,
        }
    }
}

impl SurrogateKind {
    pub fn derivative(&self, u: f64, threshold: f64) -> f64 {
        surrogate_derivative(u, threshold, *self)
    }
}

pub fn surrogate_derivative(u: f64, threshold: f64, kind: SurrogateKind) -> f64 {
    let x = u - threshold;
    let k = kind.slope;
    match kind.variant {
        SurrogateVariant::Sigmoid => {
            let s = sigmoid(k * x);
            k * s * (1.0 - s)
        }
        // width = 1 / slope
        SurrogateVariant::Rectifier => k * (1.0 - (k * x).abs()).max(0.0),
        SurrogateVariant::Exponential => k * (-(k * x).abs()).exp(),
    }
}

/// Cross-entropy of `target` against the smoothed output
/// `sigmoid(sharpness * (u - threshold))`.
///
/// Returns the loss and its derivative with respect to the smoothed output.
/// The derivative divides by `y (1 - y)`, floored at [`PROB_FLOOR`].
pub fn local_loss(target: bool, u: f64, threshold: f64, sharpness: f64) -> (f64, f64) {
    let z = sharpness * (u - threshold);
    let loss = nll_local(target, z, 1.0);
    let y = sigmoid(z);
    let t = f64::from(u8::from(target));
    let d = (y - t) / (y * (1.0 - y)).max(PROB_FLOOR);
    (loss, d)
}

/// `error * post * pre` for one edge at one step.
#[inline]
pub fn sg_contribution(error: f64, u: f64, threshold: f64, kind: SurrogateKind, pre_trace: f64) -> f64 {
    error * surrogate_derivative(u, threshold, kind) * pre_trace
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Visible neurons use their own loss derivative; hidden neurons get none.
    #[default]
    ReadoutDirect,
    /// Hidden neurons receive a fixed random projection of the visible errors.
    RandomFeedback,
    /// Every hidden layer is scored by its own fixed random read-out against
    /// the visible targets.
    LocalLayer,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    fn random(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..=1.0) * scale).collect();
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Per-step quantities the error strategies draw on.
#[derive(Debug, Clone, Copy)]
pub struct ErrorContext<'a> {
    /// Targets of the visible neurons, in visible order.
    pub targets: &'a [bool],
    /// Smoothed output of every neuron.
    pub smoothed: &'a [f64],
    /// Loss derivative with respect to each visible neuron's smoothed output.
    pub output_errors: &'a [f64],
    /// Loss derivative with respect to each visible neuron's potential
    /// (output error times its surrogate derivative). This is what random
    /// feedback projects onto hidden neurons.
    pub potential_errors: &'a [f64],
}

/// Error strategy with its fixed random matrices.
///
/// The matrices are drawn once at construction and never touched again;
/// trainers only borrow this immutably.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignals {
    mode: ErrorMode,
    /// `|H| x |X|`, random feedback only.
    feedback: Option<Matrix>,
    /// Per hidden layer: its neurons and an `|X| x |layer|` read-out.
    layer_readouts: Vec<(Vec<usize>, Matrix)>,
}

impl ErrorSignals {
    pub fn new(mode: ErrorMode, topology: &Topology, feedback_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(feedback_seed);
        let nv = topology.visible().len();
        let mut out = Self {
            mode,
            feedback: None,
            layer_readouts: Vec::new(),
        };
        match mode {
            ErrorMode::ReadoutDirect => {}
            ErrorMode::RandomFeedback => {
                let scale = 1.0 / (nv.max(1) as f64).sqrt();
                out.feedback = Some(Matrix::random(topology.hidden().len(), nv, scale, &mut rng));
            }
            ErrorMode::LocalLayer => {
                let layers = topology
                    .layers()
                    .ok_or(Error::ModeMismatch("a layered topology for local_layer errors"))?;
                for layer in layers {
                    let scale = 1.0 / (layer.len().max(1) as f64).sqrt();
                    out.layer_readouts
                        .push((layer.clone(), Matrix::random(nv, layer.len(), scale, &mut rng)));
                }
            }
        }
        Ok(out)
    }

    /// Random feedback with a caller-chosen `|H| x |X|` matrix.
    pub fn with_feedback_matrix(topology: &Topology, matrix: Matrix) -> Result<Self> {
        if matrix.rows != topology.hidden().len() || matrix.cols != topology.visible().len() {
            return Err(Error::DimensionMismatch {
                what: "feedback matrix",
                expected: topology.hidden().len() * topology.visible().len(),
                got: matrix.rows * matrix.cols,
            });
        }
        Ok(Self {
            mode: ErrorMode::RandomFeedback,
            feedback: Some(matrix),
            layer_readouts: Vec::new(),
        })
    }

    pub fn mode(&self) -> ErrorMode {
        self.mode
    }

    pub fn feedback(&self) -> Option<&Matrix> {
        self.feedback.as_ref()
    }

    /// Hash of every fixed matrix entry.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for m in self.feedback.iter().chain(self.layer_readouts.iter().map(|(_, m)| m)) {
            m.rows.hash(&mut h);
            for v in &m.data {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Writes the error signal of every neuron into `errors`.
    pub fn compute(&self, topology: &Topology, ctx: &ErrorContext<'_>, errors: &mut [f64]) {
        errors.iter_mut().for_each(|e| *e = 0.0);
        for (k, &i) in topology.visible().iter().enumerate() {
            errors[i] = ctx.output_errors[k];
        }
        match self.mode {
            ErrorMode::ReadoutDirect => {}
            ErrorMode::RandomFeedback => {
                let b = self.feedback.as_ref().expect("feedback matrix present");
                for (h, &i) in topology.hidden().iter().enumerate() {
                    errors[i] = (0..b.cols).map(|k| b.get(h, k) * ctx.potential_errors[k]).sum();
                }
            }
            ErrorMode::LocalLayer => {
                for (layer, readout) in &self.layer_readouts {
                    // local loss: sum_k l(target_k, sigmoid(sum_i R_ki y_i))
                    let residuals: Vec<f64> = (0..readout.rows)
                        .map(|k| {
                            let a: f64 = layer
                                .iter()
                                .enumerate()
                                .map(|(c, &i)| readout.get(k, c) * ctx.smoothed[i])
                                .sum();
                            sigmoid(a) - f64::from(u8::from(ctx.targets[k]))
                        })
                        .collect();
                    for (c, &i) in layer.iter().enumerate() {
                        errors[i] = residuals
                            .iter()
                            .enumerate()
                            .map(|(k, r)| r * readout.get(k, c))
                            .sum();
                    }
                }
            }
        }
    }
}

/// Error signals for one step, given only the visible potential errors.
///
/// Local-layer mode needs more context than this; use [`ErrorSignals::compute`].
pub fn error_signals(signals: &ErrorSignals, visible_errors: &[f64], topology: &Topology) -> Result<Vec<f64>> {
    if signals.mode() == ErrorMode::LocalLayer {
        return Err(Error::ModeMismatch("targets and smoothed outputs for local_layer errors"));
    }
    if visible_errors.len() != topology.visible().len() {
        return Err(Error::DimensionMismatch {
            what: "visible errors",
            expected: topology.visible().len(),
            got: visible_errors.len(),
        });
    }
    let mut errors = vec![0.0; topology.neuron_count()];
    let ctx = ErrorContext {
        targets: &[],
        smoothed: &[],
        output_errors: visible_errors,
        potential_errors: visible_errors,
    };
    signals.compute(topology, &ctx, &mut errors);
    Ok(errors)
}

/// Adds `errors[i] * post[i] * p_j` for every edge `j -> i` (and
/// `errors[i] * post[i]` to bias `i` when `biases` is set).
pub fn accumulate_three_factor(
    acc: &mut UpdateAccumulator,
    topology: &Topology,
    state: &NetworkState,
    errors: &[f64],
    post: &[f64],
    biases: bool,
) {
    for i in 0..topology.neuron_count() {
        let factor = errors[i] * post[i];
        if factor == 0.0 {
            continue;
        }
        let range = topology.edge_range(i);
        for (g, &j) in acc.grads[range].iter_mut().zip(topology.parents(i)) {
            *g += factor * state.syn_p[j];
        }
        if biases {
            acc.bias_grads[i] += factor;
        }
    }
}

/// Configuration of the surrogate-gradient trainer.
#[derive(Debug, Clone)]
pub struct SrmTrainer {
    pub surrogate: SurrogateKind,
    pub signals: ErrorSignals,
    pub learn_bias: bool,
}

impl SrmTrainer {
    pub fn new(surrogate: SurrogateKind, signals: ErrorSignals) -> Self {
        Self {
            surrogate,
            signals,
            learn_bias: false,
        }
    }

    /// Runs one example forward and accumulates its gradient into `acc`.
    ///
    /// Returns the summed local loss.
    pub fn train_step(
        &self,
        params: &Parameters,
        topology: &Topology,
        hyper: &HyperParams,
        exogenous: &SpikeRecord,
        target: &SpikeRecord,
        acc: &mut UpdateAccumulator,
    ) -> Result<f64> {
        self.train_step_from(params, topology, hyper, exogenous, target, acc, None)
    }

    /// Like [`Self::train_step`], starting from `initial` instead of the zero state.
    #[allow(clippy::too_many_arguments)]
    pub fn train_step_from(
        &self,
        params: &Parameters,
        topology: &Topology,
        hyper: &HyperParams,
        exogenous: &SpikeRecord,
        target: &SpikeRecord,
        acc: &mut UpdateAccumulator,
        initial: Option<NetworkState>,
    ) -> Result<f64> {
        check_exogenous(topology, exogenous)?;
        check_visible(topology, target, exogenous.horizon())?;
        if acc.grads.len() != topology.edge_count() {
            return Err(Error::DimensionMismatch {
                what: "accumulator edges",
                expected: topology.edge_count(),
                got: acc.grads.len(),
            });
        }
        let mut sim = Simulator::new(params, topology, hyper)?;
        if let Some(state) = initial {
            sim = sim.with_state(state)?;
        }
        let n = topology.neuron_count();
        let nv = topology.visible().len();
        let threshold = hyper.threshold;
        let mut smoothed = vec![0.0; n];
        let mut post = vec![0.0; n];
        let mut errors = vec![0.0; n];
        let mut output_errors = vec![0.0; nv];
        let mut potential_errors = vec![0.0; nv];
        let mut loss = 0.0;

        for t in 0..exogenous.horizon() {
            let u = sim.advance().to_vec();
            for i in 0..n {
                smoothed[i] = sigmoid(self.surrogate.slope * (u[i] - threshold));
                post[i] = self.surrogate.derivative(u[i], threshold);
            }
            let targets = target.column(t);
            for (k, &i) in topology.visible().iter().enumerate() {
                let (l, d) = local_loss(targets[k], u[i], threshold, self.surrogate.slope);
                loss += l;
                output_errors[k] = d;
                potential_errors[k] = d * post[i];
            }
            let ctx = ErrorContext {
                targets: &targets,
                smoothed: &smoothed,
                output_errors: &output_errors,
                potential_errors: &potential_errors,
            };
            self.signals.compute(topology, &ctx, &mut errors);
            accumulate_three_factor(acc, topology, &sim.state, &errors, &post, self.learn_bias);

            let spikes: Vec<bool> = u.iter().map(|&v| srm_spike(v, threshold)).collect();
            sim.emit(&spikes, &exogenous.column(t))?;
        }
        acc.count += 1;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Source, TopologySpec};
    use std::f64::consts::LN_2;

    const KINDS: [SurrogateVariant; 3] = [
        SurrogateVariant::Sigmoid,
        SurrogateVariant::Rectifier,
        SurrogateVariant::Exponential,
    ];

    #[test]
    fn surrogate_examples() {
        let sig = SurrogateKind::default();
        assert!((surrogate_derivative(1.0, 1.0, sig) - 0.25).abs() < 1e-15);
        for variant in KINDS {
            let kind = SurrogateKind { variant, slope: 2.0 };
            assert!(surrogate_derivative(1e3, 0.0, kind) < 1e-12);
            assert!(surrogate_derivative(-1e3, 0.0, kind) < 1e-12);
            for k in -100..=100 {
                let v = surrogate_derivative(k as f64 * 0.05, 0.0, kind);
                assert!(v.is_finite() && v >= 0.0);
            }
        }
        let rect = SurrogateKind {
            variant: SurrogateVariant::Rectifier,
            slope: 2.0,
        };
        assert_eq!(surrogate_derivative(0.6, 0.0, rect), 0.0);
        assert_eq!(surrogate_derivative(0.0, 0.0, rect), 2.0);
    }

    #[test]
    fn local_loss_examples() {
        let (l, _) = local_loss(true, 1.0, 1.0, 1.0);
        assert!((l - LN_2).abs() < 1e-15);
        let (l, d) = local_loss(true, 51.0, 1.0, 1.0);
        assert!(l < 1e-20);
        assert_eq!(d, 0.0);
        let (_, d) = local_loss(true, 0.5, 1.0, 1.0);
        assert!(d < 0.0);
        let (_, d) = local_loss(false, 1.5, 1.0, 1.0);
        assert!(d > 0.0);
    }

    #[test]
    fn sg_contribution_examples() {
        let kind = SurrogateKind::default();
        assert_eq!(sg_contribution(0.0, 1.0, 1.0, kind, 3.0), 0.0);
        assert_eq!(sg_contribution(1.0, 1.0, 1.0, kind, 0.0), 0.0);
        assert!((sg_contribution(1.0, 1.0, 1.0, kind, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn error_strategies() {
        let topo = Topology::layered(2, &[2, 2], 3);
        for mode in [ErrorMode::ReadoutDirect, ErrorMode::RandomFeedback] {
            let signals = ErrorSignals::new(mode, &topo, 1).unwrap();
            let e = error_signals(&signals, &[0.0, 0.0], &topo).unwrap();
            assert!(e.iter().all(|&v| v == 0.0));
        }
        let direct = ErrorSignals::new(ErrorMode::ReadoutDirect, &topo, 1).unwrap();
        let e = error_signals(&direct, &[0.4, -0.2], &topo).unwrap();
        assert_eq!(&e[..2], &[0.4, -0.2]);
        assert!(e[2..].iter().all(|&v| v == 0.0));

        let square = Topology::fully_connected(2, 2, 1);
        let fb = ErrorSignals::with_feedback_matrix(&square, Matrix::identity(2)).unwrap();
        let e = error_signals(&fb, &[1.0, 0.0], &square).unwrap();
        assert_eq!(e, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn local_layer_requires_layers() {
        let topo = Topology::fully_connected(2, 2, 1);
        assert!(matches!(
            ErrorSignals::new(ErrorMode::LocalLayer, &topo, 0),
            Err(Error::ModeMismatch(_))
        ));
        let layered = Topology::layered(2, &[3], 1);
        let signals = ErrorSignals::new(ErrorMode::LocalLayer, &layered, 0).unwrap();
        // targets at the read-out's own prediction give a zero error
        let mut errors = vec![9.0; 5];
        let smoothed = vec![0.0; 5];
        let ctx = ErrorContext {
            targets: &[false, false],
            smoothed: &smoothed,
            output_errors: &[0.0, 0.0],
            potential_errors: &[0.0, 0.0],
        };
        signals.compute(&layered, &ctx, &mut errors);
        // sigmoid(0) - 0 = 0.5 residual: hidden errors are 0.5 * column sums
        assert!(errors[2..].iter().any(|&e| e != 0.0));
        assert_eq!(&errors[..2], &[0.0, 0.0]);
    }

    fn single_synapse() -> Topology {
        Topology::from_spec(&TopologySpec::Explicit {
            neurons: 1,
            visible: vec![0],
            hidden: vec![],
            exogenous: 1,
            edges: vec![(Source::Exogenous(0), 0)],
        })
        .unwrap()
    }

    #[test]
    fn saturated_correct_output_gives_no_gradient() {
        let topo = single_synapse();
        let params = Parameters {
            weights: vec![0.5],
            biases: vec![80.0],
        };
        let hyper = HyperParams {
            tau_ref: 1e-3,
            ..Default::default()
        };
        let input = SpikeRecord::from_u8_rows(&[&[1, 1, 0, 1, 0, 1]]).unwrap();
        let target = SpikeRecord::from_u8_rows(&[&[1; 6]]).unwrap();
        let trainer = SrmTrainer::new(
            SurrogateKind::default(),
            ErrorSignals::new(ErrorMode::ReadoutDirect, &topo, 0).unwrap(),
        );
        let mut acc = UpdateAccumulator::new(&topo);
        trainer.train_step(&params, &topo, &hyper, &input, &target, &mut acc).unwrap();
        assert!(acc.grads.iter().all(|g| g.abs() < 1e-12));
    }

    #[test]
    fn one_step_gradient_matches_finite_difference() {
        let topo = single_synapse();
        let hyper = HyperParams::default();
        let trainer = SrmTrainer::new(
            SurrogateKind::default(),
            ErrorSignals::new(ErrorMode::ReadoutDirect, &topo, 0).unwrap(),
        );
        let mut initial = NetworkState::new(&topo);
        initial.syn_p[1] = 0.8;
        initial.syn_q[1] = 0.3;
        let input = SpikeRecord::zeros(1, 1);
        let target = SpikeRecord::from_u8_rows(&[&[1]]).unwrap();
        let loss_at = |w: f64| {
            let params = Parameters {
                weights: vec![w],
                biases: vec![0.1],
            };
            let mut acc = UpdateAccumulator::new(&topo);
            let l = trainer
                .train_step_from(&params, &topo, &hyper, &input, &target, &mut acc, Some(initial.clone()))
                .unwrap();
            (l, acc.grads[0])
        };
        let w = 0.4;
        let (_, grad) = loss_at(w);
        let h = 1e-5;
        let fd = (loss_at(w + h).0 - loss_at(w - h).0) / (2.0 * h);
        assert!(grad != 0.0);
        assert!((grad - fd).abs() <= 1e-5 * fd.abs());
    }

    #[test]
    fn accumulation_is_linear_in_examples() {
        let topo = Topology::layered(2, &[4], 3);
        let params = Parameters::init_uniform(&topo, 3);
        let hyper = HyperParams {
            threshold: 0.05,
            ..Default::default()
        };
        let input = SpikeRecord::from_u8_rows(&[&[1, 0, 1, 1, 0, 0, 1, 0], &[0, 1, 1, 0, 1, 0, 0, 1], &[1, 1, 0, 0, 1, 1, 0, 0]])
            .unwrap();
        let target = SpikeRecord::from_u8_rows(&[&[1; 8], &[0; 8]]).unwrap();
        let trainer = SrmTrainer::new(
            SurrogateKind::default(),
            ErrorSignals::new(ErrorMode::RandomFeedback, &topo, 4).unwrap(),
        );
        let mut once = UpdateAccumulator::new(&topo);
        trainer.train_step(&params, &topo, &hyper, &input, &target, &mut once).unwrap();
        let mut twice = UpdateAccumulator::new(&topo);
        trainer.train_step(&params, &topo, &hyper, &input, &target, &mut twice).unwrap();
        trainer.train_step(&params, &topo, &hyper, &input, &target, &mut twice).unwrap();
        assert!(!once.is_zero());
        for (a, b) in once.grads.iter().zip(&twice.grads) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(twice.count, 2);
        let mut merged = once.clone();
        merged.merge(&once);
        for (a, b) in once.grads.iter().zip(&merged.grads) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn zero_input_zero_update() {
        let topo = Topology::layered(2, &[3, 3], 4);
        let params = Parameters::init_uniform(&topo, 1);
        let hyper = HyperParams::default();
        let target = SpikeRecord::from_u8_rows(&[&[1; 10], &[0; 10]]).unwrap();
        for mode in [ErrorMode::ReadoutDirect, ErrorMode::RandomFeedback, ErrorMode::LocalLayer] {
            let trainer = SrmTrainer::new(SurrogateKind::default(), ErrorSignals::new(mode, &topo, 2).unwrap());
            let mut acc = UpdateAccumulator::new(&topo);
            trainer
                .train_step(&params, &topo, &hyper, &SpikeRecord::zeros(4, 10), &target, &mut acc)
                .unwrap();
            assert!(acc.grads.iter().all(|&g| g == 0.0));
        }
    }
}
