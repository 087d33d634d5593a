//! Gradient accumulation and SGD updates shared by both trainers.
//!
//! Accumulators hold gradients of the training loss: applying them moves
//! parameters against the accumulated values.

pub mod glm;
pub mod srm;

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateAccumulator {
    /// One entry per edge, in edge order.
    pub grads: Vec<f64>,
    pub bias_grads: Vec<f64>,
    /// Examples accumulated since the last update.
    pub count: usize,
}

impl UpdateAccumulator {
    pub fn new(topology: &Topology) -> Self {
        Self {
            grads: vec![0.0; topology.edge_count()],
            bias_grads: vec![0.0; topology.neuron_count()],
            count: 0,
        }
    }

    pub fn reset(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
        self.bias_grads.iter_mut().for_each(|g| *g = 0.0);
        self.count = 0;
    }

    /// Adds another worker's accumulator.
    pub fn merge(&mut self, other: &UpdateAccumulator) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += b;
        }
        for (a, b) in self.bias_grads.iter_mut().zip(&other.bias_grads) {
            *a += b;
        }
        self.count += other.count;
    }

    pub fn is_zero(&self) -> bool {
        self.grads.iter().chain(&self.bias_grads).all(|&g| g == 0.0)
    }
}

/// Mini-batch SGD step `w <- w - lr * grad / batch_size`, then clears `acc`.
pub fn apply_updates(
    params: &mut Parameters,
    acc: &mut UpdateAccumulator,
    learning_rate: f64,
    batch_size: usize,
) -> Result<()> {
    if batch_size == 0 || acc.count != batch_size {
        return Err(Error::CountMismatch {
            held: acc.count,
            batch: batch_size,
        });
    }
    if !(learning_rate >= 0.0) {
        return Err(Error::Config(format!("learning rate must be nonnegative, got {learning_rate}")));
    }
    let scale = learning_rate / batch_size as f64;
    for (w, g) in params.weights.iter_mut().zip(&acc.grads) {
        *w -= scale * g;
    }
    for (b, g) in params.biases.iter_mut().zip(&acc.bias_grads) {
        *b -= scale * g;
    }
    acc.reset();
    Ok(())
}
