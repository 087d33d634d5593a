use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Filter time constants (in steps), firing threshold and GLM bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub tau_mem: f64,
    pub tau_syn: f64,
    pub tau_ref: f64,
    pub threshold: f64,
    pub bandwidth: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            tau_mem: 20.0,
            tau_syn: 5.0,
            tau_ref: 10.0,
            threshold: 1.0,
            bandwidth: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        for (name, tau) in [
            ("tau_mem", self.tau_mem),
            ("tau_syn", self.tau_syn),
            ("tau_ref", self.tau_ref),
        ] {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidHyper(format!("{name} must be positive, got {tau}")));
            }
        }
        if !self.threshold.is_finite() {
            return Err(Error::InvalidHyper("threshold must be finite".into()));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::InvalidBandwidth(self.bandwidth));
        }
        Ok(())
    }

    pub fn mem_decay(&self) -> f64 {
        (-1.0 / self.tau_mem).exp()
    }

    pub fn syn_decay(&self) -> f64 {
        (-1.0 / self.tau_syn).exp()
    }

    pub fn ref_decay(&self) -> f64 {
        (-1.0 / self.tau_ref).exp()
    }
}

/// Synaptic weights in edge order (see [`Topology`]) and per-neuron biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Parameters {
    pub fn zeros(topology: &Topology) -> Self {
        Self {
            weights: vec![0.0; topology.edge_count()],
            biases: vec![0.0; topology.neuron_count()],
        }
    }

    /// Half-width of the initialisation interval: `1 / sqrt(mean in-degree)`.
    pub fn init_scale(topology: &Topology) -> f64 {
        let degree = topology.mean_in_degree();
        if degree > 0.0 {
            1.0 / degree.sqrt()
        } else {
            1.0
        }
    }

    /// Weights uniform in `[-c, c]` with `c` from [`Self::init_scale`], zero biases.
    pub fn init_uniform(topology: &Topology, seed: u64) -> Self {
        let c = Self::init_scale(topology);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..topology.edge_count())
            .map(|_| rng.random_range(-c..=c))
            .collect();
        Self {
            weights,
            biases: vec![0.0; topology.neuron_count()],
        }
    }

    pub fn check(&self, topology: &Topology) -> Result<()> {
        if self.weights.len() != topology.edge_count() {
            return Err(Error::DimensionMismatch {
                what: "weights",
                expected: topology.edge_count(),
                got: self.weights.len(),
            });
        }
        if self.biases.len() != topology.neuron_count() {
            return Err(Error::DimensionMismatch {
                what: "biases",
                expected: topology.neuron_count(),
                got: self.biases.len(),
            });
        }
        if let Some(w) = self.weights.iter().chain(&self.biases).find(|w| !w.is_finite()) {
            return Err(Error::InvalidHyper(format!("non-finite parameter {w}")));
        }
        Ok(())
    }

    /// Weight of the edge `src -> dst`, if it exists.
    pub fn weight(&self, topology: &Topology, src: usize, dst: usize) -> Option<f64> {
        let pos = topology.parents(dst).iter().position(|&s| s == src)?;
        Some(self.weights[topology.edge_range(dst).start + pos])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_decays_in_unit_interval() {
        let h = HyperParams::default();
        h.validate().unwrap();
        for d in [h.mem_decay(), h.syn_decay(), h.ref_decay()] {
            assert!(d > 0.0 && d < 1.0);
        }
    }

    #[test]
    fn invalid_hyper_rejected() {
        let h = HyperParams {
            tau_syn: 0.0,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        let h = HyperParams {
            bandwidth: -1.0,
            ..Default::default()
        };
        assert!(matches!(h.validate(), Err(Error::InvalidBandwidth(_))));
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let topo = Topology::fully_connected(2, 3, 4);
        let c = Parameters::init_scale(&topo);
        let p = Parameters::init_uniform(&topo, 7);
        assert!(p.weights.iter().all(|w| w.abs() <= c));
        assert_eq!(p, Parameters::init_uniform(&topo, 7));
        assert_ne!(p, Parameters::init_uniform(&topo, 8));
        p.check(&topo).unwrap();
    }

    #[test]
    fn weight_lookup() {
        let topo = Topology::layered(1, &[2], 1);
        let mut p = Parameters::zeros(&topo);
        p.weights[topo.edge_range(0).start + 1] = 0.5;
        assert_eq!(p.weight(&topo, 2, 0), Some(0.5));
        assert_eq!(p.weight(&topo, 3, 0), None);
    }
}
