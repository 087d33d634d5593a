//! Discrete-time spiking neural networks with deterministic (threshold) and
//! probabilistic (sigmoid-Bernoulli) neurons, local training rules for both,
//! spike encoders, event-stream ingestion and an experiment harness.

pub mod checkpoint;
pub mod data;
pub mod encoding;
pub mod error;
pub mod glm;
pub mod harness;
pub mod learn;
pub mod network;
pub mod params;
pub mod record;
pub mod topology;

pub use error::{Error, Result};
pub use network::{run_trajectory, NetworkState, Simulator, SpikingMode, Trajectory};
pub use params::{HyperParams, Parameters};
pub use record::SpikeRecord;
pub use topology::{Source, Topology, TopologySpec};
