//! Network graphs: neurons, exogenous channels, and the parent set of every
//! neuron.
//!
//! Sources share one index space: `0..neuron_count` are neurons and
//! `neuron_count..neuron_count + exogenous_count` are exogenous channels.
//! Edges are numbered by post-synaptic neuron, then by position in that
//! neuron's parent list; [`Parameters`](crate::Parameters) stores weights in
//! the same order.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pre-synaptic source: another neuron or an exogenous input channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Neuron(usize),
    Exogenous(usize),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Neuron(i) => write!(f, "n{i}"),
            Source::Exogenous(i) => write!(f, "x{i}"),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse(s, "expected a source like `n3` or `x0`");
        let (kind, idx) = s.split_at_checked(1).ok_or_else(bad)?;
        let idx: usize = idx.parse().map_err(|_| bad())?;
        match kind {
            "n" => Ok(Source::Neuron(idx)),
            "x" => Ok(Source::Exogenous(idx)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Source {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Source {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Declarative graph description, as found in experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Every neuron receives every exogenous channel and every other neuron.
    FullyConnected {
        visible: usize,
        hidden: usize,
        exogenous: usize,
        /// When false, visible neurons have no outgoing edges and act as a
        /// pure read-out.
        #[serde(default = "yes")]
        readout_feedback: bool,
    },
    /// Exogenous inputs feed the first hidden layer, each hidden layer feeds
    /// the next, and the last one feeds the visible read-out layer.
    Layered {
        visible: usize,
        hidden_layers: Vec<usize>,
        exogenous: usize,
    },
    Explicit {
        neurons: usize,
        visible: Vec<usize>,
        hidden: Vec<usize>,
        exogenous: usize,
        /// `(source, post-synaptic neuron)` pairs.
        edges: Vec<(Source, usize)>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Visible(usize),
    Hidden(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    neuron_count: usize,
    exogenous_count: usize,
    visible: Vec<usize>,
    hidden: Vec<usize>,
    roles: Vec<Role>,
    parents: Vec<Vec<usize>>,
    edge_offsets: Vec<usize>,
    layers: Option<Vec<Vec<usize>>>,
}

impl Topology {
    /// Validates and builds a topology.
    ///
    /// `parents[i]` lists flat source indices for neuron `i`.
    pub fn new(
        neuron_count: usize,
        exogenous_count: usize,
        visible: Vec<usize>,
        hidden: Vec<usize>,
        parents: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if parents.len() != neuron_count {
            return Err(Error::DimensionMismatch {
                what: "parent lists",
                expected: neuron_count,
                got: parents.len(),
            });
        }
        let mut roles: Vec<Option<Role>> = vec![None; neuron_count];
        for (pos, &i) in visible.iter().enumerate() {
            let slot = roles.get_mut(i).ok_or(Error::UnknownNeuron(i))?;
            if slot.is_some() {
                return Err(Error::PartitionOverlap(i));
            }
            *slot = Some(Role::Visible(pos));
        }
        for (pos, &i) in hidden.iter().enumerate() {
            let slot = roles.get_mut(i).ok_or(Error::UnknownNeuron(i))?;
            if slot.is_some() {
                return Err(Error::PartitionOverlap(i));
            }
            *slot = Some(Role::Hidden(pos));
        }
        let roles = roles
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or(Error::PartitionIncomplete(i)))
            .collect::<Result<Vec<_>>>()?;

        let source_count = neuron_count + exogenous_count;
        let mut edge_offsets = Vec::with_capacity(neuron_count + 1);
        edge_offsets.push(0);
        for (dst, ps) in parents.iter().enumerate() {
            let mut seen = HashSet::with_capacity(ps.len());
            for &src in ps {
                if src == dst {
                    return Err(Error::SelfLoop(dst));
                }
                if src >= source_count {
                    return Err(Error::DanglingEdge { src, dst });
                }
                if !seen.insert(src) {
                    return Err(Error::DuplicateEdge { src, dst });
                }
            }
            edge_offsets.push(edge_offsets[dst] + ps.len());
        }

        Ok(Self {
            neuron_count,
            exogenous_count,
            visible,
            hidden,
            roles,
            parents,
            edge_offsets,
            layers: None,
        })
    }

    pub fn from_spec(spec: &TopologySpec) -> Result<Self> {
        match spec {
            TopologySpec::FullyConnected {
                visible,
                hidden,
                exogenous,
                readout_feedback: true,
            } => Ok(Self::fully_connected(*visible, *hidden, *exogenous)),
            TopologySpec::FullyConnected {
                visible,
                hidden,
                exogenous,
                readout_feedback: false,
            } => Ok(Self::fully_connected_readout(*visible, *hidden, *exogenous)),
            TopologySpec::Layered {
                visible,
                hidden_layers,
                exogenous,
            } => Ok(Self::layered(*visible, hidden_layers, *exogenous)),
            TopologySpec::Explicit {
                neurons,
                visible,
                hidden,
                exogenous,
                edges,
            } => {
                let mut parents = vec![Vec::new(); *neurons];
                for &(src, dst) in edges {
                    let flat = match src {
                        Source::Neuron(j) => j,
                        Source::Exogenous(k) if k < *exogenous => neurons + k,
                        Source::Exogenous(k) => {
                            return Err(Error::DanglingEdge {
                                src: neurons + k,
                                dst,
                            })
                        }
                    };
                    let slot = parents.get_mut(dst).ok_or(Error::DanglingEdge {
                        src: flat,
                        dst,
                    })?;
                    slot.push(flat);
                }
                Self::new(*neurons, *exogenous, visible.clone(), hidden.clone(), parents)
            }
        }
    }

    /// Neurons `0..visible` are visible, the rest hidden.
    pub fn fully_connected(visible: usize, hidden: usize, exogenous: usize) -> Self {
        let n = visible + hidden;
        let parents = (0..n)
            .map(|i| (n..n + exogenous).chain((0..n).filter(|&j| j != i)).collect())
            .collect();
        Self::new(n, exogenous, (0..visible).collect(), (visible..n).collect(), parents)
            .expect("fully connected generator yields a valid graph")
    }

    /// Like [`Self::fully_connected`] without edges leaving visible neurons.
    pub fn fully_connected_readout(visible: usize, hidden: usize, exogenous: usize) -> Self {
        let n = visible + hidden;
        let parents = (0..n)
            .map(|i| (n..n + exogenous).chain((visible..n).filter(|&j| j != i)).collect())
            .collect();
        Self::new(n, exogenous, (0..visible).collect(), (visible..n).collect(), parents)
            .expect("fully connected generator yields a valid graph")
    }

    /// Neurons `0..visible` form the read-out layer; hidden layers follow in
    /// order.
    pub fn layered(visible: usize, hidden_layers: &[usize], exogenous: usize) -> Self {
        let n = visible + hidden_layers.iter().sum::<usize>();
        let mut parents = vec![Vec::new(); n];
        let mut layers = Vec::with_capacity(hidden_layers.len());
        let mut prev: Vec<usize> = (n..n + exogenous).collect();
        let mut next = visible;
        for &size in hidden_layers {
            let layer: Vec<usize> = (next..next + size).collect();
            for &i in &layer {
                parents[i] = prev.clone();
            }
            next += size;
            prev = layer.clone();
            layers.push(layer);
        }
        for p in parents.iter_mut().take(visible) {
            *p = prev.clone();
        }
        let mut topo =
            Self::new(n, exogenous, (0..visible).collect(), (visible..n).collect(), parents)
                .expect("layered generator yields a valid graph");
        topo.layers = Some(layers);
        topo
    }

    pub fn neuron_count(&self) -> usize {
        self.neuron_count
    }

    pub fn exogenous_count(&self) -> usize {
        self.exogenous_count
    }

    /// Neurons plus exogenous channels.
    pub fn source_count(&self) -> usize {
        self.neuron_count + self.exogenous_count
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn is_visible(&self, neuron: usize) -> bool {
        matches!(self.roles[neuron], Role::Visible(_))
    }

    /// Position of `neuron` within the visible set.
    pub fn visible_position(&self, neuron: usize) -> Option<usize> {
        match self.roles.get(neuron)? {
            Role::Visible(p) => Some(*p),
            Role::Hidden(_) => None,
        }
    }

    /// Position of `neuron` within the hidden set.
    pub fn hidden_position(&self, neuron: usize) -> Option<usize> {
        match self.roles.get(neuron)? {
            Role::Hidden(p) => Some(*p),
            Role::Visible(_) => None,
        }
    }

    /// Flat source indices of the parents of `neuron`.
    pub fn parents(&self, neuron: usize) -> &[usize] {
        &self.parents[neuron]
    }

    /// Edge indices whose post-synaptic neuron is `neuron`.
    pub fn edge_range(&self, neuron: usize) -> Range<usize> {
        self.edge_offsets[neuron]..self.edge_offsets[neuron + 1]
    }

    pub fn edge_count(&self) -> usize {
        self.edge_offsets[self.neuron_count]
    }

    /// `(source, post-synaptic neuron)` for every edge, in edge order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(dst, ps)| ps.iter().map(move |&src| (src, dst)))
    }

    pub fn source(&self, flat: usize) -> Source {
        if flat < self.neuron_count {
            Source::Neuron(flat)
        } else {
            Source::Exogenous(flat - self.neuron_count)
        }
    }

    pub fn flat_source(&self, source: Source) -> Option<usize> {
        match source {
            Source::Neuron(i) if i < self.neuron_count => Some(i),
            Source::Exogenous(k) if k < self.exogenous_count => Some(self.neuron_count + k),
            _ => None,
        }
    }

    /// Hidden layers in feed-forward order, when built by the layered generator.
    pub fn layers(&self) -> Option<&[Vec<usize>]> {
        self.layers.as_deref()
    }

    pub fn mean_in_degree(&self) -> f64 {
        if self.neuron_count == 0 {
            return 0.0;
        }
        self.edge_count() as f64 / self.neuron_count as f64
    }

    /// Declarative description that rebuilds this exact topology.
    pub fn to_spec(&self) -> TopologySpec {
        TopologySpec::Explicit {
            neurons: self.neuron_count,
            visible: self.visible.clone(),
            hidden: self.hidden.clone(),
            exogenous: self.exogenous_count,
            edges: self.edges().map(|(s, d)| (self.source(s), d)).collect(),
        }
    }

    pub(crate) fn set_layers(&mut self, layers: Option<Vec<Vec<usize>>>) {
        self.layers = layers;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fully_connected_four_visible_five_hidden() {
        let topo = Topology::from_spec(&TopologySpec::FullyConnected {
            visible: 4,
            hidden: 5,
            exogenous: 3,
            readout_feedback: true,
        })
        .unwrap();
        assert_eq!(topo.visible().len(), 4);
        assert_eq!(topo.hidden().len(), 5);
        assert_eq!(topo.neuron_count(), 9);
        // 3 exogenous + 8 other neurons each
        assert_eq!(topo.edge_count(), 9 * 11);
        for i in 0..9 {
            assert!(!topo.parents(i).contains(&i));
        }
    }

    #[test]
    fn readout_without_feedback() {
        let topo = Topology::fully_connected_readout(2, 3, 1);
        for i in 0..5 {
            assert!(topo.parents(i).iter().all(|&j| j >= 2), "{:?}", topo.parents(i));
        }
        assert_eq!(topo.edge_count(), 2 * 4 + 3 * 3);
        let spec: TopologySpec =
            toml::from_str("kind = \"fully_connected\"\nvisible = 2\nhidden = 3\nexogenous = 1\nreadout_feedback = false").unwrap();
        assert_eq!(Topology::from_spec(&spec).unwrap(), topo);
    }

    #[test]
    fn single_neuron_no_edges() {
        let topo = Topology::from_spec(&TopologySpec::Explicit {
            neurons: 1,
            visible: vec![0],
            hidden: vec![],
            exogenous: 0,
            edges: vec![],
        })
        .unwrap();
        assert_eq!(topo.edge_count(), 0);
        assert!(topo.parents(0).is_empty());
    }

    fn explicit(visible: Vec<usize>, hidden: Vec<usize>, edges: Vec<(Source, usize)>) -> Result<Topology> {
        Topology::from_spec(&TopologySpec::Explicit {
            neurons: 4,
            visible,
            hidden,
            exogenous: 1,
            edges,
        })
    }

    #[test]
    fn self_loop_rejected() {
        let err = explicit(vec![0, 1], vec![2, 3], vec![(Source::Neuron(3), 3)]).unwrap_err();
        assert!(matches!(err, Error::SelfLoop(3)));
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(
            explicit(vec![0, 1], vec![1, 2, 3], vec![]).unwrap_err(),
            Error::PartitionOverlap(1)
        ));
        assert!(matches!(
            explicit(vec![0], vec![2, 3], vec![]).unwrap_err(),
            Error::PartitionIncomplete(1)
        ));
    }

    #[test]
    fn dangling_and_duplicate_edges_rejected() {
        assert!(matches!(
            explicit(vec![0, 1], vec![2, 3], vec![(Source::Exogenous(1), 0)]).unwrap_err(),
            Error::DanglingEdge { .. }
        ));
        assert!(matches!(
            explicit(vec![0, 1], vec![2, 3], vec![(Source::Neuron(7), 0)]).unwrap_err(),
            Error::DanglingEdge { .. }
        ));
        assert!(matches!(
            explicit(vec![0, 1], vec![2, 3], vec![(Source::Neuron(0), 9)]).unwrap_err(),
            Error::DanglingEdge { .. }
        ));
        assert!(matches!(
            explicit(
                vec![0, 1],
                vec![2, 3],
                vec![(Source::Neuron(2), 0), (Source::Neuron(2), 0)]
            )
            .unwrap_err(),
            Error::DuplicateEdge { src: 2, dst: 0 }
        ));
    }

    #[test]
    fn layered_wiring() {
        let topo = Topology::layered(2, &[3, 3], 4);
        assert_eq!(topo.neuron_count(), 8);
        let layers = topo.layers().unwrap();
        assert_eq!(layers, &[vec![2, 3, 4], vec![5, 6, 7]]);
        assert_eq!(topo.parents(2), &[8, 9, 10, 11]);
        assert_eq!(topo.parents(5), &[2, 3, 4]);
        assert_eq!(topo.parents(0), &[5, 6, 7]);
        assert_eq!(topo.edge_count(), 3 * 4 + 3 * 3 + 2 * 3);
    }

    #[test]
    fn spec_round_trip() {
        let topo = Topology::fully_connected(2, 2, 2);
        let rebuilt = Topology::from_spec(&topo.to_spec()).unwrap();
        assert_eq!(topo, rebuilt);
    }

    #[test]
    fn source_labels() {
        assert_eq!("x12".parse::<Source>().unwrap(), Source::Exogenous(12));
        assert_eq!(Source::Neuron(3).to_string(), "n3");
        assert!("y1".parse::<Source>().is_err());
        assert!("n".parse::<Source>().is_err());
    }
}
