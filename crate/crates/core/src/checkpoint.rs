//! Flat `key = value` checkpoint documents.
//!
//! ```text
//! format = spikenet-checkpoint/1
//! meta.model = glm
//! neurons = 3
//! exogenous = 2
//! visible = 0,1
//! hidden = 2
//! layers = 2
//! hyper.tau_mem = 20.0
//! ...
//! bias.0 = -0.25
//! w.0.x1 = 0.1
//! w.2.n0 = -1e-7
//! ```
//!
//! Reals are written in the shortest form that parses back to the same
//! `f64`. Weight lines appear in edge order and define the graph; `layers`
//! separates layers with `;` and is empty for non-layered graphs. Blank
//! lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::{HyperParams, Parameters};
use crate::topology::{Source, Topology};

pub const FORMAT_TAG: &str = "spikenet-checkpoint/1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub topology: Topology,
    pub hyper: HyperParams,
    pub params: Parameters,
    /// Free-form string annotations (`meta.<key>`).
    pub meta: BTreeMap<String, String>,
}

fn take_field<'a>(fields: &mut BTreeMap<&'a str, (&'a str, usize)>, key: &str, end: usize) -> Result<(&'a str, usize)> {
    fields
        .remove(key)
        .ok_or_else(|| Error::parse(format!("byte offset {end}"), format!("missing key `{key}`")))
}

fn join(ids: &[usize]) -> String {
    ids.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl Checkpoint {
    pub fn new(topology: Topology, hyper: HyperParams, params: Parameters) -> Result<Self> {
        params.check(&topology)?;
        Ok(Self {
            topology,
            hyper,
            params,
            meta: BTreeMap::new(),
        })
    }

    pub fn to_text(&self) -> String {
        let topo = &self.topology;
        let mut out = String::new();
        let _ = writeln!(out, "format = {FORMAT_TAG}");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta.{k} = {v}");
        }
        let _ = writeln!(out, "neurons = {}", topo.neuron_count());
        let _ = writeln!(out, "exogenous = {}", topo.exogenous_count());
        let _ = writeln!(out, "visible = {}", join(topo.visible()));
        let _ = writeln!(out, "hidden = {}", join(topo.hidden()));
        let layers = topo
            .layers()
            .map(|ls| ls.iter().map(|l| join(l)).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        let _ = writeln!(out, "layers = {layers}");
        let h = &self.hyper;
        for (k, v) in [
            ("tau_mem", h.tau_mem),
            ("tau_syn", h.tau_syn),
            ("tau_ref", h.tau_ref),
            ("threshold", h.threshold),
            ("bandwidth", h.bandwidth),
        ] {
            let _ = writeln!(out, "hyper.{k} = {v:?}");
        }
        for (i, b) in self.params.biases.iter().enumerate() {
            let _ = writeln!(out, "bias.{i} = {b:?}");
        }
        for ((src, dst), w) in topo.edges().zip(&self.params.weights) {
            let _ = writeln!(out, "w.{dst}.{} = {w:?}", topo.source(src));
        }
        out
    }

    pub fn from_text<'a>(text: &'a str) -> Result<Self> {
        let mut fields: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
        let mut meta = BTreeMap::new();
        let mut biases: BTreeMap<usize, f64> = BTreeMap::new();
        let mut edges: Vec<(usize, Source, f64, usize)> = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len();
            let body = line.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(format!("byte offset {at}"), m);
            let (key, value) = body.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let real = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad real `{v}`")));
            if let Some(k) = key.strip_prefix("meta.") {
                meta.insert(k.to_string(), value.to_string());
            } else if let Some(i) = key.strip_prefix("bias.") {
                let i: usize = i.parse().map_err(|_| err(format!("bad bias key `{key}`")))?;
                if biases.insert(i, real(value)?).is_some() {
                    return Err(err(format!("duplicate key `{key}`")));
                }
            } else if let Some(rest) = key.strip_prefix("w.") {
                let (dst, src) = rest.split_once('.').ok_or_else(|| err(format!("bad weight key `{key}`")))?;
                let dst: usize = dst.parse().map_err(|_| err(format!("bad weight key `{key}`")))?;
                let src: Source = src.parse().map_err(|_| err(format!("bad weight key `{key}`")))?;
                edges.push((dst, src, real(value)?, at));
            } else if fields.insert(key, (value, at)).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        let end = text.len();
        let take = |fields: &mut BTreeMap<&'a str, (&'a str, usize)>, key: &str| take_field(fields, key, end);
        let (format, at) = take(&mut fields, "format")?;
        if format != FORMAT_TAG {
            return Err(Error::parse(format!("byte offset {at}"), format!("unsupported format `{format}`")));
        }
        let count = |(v, at): (&str, usize)| {
            v.parse::<usize>()
                .map_err(|_| Error::parse(format!("byte offset {at}"), format!("bad count `{v}`")))
        };
        let list = |(v, at): (&str, usize)| -> Result<Vec<usize>> {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::parse(format!("byte offset {at}"), format!("bad index `{s}`"))))
                .collect()
        };
        let neurons = count(take(&mut fields, "neurons")?)?;
        let exogenous = count(take(&mut fields, "exogenous")?)?;
        let visible = list(take(&mut fields, "visible")?)?;
        let hidden = list(take(&mut fields, "hidden")?)?;
        let (layers_raw, layers_at) = take(&mut fields, "layers")?;
        let layers = if layers_raw.is_empty() {
            None
        } else {
            Some(layers_raw.split(';').map(|l| list((l, layers_at))).collect::<Result<Vec<_>>>()?)
        };
        let mut hyper = HyperParams::default();
        for (k, slot) in [
            ("hyper.tau_mem", &mut hyper.tau_mem),
            ("hyper.tau_syn", &mut hyper.tau_syn),
            ("hyper.tau_ref", &mut hyper.tau_ref),
            ("hyper.threshold", &mut hyper.threshold),
            ("hyper.bandwidth", &mut hyper.bandwidth),
        ] {
            let (v, at) = take(&mut fields, k)?;
            *slot = v
                .parse()
                .map_err(|_| Error::parse(format!("byte offset {at}"), format!("bad real `{v}`")))?;
        }
        if let Some((k, (_, at))) = fields.into_iter().next() {
            return Err(Error::parse(format!("byte offset {at}"), format!("unknown key `{k}`")));
        }

        let mut parents = vec![Vec::new(); neurons];
        let mut weights_by_dst: Vec<Vec<f64>> = vec![Vec::new(); neurons];
        for &(dst, src, w, at) in &edges {
            let flat = match src {
                Source::Neuron(i) if i < neurons => i,
                Source::Exogenous(k) if k < exogenous => neurons + k,
                _ => return Err(Error::parse(format!("byte offset {at}"), format!("unknown source `{src}`"))),
            };
            if dst >= neurons {
                return Err(Error::parse(format!("byte offset {at}"), format!("unknown neuron {dst}")));
            }
            parents[dst].push(flat);
            weights_by_dst[dst].push(w);
        }
        let mut topology = Topology::new(neurons, exogenous, visible, hidden, parents)?;
        topology.set_layers(layers);
        if biases.len() != neurons || biases.keys().enumerate().any(|(k, &i)| k != i) {
            return Err(Error::parse(format!("byte offset {end}"), "need exactly one bias per neuron"));
        }
        let params = Parameters {
            weights: weights_by_dst.into_iter().flatten().collect(),
            biases: biases.into_values().collect(),
        };
        Ok(Self {
            topology,
            hyper,
            params,
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(seed: u64) -> Checkpoint {
        let topo = Topology::layered(2, &[3, 2], 4);
        let params = Parameters::init_uniform(&topo, seed);
        let mut c = Checkpoint::new(topo, HyperParams::default(), params).unwrap();
        c.meta.insert("model".into(), "srm".into());
        c
    }

    #[test]
    fn round_trip_is_exact() {
        let mut c = sample(1);
        c.params.weights[0] = 0.1 + 0.2;
        c.params.weights[1] = -1e-300;
        c.params.biases[0] = 123456.789e10;
        let back = Checkpoint::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), c.to_text());
    }

    #[test]
    fn fully_connected_has_no_layers() {
        let topo = Topology::fully_connected(2, 1, 1);
        let c = Checkpoint::new(topo.clone(), HyperParams::default(), Parameters::zeros(&topo)).unwrap();
        let text = c.to_text();
        assert!(text.contains("layers = \n"));
        assert_eq!(Checkpoint::from_text(&text).unwrap().topology, topo);
    }

    #[test]
    fn errors_report_byte_offset() {
        let text = sample(2).to_text();
        let cut = text.find("hyper.tau_syn").unwrap();
        let bad = format!("{}hyper.tau_syn = abc\n{}", &text[..cut], &text[cut..].split_once('\n').unwrap().1);
        let err = Checkpoint::from_text(&bad).unwrap_err();
        assert!(err.to_string().contains(&format!("byte offset {cut}")), "{err}");
        let garbage = format!("{}???\n", &text[..cut]);
        assert!(Checkpoint::from_text(&garbage).unwrap_err().to_string().contains(&format!("byte offset {cut}")));
        assert!(Checkpoint::from_text("format = other\n").is_err());
        assert!(Checkpoint::from_text(&format!("{text}surprise = 1\n")).is_err());
    }

    proptest! {
        #[test]
        fn any_reals_round_trip(ws in proptest::collection::vec(any::<f64>().prop_filter("finite", |w| w.is_finite()), 22)) {
            let mut c = sample(0);
            let n = c.params.weights.len();
            c.params.weights.copy_from_slice(&ws[..n]);
            c.params.biases.copy_from_slice(&ws[ws.len() - 7..]);
            let back = Checkpoint::from_text(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
