//! Experiment configuration and `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::learn::glm::HiddenCredit;
use crate::learn::srm::{ErrorMode, SurrogateKind};
use crate::params::HyperParams;
use crate::topology::{Topology, TopologySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Srm,
    Glm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Srm => "srm",
            ModelKind::Glm => "glm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "srm" => Ok(ModelKind::Srm),
            "glm" => Ok(ModelKind::Glm),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SynthSpec),
    Manifest { path: PathBuf },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => Ok(Dataset::from_synthetic(crate::data::synthesize_patterns(spec)?)),
            DatasetSource::Manifest { path } => Dataset::from_manifest(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrmSettings {
    pub surrogate: SurrogateKind,
    pub error_mode: ErrorMode,
    pub feedback_seed: u64,
    pub learn_bias: bool,
}

impl Default for SrmSettings {
    fn default() -> Self {
        Self {
            surrogate: SurrogateKind::default(),
            error_mode: ErrorMode::ReadoutDirect,
            feedback_seed: 0,
            learn_bias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmSettings {
    pub learn_bias: bool,
    pub samples_per_example: usize,
    pub hidden_credit: HiddenCredit,
    pub hidden_scale: f64,
    pub baseline: bool,
    pub baseline_decay: f64,
}

impl Default for GlmSettings {
    fn default() -> Self {
        Self {
            learn_bias: true,
            samples_per_example: 1,
            hidden_credit: HiddenCredit::SameStep,
            hidden_scale: 1.0,
            baseline: true,
            baseline_decay: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlmEvalMode {
    /// One seeded stochastic run per example.
    #[default]
    Sampled,
    /// Deterministic run spiking where `u >= 0`, scored by summed probabilities.
    ExpectedRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub glm_mode: GlmEvalMode,
    pub seed: u64,
    /// Training examples (from the start of the split) scored for train accuracy.
    pub train_subset: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            glm_mode: GlmEvalMode::Sampled,
            seed: 0,
            train_subset: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub topology: TopologySpec,
    #[serde(default)]
    pub hyper: HyperParams,
    pub dataset: DatasetSource,
    pub examples_budget: usize,
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Multiplies the default initialisation interval.
    #[serde(default = "unit")]
    pub init_gain: f64,
    /// Initial bias of every hidden neuron.
    #[serde(default)]
    pub init_hidden_bias: f64,
    /// Per-step spike probability of the target class neuron.
    #[serde(default = "unit")]
    pub target_rate: f64,
    #[serde(default)]
    pub srm: SrmSettings,
    #[serde(default)]
    pub glm: GlmSettings,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub metrics_path: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    /// Adds elapsed seconds to every metrics record; logs then differ between runs.
    #[serde(default)]
    pub log_wall_time: bool,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_lr() -> f64 {
    0.01
}

fn parse_toml_error(e: toml::de::Error) -> Error {
    let location = e.span().map_or("config".to_string(), |s| format!("byte offset {}", s.start));
    Error::parse(location, e.message())
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets the dotted `key` in `table`, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

/// Parses a TOML document into `T` after applying `key=value` overrides.
pub fn parse_with_overrides<T: DeserializeOwned>(text: &str, overrides: &[String]) -> Result<T> {
    let mut table: toml::Table = text.parse().map_err(parse_toml_error)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
}

impl ExperimentConfig {
    /// Parses a TOML document, applies `key=value` overrides and validates.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: Self = parse_with_overrides(text, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Reads a config file; relative dataset paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_with(&fs::read_to_string(path)?, overrides)?;
        if let DatasetSource::Manifest { path: m } = &mut cfg.dataset {
            if m.is_relative() {
                *m = path.parent().unwrap_or(Path::new(".")).join(&*m);
            }
        }
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.examples_budget == 0 {
            return bad("examples_budget must be positive".into());
        }
        if self.eval_every == 0 || self.eval_every > self.examples_budget {
            return bad(format!("eval_every must be in 1..={}", self.examples_budget));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be nonnegative".into());
        }
        if !(self.init_gain >= 0.0 && self.init_gain.is_finite()) {
            return bad("init_gain must be nonnegative".into());
        }
        if !self.init_hidden_bias.is_finite() {
            return bad("init_hidden_bias must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.target_rate) {
            return bad("target_rate must be a probability".into());
        }
        if !(0.0..1.0).contains(&self.glm.baseline_decay) {
            return bad("glm.baseline_decay must be in [0, 1)".into());
        }
        if !(self.glm.hidden_scale >= 0.0 && self.glm.hidden_scale.is_finite()) {
            return bad("glm.hidden_scale must be nonnegative".into());
        }
        if self.glm.samples_per_example == 0 {
            return bad("glm.samples_per_example must be positive".into());
        }
        self.hyper.validate()?;
        if let DatasetSource::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        Ok(())
    }

    /// Every file the config refers to must exist.
    pub fn check_files(&self) -> Result<()> {
        if let DatasetSource::Manifest { path } = &self.dataset {
            if !path.is_file() {
                return Err(Error::Config(format!("manifest {} not found", path.display())));
            }
        }
        Ok(())
    }

    /// Builds the topology and checks it against the dataset shape.
    pub fn topology_for(&self, ds: &Dataset) -> Result<Topology> {
        let topo = Topology::from_spec(&self.topology)?;
        check_shapes(&topo, ds)?;
        Ok(topo)
    }
}

pub fn check_shapes(topo: &Topology, ds: &Dataset) -> Result<()> {
    if topo.exogenous_count() != ds.inputs {
        return Err(Error::DimensionMismatch {
            what: "exogenous inputs",
            expected: ds.inputs,
            got: topo.exogenous_count(),
        });
    }
    if topo.visible().len() != ds.classes {
        return Err(Error::DimensionMismatch {
            what: "visible neurons (one per class)",
            expected: ds.classes,
            got: topo.visible().len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BASIC: &str = r#"
model = "srm"
examples_budget = 100
eval_every = 50
seed = 3

[topology]
kind = "layered"
visible = 2
hidden_layers = [8]
exogenous = 20

[dataset]
kind = "synthetic"
classes = 2
inputs = 20
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.model, ModelKind::Srm);
        assert_eq!(cfg.batch_size, 1);
        assert_eq!(cfg.hyper, HyperParams::default());
        assert!(!cfg.log_wall_time);
        match &cfg.dataset {
            DatasetSource::Synthetic(s) => assert_eq!(s.horizon, 50),
            other => panic!("{other:?}"),
        }
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides_reach_any_key() {
        let o = |s: &str| s.to_string();
        let cfg = ExperimentConfig::from_toml_with(
            BASIC,
            &[
                o("model=glm"),
                o("hyper.bandwidth=2.5"),
                o("dataset.jitter=0"),
                o("srm.surrogate.variant=rectifier"),
                o("topology.hidden_layers=[4, 4]"),
                o("metrics_path=out/m.jsonl"),
            ],
        )
        .unwrap();
        assert_eq!(cfg.model, ModelKind::Glm);
        assert_eq!(cfg.hyper.bandwidth, 2.5);
        assert_eq!(cfg.metrics_path.as_deref(), Some(Path::new("out/m.jsonl")));
        assert!(ExperimentConfig::from_toml_with(BASIC, &[o("bogus_key=1")]).is_err());
        assert!(ExperimentConfig::from_toml_with(BASIC, &[o("no_equals")]).is_err());
    }

    #[test]
    fn zero_budget_rejected() {
        let err = ExperimentConfig::from_toml_with(BASIC, &["examples_budget=0".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.is_validation());
    }

    #[test]
    fn missing_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        let text = BASIC.replace("kind = \"synthetic\"\nclasses = 2\ninputs = 20", "kind = \"manifest\"\npath = \"nowhere.toml\"");
        fs::write(&p, text).unwrap();
        assert!(matches!(ExperimentConfig::load(&p, &[]), Err(Error::Config(_))));
    }
}
