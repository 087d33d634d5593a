//! Event-stream ingestion, binning, synthetic data and dataset manifests.

pub mod events;
pub mod frames;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::SpikeRecord;
pub use events::{load_events, Event, EventFormat, EventStream};
pub use frames::{crop_and_bin, fit_horizon, flatten, unflatten, BinSpec, FrameSequence, PolarityMode};
pub use synth::{synthesize_patterns, ChannelLayout, SynthSpec, SyntheticDataset};

/// One labelled input: exogenous spikes, one row per input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: SpikeRecord,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub class_count: usize,
    #[serde(default)]
    pub seed: u64,
    pub binning: BinSpec,
    #[serde(default)]
    pub examples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(Error::Dataset("class_count must be positive".into()));
        }
        self.binning.validate()?;
        for e in &self.examples {
            if e.label >= self.class_count {
                return Err(Error::Dataset(format!(
                    "{}: label {} outside [0, {})",
                    e.path.display(),
                    e.label,
                    self.class_count
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| {
            let location = e.span().map_or("manifest".to_string(), |s| format!("byte offset {}", s.start));
            Error::parse(location, e.message())
        })?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest fields are always representable")
    }

    /// Reads and validates a manifest; every referenced file must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m = Self::from_toml(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for e in &m.examples {
            let p = base.join(&e.path);
            if !p.is_file() {
                return Err(Error::Dataset(format!("missing event file {}", p.display())));
            }
        }
        Ok(m)
    }
}

/// In-memory dataset with a fixed input count and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: usize,
    pub classes: usize,
    pub horizon: usize,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    /// Loads every event file of the manifest and bins it; inputs are
    /// padded or truncated to the horizon of the full duration cap.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m = DatasetManifest::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let horizon = m.binning.max_horizon();
        let mut ds = Dataset {
            inputs: m.binning.input_count(),
            classes: m.class_count,
            horizon,
            train: Vec::new(),
            test: Vec::new(),
        };
        for e in &m.examples {
            let stream = load_events(base.join(&e.path))?;
            let input = fit_horizon(&flatten(&crop_and_bin(&stream, &m.binning)?), horizon);
            let ex = Example { input, label: e.label };
            match e.split {
                Split::Train => ds.train.push(ex),
                Split::Test => ds.test.push(ex),
            }
        }
        Ok(ds)
    }

    pub fn from_synthetic(s: SyntheticDataset) -> Self {
        Dataset {
            inputs: s.spec.inputs,
            classes: s.spec.classes,
            horizon: s.spec.horizon,
            train: s.train,
            test: s.test,
        }
    }

    /// Same data re-binned `factor` times coarser in time (OR within bins).
    pub fn coarsen(&self, factor: usize) -> Self {
        let map = |v: &[Example]| {
            v.iter()
                .map(|e| Example {
                    input: e.input.coarsen(factor),
                    label: e.label,
                })
                .collect()
        };
        Dataset {
            inputs: self.inputs,
            classes: self.classes,
            horizon: self.horizon.div_ceil(factor),
            train: map(&self.train),
            test: map(&self.test),
        }
    }
}

/// Event stream for one input record: channel `c` becomes pixel `(c, 0)`,
/// step `t` (zero-based column) becomes timestamp `t` with polarity `+1`.
pub fn record_to_events(record: &SpikeRecord) -> EventStream {
    let mut events = Vec::with_capacity(record.total_spikes());
    for t in 0..record.horizon() {
        for c in 0..record.rows() {
            if record.get(c, t) {
                events.push(Event::new(t as u32, c as u16, 0, 1));
            }
        }
    }
    EventStream::new(events).expect("events are generated in time order")
}

/// Writes every example as an event file under `dir` and a `manifest.toml`
/// that bins them back into the same records. Returns the manifest path.
pub fn write_synthetic(ds: &SyntheticDataset, dir: impl AsRef<Path>, format: EventFormat) -> Result<PathBuf> {
    let dir = dir.as_ref();
    if ds.spec.inputs > usize::from(u16::MAX) + 1 {
        return Err(Error::Dataset("too many channels for the event format".into()));
    }
    fs::create_dir_all(dir.join("train"))?;
    fs::create_dir_all(dir.join("test"))?;
    let ext = match format {
        EventFormat::Text => "txt",
        EventFormat::Binary => "bin",
    };
    let mut examples = Vec::with_capacity(ds.train.len() + ds.test.len());
    for (split, name, list) in [(Split::Train, "train", &ds.train), (Split::Test, "test", &ds.test)] {
        for (k, ex) in list.iter().enumerate() {
            let rel = PathBuf::from(name).join(format!("{k:06}.{ext}"));
            record_to_events(&ex.input).save(dir.join(&rel), format)?;
            examples.push(ManifestEntry {
                path: rel,
                label: ex.label,
                split,
            });
        }
    }
    let manifest = DatasetManifest {
        class_count: ds.spec.classes,
        seed: ds.spec.seed,
        binning: BinSpec {
            sensor_width: ds.spec.inputs,
            sensor_height: 1,
            crop_width: ds.spec.inputs,
            crop_height: 1,
            period: 1,
            duration_cap: ds.spec.horizon as u32,
            polarity: PolarityMode::Binary,
        },
        examples,
    };
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest.to_toml())?;
    Ok(path)
}
