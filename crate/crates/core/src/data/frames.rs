//! Binning event streams into binary frames.

use serde::{Deserialize, Serialize};

use super::events::EventStream;
use crate::error::{Error, Result};
use crate::record::SpikeRecord;

pub const DEFAULT_DURATION_CAP: u32 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityMode {
    /// Channel 0 for `+1` events, channel 1 for `-1`.
    PerSign,
    /// Polarity discarded.
    Binary,
}

impl PolarityMode {
    pub fn channels(self) -> usize {
        match self {
            PolarityMode::PerSign => 2,
            PolarityMode::Binary => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub sensor_width: usize,
    pub sensor_height: usize,
    pub crop_width: usize,
    pub crop_height: usize,
    /// Microseconds per step.
    pub period: u32,
    #[serde(default = "default_cap")]
    pub duration_cap: u32,
    pub polarity: PolarityMode,
}

fn default_cap() -> u32 {
    DEFAULT_DURATION_CAP
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if self.crop_width == 0 || self.crop_height == 0 {
            return Err(Error::Dataset("crop must be nonempty".into()));
        }
        if self.crop_width > self.sensor_width || self.crop_height > self.sensor_height {
            return Err(Error::Dataset(format!(
                "crop {}x{} larger than sensor {}x{}",
                self.crop_width, self.crop_height, self.sensor_width, self.sensor_height
            )));
        }
        if self.period == 0 {
            return Err(Error::Dataset("period must be positive".into()));
        }
        Ok(())
    }

    /// Channels after flattening.
    pub fn input_count(&self) -> usize {
        self.polarity.channels() * self.crop_width * self.crop_height
    }

    /// Steps covering the whole duration cap.
    pub fn max_horizon(&self) -> usize {
        self.duration_cap.div_ceil(self.period) as usize
    }
}

/// Binary tensor `channels x height x width x horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub period: u32,
    pub horizon: usize,
    bits: Vec<bool>,
}

impl FrameSequence {
    pub fn zeros(channels: usize, height: usize, width: usize, period: u32, horizon: usize) -> Self {
        Self {
            channels,
            height,
            width,
            period,
            horizon,
            bits: vec![false; channels * height * width * horizon],
        }
    }

    fn index(&self, c: usize, y: usize, x: usize, t: usize) -> usize {
        (((c * self.height + y) * self.width + x) * self.horizon) + t
    }

    pub fn get(&self, c: usize, y: usize, x: usize, t: usize) -> bool {
        self.bits[self.index(c, y, x, t)]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, t: usize, on: bool) {
        let i = self.index(c, y, x, t);
        self.bits[i] = on;
    }

    pub fn total_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Crops the centered window, drops events at or past `duration_cap` and
/// ORs the rest into bins of `period` microseconds.
///
/// Timestamps are taken relative to the start of the recording (`t = 0`), so
/// the duration is `min(duration_cap, last + 1)` and the horizon its ceiling
/// in periods. An empty stream yields zero steps.
pub fn crop_and_bin(stream: &EventStream, spec: &BinSpec) -> Result<FrameSequence> {
    spec.validate()?;
    let x0 = (spec.sensor_width - spec.crop_width) / 2;
    let y0 = (spec.sensor_height - spec.crop_height) / 2;
    let events = stream.events();
    let horizon = events.last().map_or(0, |last| {
        let duration = (u64::from(last.t) + 1).min(u64::from(spec.duration_cap));
        duration.div_ceil(u64::from(spec.period)) as usize
    });
    let mut frames = FrameSequence::zeros(spec.polarity.channels(), spec.crop_height, spec.crop_width, spec.period, horizon);
    for e in events {
        let (x, y) = (e.x as usize, e.y as usize);
        if x < x0 || y < y0 || x >= x0 + spec.crop_width || y >= y0 + spec.crop_height {
            continue;
        }
        if e.t >= spec.duration_cap {
            continue;
        }
        let c = match spec.polarity {
            PolarityMode::PerSign if e.p < 0 => 1,
            _ => 0,
        };
        frames.set(c, y - y0, x - x0, (e.t / spec.period) as usize, true);
    }
    Ok(frames)
}

/// Exogenous channel `(c * height + y) * width + x`.
pub fn flatten(frames: &FrameSequence) -> SpikeRecord {
    let rows = frames.channels * frames.height * frames.width;
    let mut out = SpikeRecord::zeros(rows, frames.horizon);
    for r in 0..rows {
        for t in 0..frames.horizon {
            if frames.bits[r * frames.horizon + t] {
                out.set(r, t, true);
            }
        }
    }
    out
}

pub fn unflatten(record: &SpikeRecord, channels: usize, height: usize, width: usize, period: u32) -> Result<FrameSequence> {
    let rows = channels * height * width;
    if record.rows() != rows {
        return Err(Error::DimensionMismatch {
            what: "flattened frame channels",
            expected: rows,
            got: record.rows(),
        });
    }
    let mut frames = FrameSequence::zeros(channels, height, width, period, record.horizon());
    for r in 0..rows {
        for t in 0..record.horizon() {
            frames.bits[r * record.horizon() + t] = record.get(r, t);
        }
    }
    Ok(frames)
}

/// Truncates or zero-pads `record` to exactly `horizon` steps.
pub fn fit_horizon(record: &SpikeRecord, horizon: usize) -> SpikeRecord {
    let mut out = SpikeRecord::zeros(record.rows(), horizon);
    for r in 0..record.rows() {
        for t in 0..horizon.min(record.horizon()) {
            out.set(r, t, record.get(r, t));
        }
    }
    out
}
