//! Spike encoders for real values in `[0, 1]` and the spike-count read-out.
//!
//! Spike steps are 1-based in the formulas below; step `k` lands in column
//! `k - 1` of the returned trains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::SpikeRecord;

/// Receptive fields with activation below this emit no spike.
pub const RECEPTIVE_CUTOFF: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rate,
    Time,
    PopulationRate,
    PopulationTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub scheme: Scheme,
    pub window: usize,
    pub neurons_per_value: usize,
    /// Spike probability per step at value 1 (rate schemes).
    pub max_rate: f64,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub deterministic: bool,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rate,
            window: 10,
            neurons_per_value: 1,
            max_rate: 1.0,
            centers: Vec::new(),
            widths: Vec::new(),
            deterministic: true,
        }
    }
}

impl EncoderSpec {
    pub fn rate(window: usize, max_rate: f64, deterministic: bool) -> Self {
        Self {
            scheme: Scheme::Rate,
            window,
            max_rate,
            deterministic,
            ..Default::default()
        }
    }

    pub fn time(window: usize) -> Self {
        Self {
            scheme: Scheme::Time,
            window,
            ..Default::default()
        }
    }

    pub fn population_rate(window: usize, neurons: usize, max_rate: f64) -> Self {
        Self {
            scheme: Scheme::PopulationRate,
            window,
            neurons_per_value: neurons,
            max_rate,
            deterministic: false,
            ..Default::default()
        }
    }

    pub fn population_time(window: usize, centers: Vec<f64>, widths: Vec<f64>) -> Self {
        Self {
            scheme: Scheme::PopulationTime,
            window,
            neurons_per_value: centers.len(),
            centers,
            widths,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidEncoder(m.to_string()));
        if self.window == 0 {
            return bad("window must be positive");
        }
        if !(0.0..=1.0).contains(&self.max_rate) {
            return bad("max_rate must be a probability");
        }
        match self.scheme {
            Scheme::Rate | Scheme::Time => {}
            Scheme::PopulationRate => {
                if self.neurons_per_value < 2 {
                    return bad("population schemes need at least 2 neurons per value");
                }
            }
            Scheme::PopulationTime => {
                if self.neurons_per_value < 2 {
                    return bad("population schemes need at least 2 neurons per value");
                }
                if self.centers.len() != self.neurons_per_value || self.widths.len() != self.neurons_per_value {
                    return bad("one center and one width per encoding neuron");
                }
                if self.centers.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("receptive field centers must be strictly increasing");
                }
                if self.widths.iter().any(|w| !(*w > 0.0)) {
                    return bad("receptive field widths must be positive");
                }
            }
        }
        Ok(())
    }

    fn expect(&self, scheme: Scheme) -> Result<()> {
        if self.scheme != scheme {
            return Err(Error::InvalidEncoder(format!(
                "expected a {scheme:?} encoder, got {:?}",
                self.scheme
            )));
        }
        self.validate()
    }

    /// Encoding neurons per value.
    pub fn rows_per_value(&self) -> usize {
        match self.scheme {
            Scheme::Rate | Scheme::Time => 1,
            Scheme::PopulationRate | Scheme::PopulationTime => self.neurons_per_value,
        }
    }
}

fn check_value(value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::ValueOutOfRange(value));
    }
    Ok(())
}

/// `n` spikes spread evenly: the k-th (1-based) lands at step `ceil(k * window / n)`.
fn even_spikes(n: usize, window: usize) -> Vec<bool> {
    let mut train = vec![false; window];
    for k in 1..=n {
        let step = (k * window).div_ceil(n);
        train[step - 1] = true;
    }
    train
}

/// Deterministic mode: `floor(value * max_rate * window)` evenly spaced
/// spikes. Stochastic mode: i.i.d. Bernoulli(`value * max_rate`) per step.
pub fn rate_encode<R: Rng + ?Sized>(value: f64, spec: &EncoderSpec, rng: &mut R) -> Result<Vec<bool>> {
    spec.expect(Scheme::Rate)?;
    check_value(value)?;
    let p = value * spec.max_rate;
    if spec.deterministic {
        Ok(deterministic_rate(value, spec))
    } else {
        Ok((0..spec.window).map(|_| rng.random::<f64>() < p).collect())
    }
}

fn deterministic_rate(value: f64, spec: &EncoderSpec) -> Vec<bool> {
    // the epsilon keeps 0.7 * 10 = 6.999... at 7 spikes
    let n = (value * spec.max_rate * spec.window as f64 + 1e-9).floor() as usize;
    even_spikes(n.min(spec.window), spec.window)
}

fn latency_step(activation: f64, window: usize) -> usize {
    (1.0 + (1.0 - activation) * (window as f64 - 1.0)).round() as usize
}

/// Single spike at step `round(1 + (1 - value) * (window - 1))`.
pub fn time_encode(value: f64, spec: &EncoderSpec) -> Result<Vec<bool>> {
    spec.expect(Scheme::Time)?;
    check_value(value)?;
    let mut train = vec![false; spec.window];
    train[latency_step(value, spec.window) - 1] = true;
    Ok(train)
}

/// Every population neuron fires i.i.d. Bernoulli(`value * max_rate`).
pub fn population_rate_encode<R: Rng + ?Sized>(value: f64, spec: &EncoderSpec, rng: &mut R) -> Result<SpikeRecord> {
    spec.expect(Scheme::PopulationRate)?;
    check_value(value)?;
    let p = value * spec.max_rate;
    let mut out = SpikeRecord::zeros(spec.neurons_per_value, spec.window);
    for r in 0..spec.neurons_per_value {
        let row = if spec.deterministic {
            deterministic_rate(value, spec)
        } else {
            (0..spec.window).map(|_| rng.random::<f64>() < p).collect()
        };
        for (t, b) in row.into_iter().enumerate() {
            out.set(r, t, b);
        }
    }
    Ok(out)
}

/// Gaussian receptive fields; neuron `k` fires once, earlier the stronger
/// its activation, or not at all below [`RECEPTIVE_CUTOFF`].
pub fn population_time_encode(value: f64, spec: &EncoderSpec) -> Result<SpikeRecord> {
    spec.expect(Scheme::PopulationTime)?;
    check_value(value)?;
    let mut out = SpikeRecord::zeros(spec.neurons_per_value, spec.window);
    for (k, (c, w)) in spec.centers.iter().zip(&spec.widths).enumerate() {
        let a = (-(value - c).powi(2) / (2.0 * w * w)).exp();
        if a >= RECEPTIVE_CUTOFF {
            out.set(k, latency_step(a, spec.window) - 1, true);
        }
    }
    Ok(out)
}

/// Encodes a vector of values; rows are grouped by value.
pub fn encode<R: Rng + ?Sized>(values: &[f64], spec: &EncoderSpec, rng: &mut R) -> Result<SpikeRecord> {
    spec.validate()?;
    let per = spec.rows_per_value();
    let mut out = SpikeRecord::zeros(values.len() * per, spec.window);
    for (v, &value) in values.iter().enumerate() {
        let block = match spec.scheme {
            Scheme::Rate => SpikeRecord::from_rows(&[rate_encode(value, spec, rng)?])?,
            Scheme::Time => SpikeRecord::from_rows(&[time_encode(value, spec)?])?,
            Scheme::PopulationRate => population_rate_encode(value, spec, rng)?,
            Scheme::PopulationTime => population_time_encode(value, spec)?,
        };
        for r in 0..per {
            for t in 0..spec.window {
                out.set(v * per + r, t, block.get(r, t));
            }
        }
    }
    Ok(out)
}

/// Index of the row with the most spikes; ties go to the lowest index.
pub fn rate_decode(output: &SpikeRecord) -> Result<usize> {
    if output.rows() == 0 {
        return Err(Error::DimensionMismatch {
            what: "read-out rows",
            expected: 1,
            got: 0,
        });
    }
    let counts: Vec<usize> = (0..output.rows()).map(|r| output.count_row(r)).collect();
    Ok(argmax_first(&counts))
}

/// Position of the first maximum.
pub fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Read-out target for `label`: the deterministic rate train of value 1 on
/// the label's row, silence elsewhere. Only `window` and `max_rate` of
/// `spec` are used.
pub fn make_target(label: usize, classes: usize, spec: &EncoderSpec) -> Result<SpikeRecord> {
    if label >= classes {
        return Err(Error::Dataset(format!("label {label} out of range for {classes} classes")));
    }
    let rate = EncoderSpec::rate(spec.window, spec.max_rate, true);
    rate.validate()?;
    let row = deterministic_rate(1.0, &rate);
    let mut out = SpikeRecord::zeros(classes, spec.window);
    for (t, b) in row.into_iter().enumerate() {
        out.set(label, t, b);
    }
    Ok(out)
}
