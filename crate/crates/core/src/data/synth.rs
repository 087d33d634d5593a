//! Seeded synthetic spatio-temporal pattern classification task.
//!
//! Every class owns a prototype in which each active input channel fires
//! once at a prototype step. Examples copy the prototype, shift each spike
//! by a uniform offset in `[-jitter, jitter]`, delete each spike with
//! probability `noise` and add one spurious spike per channel with
//! probability `noise`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Example;
use crate::error::{Error, Result};
use crate::record::SpikeRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelLayout {
    /// Each channel active in each class with probability `active_fraction`.
    Random,
    /// Channels split into contiguous per-class blocks.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: usize,
    pub inputs: usize,
    pub horizon: usize,
    pub jitter: usize,
    pub noise: f64,
    pub active_fraction: f64,
    pub layout: ChannelLayout,
    pub train_examples: usize,
    pub test_examples: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 2,
            inputs: 20,
            horizon: 50,
            jitter: 2,
            noise: 0.05,
            active_fraction: 0.5,
            layout: ChannelLayout::Random,
            train_examples: 1000,
            test_examples: 200,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Dataset(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.inputs == 0 {
            return bad("need at least one input channel".into());
        }
        if self.horizon <= 2 * self.jitter {
            return bad(format!("horizon {} too small for jitter {}", self.horizon, self.jitter));
        }
        if !(0.0..=1.0).contains(&self.noise) || !(0.0..=1.0).contains(&self.active_fraction) {
            return bad("noise and active_fraction must be probabilities".into());
        }
        if self.layout == ChannelLayout::Disjoint && self.inputs < self.classes {
            return bad("disjoint layout needs at least one channel per class".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub spec: SynthSpec,
    pub prototypes: Vec<SpikeRecord>,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

fn draw_prototype(spec: &SynthSpec, class: usize, rng: &mut ChaCha8Rng) -> SpikeRecord {
    // keep jittered spikes inside the horizon
    let lo = spec.jitter;
    let hi = spec.horizon - spec.jitter;
    loop {
        let mut proto = SpikeRecord::zeros(spec.inputs, spec.horizon);
        for ch in 0..spec.inputs {
            let active = match spec.layout {
                ChannelLayout::Random => rng.random::<f64>() < spec.active_fraction,
                ChannelLayout::Disjoint => ch * spec.classes / spec.inputs == class,
            };
            if active {
                proto.set(ch, rng.random_range(lo..hi), true);
            }
        }
        if proto.total_spikes() > 0 {
            return proto;
        }
    }
}

fn perturb(proto: &SpikeRecord, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> SpikeRecord {
    let mut out = SpikeRecord::zeros(proto.rows(), proto.horizon());
    let j = spec.jitter as i64;
    for ch in 0..proto.rows() {
        for t in 0..proto.horizon() {
            if !proto.get(ch, t) {
                continue;
            }
            let shifted = (t as i64 + rng.random_range(-j..=j)) as usize;
            if rng.random::<f64>() >= spec.noise {
                out.set(ch, shifted, true);
            }
        }
        if rng.random::<f64>() < spec.noise {
            out.set(ch, rng.random_range(0..spec.horizon), true);
        }
    }
    out
}

/// Draws prototypes, then `train_examples` and `test_examples` examples
/// with labels cycling through the classes. Fully determined by `spec`.
pub fn synthesize_patterns(spec: &SynthSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes: Vec<SpikeRecord> = (0..spec.classes).map(|c| draw_prototype(spec, c, &mut rng)).collect();
    let mut draw = |count: usize| -> Vec<Example> {
        (0..count)
            .map(|k| {
                let label = k % spec.classes;
                Example {
                    input: perturb(&prototypes[label], spec, &mut rng),
                    label,
                }
            })
            .collect()
    };
    let train = draw(spec.train_examples);
    let test = draw(spec.test_examples);
    Ok(SyntheticDataset {
        spec: spec.clone(),
        prototypes,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_examples_equal_prototypes() {
        let spec = SynthSpec {
            jitter: 0,
            noise: 0.0,
            train_examples: 10,
            test_examples: 4,
            ..Default::default()
        };
        let ds = synthesize_patterns(&spec).unwrap();
        for ex in ds.train.iter().chain(&ds.test) {
            assert_eq!(ex.input, ds.prototypes[ex.label]);
        }
    }

    #[test]
    fn disjoint_classes_separate_by_counts() {
        let spec = SynthSpec {
            layout: ChannelLayout::Disjoint,
            noise: 0.0,
            train_examples: 40,
            ..Default::default()
        };
        let ds = synthesize_patterns(&spec).unwrap();
        // count on class-0 channels minus count on class-1 channels
        let score = |r: &SpikeRecord| -> i64 {
            (0..r.rows())
                .map(|ch| if ch < 10 { r.count_row(ch) as i64 } else { -(r.count_row(ch) as i64) })
                .sum()
        };
        for ex in &ds.train {
            assert_eq!(score(&ex.input) > 0, ex.label == 0);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SynthSpec::default();
        assert_eq!(synthesize_patterns(&spec).unwrap(), synthesize_patterns(&spec).unwrap());
        let other = SynthSpec { seed: 1, ..Default::default() };
        assert_ne!(synthesize_patterns(&spec).unwrap().prototypes, synthesize_patterns(&other).unwrap().prototypes);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(synthesize_patterns(&SynthSpec { classes: 1, ..Default::default() }).is_err());
        assert!(synthesize_patterns(&SynthSpec { horizon: 4, jitter: 2, ..Default::default() }).is_err());
    }

    #[test]
    fn jitter_stays_in_window() {
        let spec = SynthSpec {
            horizon: 7,
            jitter: 3,
            noise: 0.0,
            train_examples: 50,
            ..Default::default()
        };
        let ds = synthesize_patterns(&spec).unwrap();
        for p in &ds.prototypes {
            for ch in 0..p.rows() {
                for t in 0..p.horizon() {
                    assert!(!p.get(ch, t) || t == 3);
                }
            }
        }
        assert!(ds.train.iter().all(|e| e.input.horizon() == 7));
    }
}
