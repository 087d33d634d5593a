//! Experiment driver: seeded training and evaluation loops, metrics logs,
//! checkpoints and plot data.

pub mod config;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{write_synthetic, Dataset, EventFormat, Example, SyntheticDataset};
use crate::encoding::{argmax_first, make_target, rate_decode, EncoderSpec};
use crate::error::{Error, Result};
use crate::glm::sigmoid;
use crate::learn::glm::{GlmTrainState, GlmTrainer};
use crate::learn::srm::{ErrorSignals, SrmTrainer};
use crate::learn::{apply_updates, UpdateAccumulator};
use crate::network::{run_trajectory, Simulator, SpikingMode};
use crate::params::{HyperParams, Parameters};
use crate::topology::Topology;
pub use config::{
    apply_override, check_shapes, parse_with_overrides, DatasetSource, EvalSettings, ExperimentConfig, GlmEvalMode, GlmSettings, ModelKind,
    SrmSettings,
};

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub examples_seen: usize,
    pub batch_size: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Mean training loss (SRM) or sampled bound (GLM) since the previous record.
    pub mean_loss_or_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl MetricsRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics records always serialize")
    }
}

/// A trained or loaded network ready for prediction.
#[derive(Debug, Clone)]
pub struct Model<'a> {
    pub kind: ModelKind,
    pub topology: &'a Topology,
    pub params: &'a Parameters,
    pub hyper: &'a HyperParams,
}

impl Model<'_> {
    /// Predicted class of `input`; `index` seeds the stochastic GLM run.
    pub fn predict(&self, input: &crate::SpikeRecord, index: u64, settings: &EvalSettings) -> Result<usize> {
        let visible = self.topology.visible();
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(index);
        match (self.kind, settings.glm_mode) {
            (ModelKind::Srm, _) => {
                let tr = run_trajectory(self.params, self.topology, self.hyper, input, SpikingMode::Deterministic, None, &mut rng)?;
                rate_decode(&tr.spikes.select_rows(visible))
            }
            (ModelKind::Glm, GlmEvalMode::Sampled) => {
                let tr = run_trajectory(self.params, self.topology, self.hyper, input, SpikingMode::Stochastic, None, &mut rng)?;
                rate_decode(&tr.spikes.select_rows(visible))
            }
            (ModelKind::Glm, GlmEvalMode::ExpectedRate) => {
                let mut sim = Simulator::new(self.params, self.topology, self.hyper)?;
                let mut score = vec![0.0; visible.len()];
                for t in 0..input.horizon() {
                    let u = sim.advance();
                    for (k, &i) in visible.iter().enumerate() {
                        score[k] += sigmoid(self.hyper.bandwidth * u[i]);
                    }
                    let spikes: Vec<bool> = u.iter().map(|&v| v >= 0.0).collect();
                    sim.emit(&spikes, &input.column(t))?;
                }
                Ok(argmax_first(&score))
            }
        }
    }

    /// Accuracy and confusion counts over `examples`, evaluated in parallel.
    pub fn evaluate(&self, examples: &[Example], classes: usize, settings: &EvalSettings) -> Result<Evaluation> {
        if examples.is_empty() {
            return Err(Error::Dataset("no examples to evaluate".into()));
        }
        let predictions: Vec<usize> = examples
            .par_iter()
            .enumerate()
            .map(|(k, ex)| self.predict(&ex.input, k as u64, settings))
            .collect::<Result<_>>()?;
        let mut confusion = vec![vec![0; classes]; classes];
        let mut correct = 0;
        for (ex, &p) in examples.iter().zip(&predictions) {
            if ex.label >= classes {
                return Err(Error::Dataset(format!("label {} outside [0, {classes})", ex.label)));
            }
            confusion[ex.label][p] += 1;
            correct += usize::from(ex.label == p);
        }
        Ok(Evaluation {
            accuracy: correct as f64 / examples.len() as f64,
            correct,
            total: examples.len(),
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy {:.4} ({}/{})", self.accuracy, self.correct, self.total)?;
        writeln!(f, "confusion (rows = true class, columns = predicted)")?;
        for (c, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|n| format!("{n:>6}")).collect();
            writeln!(f, "{c:>4} |{}", cells.join(""))?;
        }
        Ok(())
    }
}

enum Learner {
    Srm(SrmTrainer, UpdateAccumulator),
    Glm(GlmTrainer, GlmTrainState, ChaCha8Rng),
}

impl Learner {
    fn acc(&mut self) -> &mut UpdateAccumulator {
        match self {
            Learner::Srm(_, acc) => acc,
            Learner::Glm(_, st, _) => &mut st.acc,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<MetricsRecord>,
    pub checkpoint: Checkpoint,
}

/// Runs the configured training on `ds`, calling `sink` with every metrics
/// record as soon as it is produced.
pub fn train(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    sink: &mut dyn FnMut(&MetricsRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.train.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    if ds.test.is_empty() {
        return Err(Error::Dataset("test split is empty".into()));
    }
    let topo = cfg.topology_for(ds)?;
    let hyper = cfg.hyper;
    let mut params = Parameters::init_uniform(&topo, cfg.seed);
    params.weights.iter_mut().for_each(|w| *w *= cfg.init_gain);
    for &i in topo.hidden() {
        params.biases[i] = cfg.init_hidden_bias;
    }

    let mut learner = match cfg.model {
        ModelKind::Srm => {
            let signals = ErrorSignals::new(cfg.srm.error_mode, &topo, cfg.srm.feedback_seed)?;
            let mut t = SrmTrainer::new(cfg.srm.surrogate, signals);
            t.learn_bias = cfg.srm.learn_bias;
            Learner::Srm(t, UpdateAccumulator::new(&topo))
        }
        ModelKind::Glm => {
            let t = GlmTrainer {
                learn_bias: cfg.glm.learn_bias,
                samples_per_example: cfg.glm.samples_per_example,
                hidden_credit: cfg.glm.hidden_credit,
                hidden_scale: cfg.glm.hidden_scale,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1);
            Learner::Glm(t, GlmTrainState::new(&topo, cfg.glm.baseline, cfg.glm.baseline_decay), rng)
        }
    };
    let target_spec = EncoderSpec::rate(ds.horizon.max(1), cfg.target_rate, true);
    let targets: Vec<_> = (0..ds.classes)
        .map(|c| make_target(c, ds.classes, &target_spec))
        .collect::<Result<_>>()?;
    let train_subset = &ds.train[..cfg.eval.train_subset.min(ds.train.len())];

    let mut sampler = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let mut records = Vec::new();
    let mut window_loss = 0.0;
    let mut window_count = 0usize;
    for seen in 1..=cfg.examples_budget {
        let ex = &ds.train[sampler.random_range(0..ds.train.len())];
        let target = &targets[ex.label];
        let loss = match &mut learner {
            Learner::Srm(t, acc) => t.train_step(&params, &topo, &hyper, &ex.input, target, acc)?,
            Learner::Glm(t, st, rng) => t.train_step(&params, &topo, &hyper, &ex.input, target, st, rng)?,
        };
        window_loss += loss;
        window_count += 1;
        let acc = learner.acc();
        if acc.count == cfg.batch_size || seen == cfg.examples_budget {
            let held = acc.count;
            apply_updates(&mut params, acc, cfg.learning_rate, held)?;
        }
        if params.weights.iter().chain(&params.biases).any(|w| !w.is_finite()) {
            return Err(Error::Config(format!("parameters diverged after {seen} examples; lower learning_rate")));
        }
        if seen % cfg.eval_every == 0 {
            let model = Model {
                kind: cfg.model,
                topology: &topo,
                params: &params,
                hyper: &hyper,
            };
            let record = MetricsRecord {
                examples_seen: seen,
                batch_size: cfg.batch_size,
                train_accuracy: model.evaluate(train_subset, ds.classes, &cfg.eval)?.accuracy,
                test_accuracy: model.evaluate(&ds.test, ds.classes, &cfg.eval)?.accuracy,
                mean_loss_or_bound: window_loss / window_count as f64,
                wall_time: cfg.log_wall_time.then(|| start.elapsed().as_secs_f64()),
            };
            log::info!(
                "seen {} train {:.3} test {:.3} loss {:.4}",
                seen,
                record.train_accuracy,
                record.test_accuracy,
                record.mean_loss_or_bound
            );
            sink(&record)?;
            records.push(record);
            window_loss = 0.0;
            window_count = 0;
        }
    }
    let mut checkpoint = Checkpoint::new(topo, hyper, params)?;
    checkpoint.meta.insert("model".into(), cfg.model.as_str().into());
    checkpoint.meta.insert("seed".into(), cfg.seed.to_string());
    checkpoint
        .meta
        .insert("examples_seen".into(), cfg.examples_budget.to_string());
    Ok(TrainOutcome { records, checkpoint })
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Loads the dataset, trains, streams the metrics log to `metrics_path`
/// and writes the final checkpoint to `checkpoint_path`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.check_files()?;
    let ds = cfg.dataset.load()?;
    let mut log_file = match &cfg.metrics_path {
        Some(p) => {
            create_parent(p)?;
            Some(fs::File::create(p)?)
        }
        None => None,
    };
    let mut sink = |r: &MetricsRecord| -> Result<()> {
        if let Some(f) = log_file.as_mut() {
            writeln!(f, "{}", r.to_json_line())?;
        }
        Ok(())
    };
    let out = train(cfg, &ds, &mut sink)?;
    if let Some(p) = &cfg.checkpoint_path {
        create_parent(p)?;
        out.checkpoint.save(p)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Train,
    Test,
}

/// Scores a checkpoint on one split of `ds`.
pub fn cmd_eval(ck: &Checkpoint, ds: &Dataset, split: SplitChoice, settings: &EvalSettings) -> Result<Evaluation> {
    check_shapes(&ck.topology, ds)?;
    let kind = ModelKind::parse(
        ck.meta
            .get("model")
            .ok_or_else(|| Error::Config("checkpoint has no meta.model entry".into()))?,
    )?;
    let model = Model {
        kind,
        topology: &ck.topology,
        params: &ck.params,
        hyper: &ck.hyper,
    };
    let examples = match split {
        SplitChoice::Train => &ds.train,
        SplitChoice::Test => &ds.test,
    };
    model.evaluate(examples, ds.classes, settings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub max_abs: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            min,
            max,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            max_abs: min.abs().max(max.abs()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inspection {
    pub neurons: usize,
    pub visible: usize,
    pub hidden: usize,
    pub exogenous: usize,
    pub edges: usize,
    pub weights: Option<Stats>,
    pub biases: Option<Stats>,
    pub hyper: HyperParams,
    pub meta: Vec<(String, String)>,
}

pub fn cmd_inspect(ck: &Checkpoint) -> Inspection {
    let t = &ck.topology;
    Inspection {
        neurons: t.neuron_count(),
        visible: t.visible().len(),
        hidden: t.hidden().len(),
        exogenous: t.exogenous_count(),
        edges: t.edge_count(),
        weights: Stats::of(&ck.params.weights),
        biases: Stats::of(&ck.params.biases),
        hyper: ck.hyper,
        meta: ck.meta.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
    }
}

impl fmt::Display for Inspection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.meta {
            writeln!(f, "{k}: {v}")?;
        }
        writeln!(
            f,
            "neurons: {} ({} visible, {} hidden)",
            self.neurons, self.visible, self.hidden
        )?;
        writeln!(f, "exogenous inputs: {}", self.exogenous)?;
        writeln!(f, "edges: {}", self.edges)?;
        for (name, s) in [("weights", &self.weights), ("biases", &self.biases)] {
            match s {
                Some(s) => writeln!(
                    f,
                    "{name}: min {:?} max {:?} mean {:?} max|.| {:?}",
                    s.min, s.max, s.mean, s.max_abs
                )?,
                None => writeln!(f, "{name}: none")?,
            }
        }
        let h = &self.hyper;
        writeln!(
            f,
            "hyper: tau_mem {:?} tau_syn {:?} tau_ref {:?} threshold {:?} bandwidth {:?}",
            h.tau_mem, h.tau_syn, h.tau_ref, h.threshold, h.bandwidth
        )
    }
}

/// Writes a synthetic dataset as event files plus manifest.
pub fn cmd_synth(ds: &SyntheticDataset, dir: impl AsRef<Path>, format: EventFormat) -> Result<PathBuf> {
    write_synthetic(ds, dir, format)
}

pub const PLOT_HEADER: &str = "examples_seen,train_accuracy,test_accuracy,mean_loss_or_bound";

/// Converts a metrics log into CSV plot data, one row per record.
pub fn metrics_to_csv(log: &str) -> Result<String> {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for (i, line) in log.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: MetricsRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(format!("line {}", i + 1), e.to_string()))?;
        out.push_str(&format!(
            "{},{:?},{:?},{:?}\n",
            r.examples_seen, r.train_accuracy, r.test_accuracy, r.mean_loss_or_bound
        ));
    }
    Ok(out)
}
