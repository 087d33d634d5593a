//! `spikenet` command-line driver.
//!
//! Exit codes: 0 success, 1 invalid input (arguments, configuration, data
//! files), 2 runtime failure (I/O). Log verbosity comes from `SNN_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`; default `warn`).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spikenet::checkpoint::Checkpoint;
use spikenet::data::{synthesize_patterns, EventFormat, SynthSpec};
use spikenet::harness::{
    cmd_eval, cmd_inspect, cmd_synth, cmd_train, metrics_to_csv, parse_with_overrides, DatasetSource, EvalSettings,
    ExperimentConfig, GlmEvalMode, SplitChoice,
};
use spikenet::Error;

const LOG_ENV: &str = "SNN_LOG";

#[derive(Parser)]
#[command(name = "spikenet", version, about = "Train and evaluate discrete-time spiking networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from an experiment configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override a configuration key, e.g. `--set hyper.bandwidth=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Shorthand for `--set metrics_path=...`.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Shorthand for `--set checkpoint_path=...`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Experiment configuration providing the dataset and eval settings.
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE", requires = "config")]
        overrides: Vec<String>,
        /// Dataset manifest, instead of a configuration.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, value_enum)]
        glm_mode: Option<GlmModeArg>,
        #[arg(long)]
        eval_seed: Option<u64>,
    },
    /// Print a checkpoint summary.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Generate a synthetic dataset as event files plus manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// TOML file with generator settings; defaults apply otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Convert a metrics log into CSV plot data.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum GlmModeArg {
    Sampled,
    ExpectedRate,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

fn run(cli: Cli) -> spikenet::Result<()> {
    match cli.command {
        Command::Train {
            config,
            mut overrides,
            metrics,
            checkpoint,
        } => {
            if let Some(m) = metrics {
                overrides.push(format!("metrics_path={}", toml_string(&m)));
            }
            if let Some(c) = checkpoint {
                overrides.push(format!("checkpoint_path={}", toml_string(&c)));
            }
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let out = cmd_train(&cfg)?;
            if let Some(last) = out.records.last() {
                println!(
                    "examples {} train accuracy {:.4} test accuracy {:.4}",
                    last.examples_seen, last.train_accuracy, last.test_accuracy
                );
            }
        }
        Command::Eval {
            checkpoint,
            config,
            overrides,
            manifest,
            split,
            glm_mode,
            eval_seed,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let (ds, mut settings) = match (config, manifest) {
                (Some(c), _) => {
                    let cfg = ExperimentConfig::load(&c, &overrides)?;
                    (cfg.dataset.load()?, cfg.eval)
                }
                (None, Some(m)) => (DatasetSource::Manifest { path: m }.load()?, EvalSettings::default()),
                (None, None) => unreachable!("clap requires one of --config and --manifest"),
            };
            if let Some(mode) = glm_mode {
                settings.glm_mode = match mode {
                    GlmModeArg::Sampled => GlmEvalMode::Sampled,
                    GlmModeArg::ExpectedRate => GlmEvalMode::ExpectedRate,
                };
            }
            if let Some(seed) = eval_seed {
                settings.seed = seed;
            }
            let split = match split {
                SplitArg::Train => SplitChoice::Train,
                SplitArg::Test => SplitChoice::Test,
            };
            print!("{}", cmd_eval(&ck, &ds, split, &settings)?);
        }
        Command::Inspect { checkpoint } => {
            print!("{}", cmd_inspect(&Checkpoint::load(&checkpoint)?));
        }
        Command::Synth {
            out,
            spec,
            overrides,
            format,
        } => {
            let text = match spec {
                Some(p) => fs::read_to_string(p)?,
                None => String::new(),
            };
            let spec: SynthSpec = parse_with_overrides(&text, &overrides)?;
            let format = match format {
                FormatArg::Text => EventFormat::Text,
                FormatArg::Binary => EventFormat::Binary,
            };
            let manifest = cmd_synth(&synthesize_patterns(&spec)?, &out, format)?;
            println!("{}", manifest.display());
        }
        Command::Plot { metrics, out } => {
            let csv = metrics_to_csv(&fs::read_to_string(metrics)?)?;
            match out {
                Some(p) => fs::write(p, csv)?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

/// Quotes a path as a TOML basic string for use in an override.
fn toml_string(p: &std::path::Path) -> String {
    let s = p.display().to_string().replace('\\', "\\\\").replace('"', "\\\"");
    format!("\"{s}\"")
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_validation() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
