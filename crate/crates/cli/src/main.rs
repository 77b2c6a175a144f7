use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hifistream::generator::{init_random, passthrough_weights};
use hifistream::io::{self, EvalManifest, EvalMode, WavFormat};
use hifistream::streaming::{process_stream, DEFAULT_CHUNK};
use hifistream::{build_model, profiler, selftest, ChunkPlan, Error, Model, ModelConfig, Weights};

#[derive(Parser)]
#[command(name = "hifistream", version, about = "Streaming spectral-masking speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance one WAV file.
    Enhance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Process disjoint chunks independently.
        #[arg(long)]
        stream: bool,
        #[arg(long, default_value_t = DEFAULT_CHUNK)]
        chunk: usize,
        /// Write 16-bit PCM instead of 32-bit float.
        #[arg(long)]
        pcm16: bool,
    },
    /// Enhance a directory of noisy files and score them against clean ones.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        clean_dir: PathBuf,
        #[arg(long)]
        noisy_dir: PathBuf,
        #[arg(long)]
        stream: bool,
        #[arg(long, default_value_t = DEFAULT_CHUNK)]
        chunk: usize,
        /// CSV with columns utterance_id,pesq,csig,cbak,covl.
        #[arg(long)]
        external_metrics: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Print parameter and MAC counts.
    Profile {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in reference checks.
    Selftest,
    /// Write an initial weight file for a configuration.
    Init {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weights that reduce the model to an STFT round trip.
        #[arg(long)]
        passthrough: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn load_model(config: &Path, weights: &Path) -> Result<Model, Failure> {
    let cfg = io::load_config(config)?;
    let store: Weights = io::load_weights(weights).map_err(|e| match e {
        Error::Io(err) => Failure { code: 3, message: format!("cannot read weights {}: {err}", weights.display()) },
        other => other.into(),
    })?;
    Ok(build_model(cfg, store)?)
}

fn chunk_plan(cfg: &ModelConfig, chunk: usize) -> Result<ChunkPlan, Failure> {
    ChunkPlan::new(chunk, &cfg.frame).map_err(|e| Failure { code: 2, message: e.to_string() })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Enhance { config, weights, input, output, stream, chunk, pcm16 } => {
            let model = load_model(&config, &weights)?;
            let audio = io::read_wav(&input)?;
            let enhanced = if stream {
                process_stream(&model, &audio, &chunk_plan(model.config(), chunk)?)?
            } else {
                model.enhance(&audio)?
            };
            let format = if pcm16 { WavFormat::Pcm16 } else { WavFormat::Float32 };
            io::write_wav(&output, &enhanced, format)?;
        }
        Command::Eval { config, weights, clean_dir, noisy_dir, stream, chunk, external_metrics, report } => {
            let model = load_model(&config, &weights)?;
            let mode = if stream { EvalMode::Stream(chunk_plan(model.config(), chunk)?) } else { EvalMode::Offline };
            let manifest = EvalManifest::new(clean_dir, noisy_dir);
            let result = io::run_eval(&manifest, &model, mode, external_metrics.as_deref())?;
            for name in &result.skipped {
                eprintln!("warning: no clean file for {name}, skipped");
            }
            std::fs::write(&report, result.to_json()).map_err(Error::from)?;
            println!("{} utterances ({} mode)", result.count, result.mode);
            for (k, v) in &result.aggregate {
                println!("{k:<8} {v:.4}");
            }
        }
        Command::Profile { config, seconds, json } => {
            let cfg = io::load_config(&config)?;
            let report = profiler::profile(&cfg, seconds)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                println!("{report}");
            }
        }
        Command::Selftest => {
            let results = selftest::run();
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed > 0 {
                return Err(Failure { code: 1, message: format!("{failed} self-test checks failed") });
            }
        }
        Command::Init { config, seed, passthrough, out } => {
            let cfg = io::load_config(&config)?;
            let store: Weights = if passthrough { passthrough_weights(&cfg)? } else { init_random(&cfg, seed)? };
            io::save_weights(&out, &store)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
