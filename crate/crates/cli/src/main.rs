use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sertk::audio::{clean, read_wav, write_wav_pcm16, CleaningConfig};
use sertk::corpus::{ingest_manifest, scan_corpus};
use sertk::harness::{
    build_dataset, evaluate_model, featurize, predict_file, run_experiment, run_grid, write_synthetic_corpus, AtStage,
    ExperimentConfig, HarnessError, Result, Stage, SyntheticConfig,
};

#[derive(Parser)]
#[command(name = "sertk", version, about = "Speech emotion recognition experiments")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Print the fully resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a RAVDESS tree (or read a labeled CSV manifest) and emit a JSON manifest.
    Ingest {
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        root: Option<PathBuf>,
        /// CSV with path, emotion, gender[, intensity] columns.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Apply the cleaning chain to one WAV file.
    Clean {
        input: PathBuf,
        output: PathBuf,
        /// Take cleaning options from this experiment config instead of the defaults.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Extract and cache features for every utterance of the configured corpus.
    Featurize(ConfigArg),
    /// Run the full experiment: features, training, evaluation, artifacts.
    Train(ConfigArg),
    /// Evaluate a saved model on the test split of the configured corpus.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        model: PathBuf,
        /// Write the report JSON here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Rank the classes of a saved model for each WAV file.
    Predict {
        #[arg(short, long)]
        model: PathBuf,
        #[arg(required = true)]
        wavs: Vec<PathBuf>,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run several experiment configs in turn and summarize them.
    Grid {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Also write the summary as CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        print_config: bool,
    },
    /// Write the synthetic three-class corpus as RAVDESS-named WAV files.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        n_train: usize,
        #[arg(long, default_value_t = 20)]
        n_val: usize,
        #[arg(long, default_value_t = 20)]
        n_test: usize,
        #[arg(long, default_value_t = 1.0)]
        duration_s: f64,
    },
}

fn load(arg: &ConfigArg) -> Result<Option<ExperimentConfig>> {
    let cfg = ExperimentConfig::load(&arg.config)?;
    if arg.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(None);
    }
    Ok(Some(cfg))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).at_ctx(Stage::Report, p.display()),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { root, manifest, out } => {
            let doc = if let Some(m) = manifest {
                let utts = ingest_manifest(&m).at(Stage::Ingest)?;
                json!({ "utterances": utts })
            } else {
                let root = root.expect("clap enforces --root or --manifest");
                let (utts, summary) = scan_corpus(&root).at(Stage::Ingest)?;
                eprintln!(
                    "{} wav files, {} parsed, {} unparsed",
                    summary.wav_files,
                    utts.len(),
                    summary.unparsed.len()
                );
                json!({ "utterances": utts, "wav_files": summary.wav_files, "unparsed": summary.unparsed })
            };
            emit(out.as_deref(), &serde_json::to_string_pretty(&doc).at(Stage::Report)?)
        }
        Command::Clean { input, output, config } => {
            let cleaning = match config {
                Some(p) => ExperimentConfig::load(&p)?.cleaning,
                None => CleaningConfig::default(),
            };
            let w = read_wav(&input).at(Stage::Ingest)?;
            let cleaned = clean(&w, &cleaning).at_ctx(Stage::Clean, input.display())?;
            write_wav_pcm16(&output, &cleaned).at(Stage::Clean)?;
            eprintln!(
                "{}: {:.3}s at {} Hz -> {:.3}s at {} Hz",
                input.display(),
                w.duration_s(),
                w.sample_rate,
                cleaned.duration_s(),
                cleaned.sample_rate
            );
            Ok(())
        }
        Command::Featurize(arg) => {
            let Some(cfg) = load(&arg)? else { return Ok(()) };
            let ds = build_dataset(&cfg)?;
            let f = featurize(&cfg, &ds)?;
            let total = f.train.len() + f.val.len() + f.test.len() + f.external.len();
            println!(
                "{total} feature matrices ({} computed, {} cached) in {}",
                f.computed,
                total - f.computed,
                f.cache_dir.display()
            );
            Ok(())
        }
        Command::Train(arg) => {
            let Some(cfg) = load(&arg)? else { return Ok(()) };
            let r = run_experiment(&cfg)?;
            println!(
                "{}: test accuracy {:.4}, top-2 {}, macro F1 {:.4} ({} test utterances)",
                r.name,
                r.test.accuracy,
                r.test.top_k(2).map_or("n/a".into(), |v| format!("{v:.4}")),
                r.test.macro_f1,
                r.test.n_examples
            );
            println!("artifacts in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Eval { config, model, out } => {
            let Some(cfg) = load(&config)? else { return Ok(()) };
            let report = evaluate_model(&cfg, &model)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&report).at(Stage::Report)?)
        }
        Command::Predict { model, wavs, json } => {
            for wav in &wavs {
                let ranked = predict_file(&model, wav)?;
                if json {
                    let doc = json!({
                        "file": wav,
                        "ranking": ranked.iter().map(|(l, p)| json!({"label": l, "probability": p})).collect::<Vec<_>>(),
                    });
                    println!("{doc}");
                } else {
                    println!("{}", wav.display());
                    for (label, p) in &ranked {
                        println!("  {label:<20} {p:.4}");
                    }
                }
            }
            Ok(())
        }
        Command::Grid { configs, summary, print_config } => {
            let cfgs = configs.iter().map(|p| ExperimentConfig::load(p)).collect::<Result<Vec<_>>>()?;
            if print_config {
                for (p, c) in configs.iter().zip(&cfgs) {
                    println!("# {}\n{}", p.display(), c.to_toml()?);
                }
                return Ok(());
            }
            let results = run_grid(&cfgs);
            let mut csv = String::from("config,name,family,features,accuracy,top2,macro_f1,error\n");
            let mut failed = 0;
            for ((path, cfg), res) in configs.iter().zip(&cfgs).zip(&results) {
                match res {
                    Ok(r) => {
                        println!("{:<24} accuracy {:.4}  macro F1 {:.4}", r.name, r.test.accuracy, r.test.macro_f1);
                        csv.push_str(&format!(
                            "{},{},{},{},{},{},{},\n",
                            path.display(),
                            r.name,
                            r.family.as_str(),
                            r.features.as_str(),
                            r.test.accuracy,
                            r.test.top_k(2).map_or(String::new(), |v| v.to_string()),
                            r.test.macro_f1
                        ));
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("{:<24} error: {e}", cfg.name);
                        csv.push_str(&format!(
                            "{},{},{},{},,,,\"{}\"\n",
                            path.display(),
                            cfg.name,
                            cfg.model.family.as_str(),
                            cfg.features.kind.as_str(),
                            e.to_string().replace('"', "'")
                        ));
                    }
                }
            }
            if let Some(p) = summary {
                std::fs::write(&p, csv).at_ctx(Stage::Report, p.display())?;
            }
            if failed > 0 {
                return Err(HarnessError::new(Stage::Train, format!("{failed} of {} grid runs failed", cfgs.len())));
            }
            Ok(())
        }
        Command::Synth { out, seed, n_train, n_val, n_test, duration_s } => {
            let cfg = SyntheticConfig {
                n_train,
                n_val,
                n_test,
                duration_s,
                ..Default::default()
            };
            let paths = write_synthetic_corpus(&out, &cfg, seed)?;
            println!("wrote {} files under {}", paths.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
