//! `ifl`: build critic training data, train and evaluate the critic, run the
//! feedback loop and report per-iteration metrics.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ifl", version, about, arg_required_else_help = true)]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BuildMode {
    /// Negatives from a generator prompted for bad answers.
    Llm,
    /// Negatives from seeded corruptions of the reference answers.
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorChoice {
    Chat,
    MockFeedback,
    MockEcho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceSource {
    /// Reference long answers of the corpus.
    Gold,
    /// Document bodies of the corpus.
    Docs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a question corpus into critique examples (one positive, three negatives per aspect).
    BuildCorpus {
        /// Corpus JSONL: id, question, docs, gold_aspects, answer.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Output critique JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = BuildMode::Deterministic)]
        mode: BuildMode,
        #[arg(long)]
        seed: Option<u64>,
        /// TOML or JSON config file.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
    /// Train the three critic heads with the pairwise ranking loss.
    TrainCritic {
        /// Critique JSONL produced by build-corpus.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        /// Output params JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// L2 weight decay.
        #[arg(long)]
        l2: Option<f64>,
        /// Fraction of questions held out for evaluation.
        #[arg(long)]
        holdout: Option<f64>,
        /// Mini-batch size; full batch when absent.
        #[arg(long)]
        batch_size: Option<usize>,
        /// Per-epoch loss JSONL.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Write band thresholds measured on the held-out split.
        #[arg(long, value_name = "FILE")]
        thresholds_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
    /// Print pairwise accuracy and average rewards per aspect.
    EvalCritic {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        params: PathBuf,
        /// Write the evaluation as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        /// Write band thresholds equal to the measured average rewards.
        #[arg(long, value_name = "FILE")]
        thresholds_out: Option<PathBuf>,
    },
    /// Score one answer: clipped reward, band and feedback per aspect.
    Score {
        #[arg(long, value_name = "FILE")]
        params: PathBuf,
        /// JSON object with question, docs and answer.
        #[arg(long, value_name = "FILE")]
        question_file: PathBuf,
        /// Band thresholds JSON; overrides the config file.
        #[arg(long, value_name = "FILE")]
        thresholds: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the feedback loop over a corpus.
    RunIfl {
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        params: PathBuf,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Output run log JSONL.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Manifest path; defaults to the run log with a `.manifest.json` extension.
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long, value_enum)]
        generator: Option<GeneratorChoice>,
        /// Band thresholds JSON; overrides the config file.
        #[arg(long, value_name = "FILE")]
        thresholds: Option<PathBuf>,
        /// Keep refining even when every aspect is praised.
        #[arg(long)]
        no_early_stop: bool,
    },
    /// Aggregate a run log into the per-iteration metric table.
    Report {
        #[arg(long, value_name = "FILE")]
        runs: PathBuf,
        /// Output table JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Corpus the runs came from; defaults to the one named in the run manifest.
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Per-question metrics JSONL.
        #[arg(long, value_name = "FILE")]
        items_out: Option<PathBuf>,
        /// MAUVE reference texts.
        #[arg(long, value_enum, default_value_t = ReferenceSource::Gold)]
        references: ReferenceSource,
    },
    /// Write a deterministic synthetic corpus.
    GenSynthetic {
        #[arg(long, default_value_t = 200)]
        questions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::BuildCorpus {
            input,
            out,
            mode,
            seed,
            config,
        } => commands::build_corpus(&input, &out, mode, seed, config.as_deref()),
        Command::TrainCritic {
            data,
            out,
            epochs,
            rate,
            seed,
            l2,
            holdout,
            batch_size,
            report,
            thresholds_out,
            config,
        } => commands::train_critic(commands::TrainArgs {
            data,
            out,
            epochs,
            rate,
            seed,
            l2,
            holdout,
            batch_size,
            report,
            thresholds_out,
            config,
        }),
        Command::EvalCritic {
            data,
            params,
            json,
            thresholds_out,
        } => commands::eval_critic(&data, &params, json.as_deref(), thresholds_out.as_deref()),
        Command::Score {
            params,
            question_file,
            thresholds,
            config,
            json,
        } => commands::score(&params, &question_file, thresholds.as_deref(), config.as_deref(), json),
        Command::RunIfl {
            corpus,
            params,
            config,
            out,
            manifest,
            seed,
            max_iterations,
            parallelism,
            generator,
            thresholds,
            no_early_stop,
        } => commands::run_ifl(commands::RunArgs {
            corpus,
            params,
            config,
            out,
            manifest,
            seed,
            max_iterations,
            parallelism,
            generator,
            thresholds,
            no_early_stop,
        }),
        Command::Report {
            runs,
            out,
            corpus,
            config,
            items_out,
            references,
        } => commands::report(
            &runs,
            &out,
            corpus.as_deref(),
            config.as_deref(),
            items_out.as_deref(),
            references,
        ),
        Command::GenSynthetic { questions, seed, out } => commands::gen_synthetic(questions, seed, &out),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
