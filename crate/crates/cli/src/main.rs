//! `stn-insight`: analyse optimizer trajectories, build prompts, query a
//! model and report the results.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stn_insight::synthetic::SyntheticSpec;
use stn_insight::{GraphFormat, Sense};

use commands::TaskArg;
use error::CliError;
use manifest::{DataArgs, LlmArgs, Settings};

#[derive(Parser)]
#[command(name = "stn-insight", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the STN and write features, graph exports and the partition.
    Analyze {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Render the prompt of a task to the output directory.
    Prompt {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        task: TaskArg,
        /// Reply holding parameter suggestions (task c); defaults to reply_B.txt.
        #[arg(long)]
        suggestions: Option<PathBuf>,
        /// Also print the exact prompt text.
        #[arg(long)]
        dump_prompt: bool,
    },
    /// Send the prompt of a task to the endpoint and parse the reply.
    Ask {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        suggestions: Option<PathBuf>,
        #[arg(long)]
        dump_prompt: bool,
    },
    /// Score models on a directory of prompt cases.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        llm: LlmArgs,
        /// Directory of case files (TOML or JSON).
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, default_value_t = stn_insight::evaluation::DEFAULT_TRIALS)]
        trials: usize,
        /// Model ids to compare; defaults to the configured model.
        #[arg(long = "models", value_delimiter = ',')]
        models: Vec<String>,
        /// Human votes CSV: evaluator,case_id,repetition,winning_model.
        #[arg(long)]
        votes: Option<PathBuf>,
        /// Repetitions behind the votes; defaults to --trials.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Issue the trials of a case concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Render bar plots and the report, or a single CSV with --csv.
    Render {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// SVG path for --csv; defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the STN as DOT or GraphML.
    Export {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "dot")]
        format: String,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a random trajectory dataset with a manifest.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        algorithms: usize,
        #[arg(long, default_value_t = 10)]
        trajectories: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 2)]
        dimension: usize,
        #[arg(long, default_value_t = 6)]
        grid: u32,
        #[arg(long, default_value = "minimization")]
        sense: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { data } => commands::analyze(&Settings::resolve(&data, None)?),
        Command::Prompt {
            data,
            task,
            suggestions,
            dump_prompt,
        } => commands::prompt(&Settings::resolve(&data, None)?, task, suggestions.as_deref(), dump_prompt),
        Command::Ask {
            data,
            llm,
            task,
            suggestions,
            dump_prompt,
        } => commands::ask(
            &Settings::resolve(&data, Some(&llm))?,
            task,
            suggestions.as_deref(),
            dump_prompt,
            llm.offline,
        ),
        Command::Evaluate {
            data,
            llm,
            cases,
            trials,
            models,
            votes,
            repetitions,
            parallel,
        } => commands::evaluate(
            &Settings::resolve(&data, Some(&llm))?,
            &commands::EvaluateOptions {
                cases: &cases,
                trials,
                models: &models,
                votes: votes.as_deref(),
                repetitions,
                parallel,
            },
            &llm,
        ),
        Command::Render { data, csv, out } => match csv {
            Some(csv) => commands::render_csv(&csv, out.as_deref()),
            None => commands::render_report(&Settings::resolve(&data, None)?),
        },
        Command::Export { data, format, out } => {
            let format: GraphFormat = format.parse().map_err(CliError::Input)?;
            commands::export(&Settings::resolve(&data, None)?, format, out.as_deref())
        }
        Command::Synth {
            seed,
            out,
            algorithms,
            trajectories,
            steps,
            dimension,
            grid,
            sense,
        } => {
            let sense: Sense = sense.parse().map_err(CliError::Input)?;
            let spec = SyntheticSpec {
                algorithms,
                max_trajectories: trajectories,
                max_steps: steps,
                dimension,
                grid,
                sense,
            };
            commands::synth(seed, &spec, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
