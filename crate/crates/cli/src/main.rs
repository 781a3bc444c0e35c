//! `cnnelm`: train, evaluate and run fingerprint floor classifiers.
//!
//! Exit codes: 0 success, 1 evaluation below a requested threshold,
//! 2 I/O, parse or configuration error.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cnnelm::{Approach, NormMode};

use commands::{BenchmarkArgs, Failure, ReportFormat};
use config::{CSetting, FlagConfig, HiddenSetting};

#[derive(Debug, Parser)]
#[command(
    name = "cnnelm",
    version,
    about = "Wi-Fi fingerprint building/floor classification"
)]
struct Cli {
    /// Root directory holding one folder per dataset.
    #[arg(long, global = true, env = "CNNELM_DATA_DIR")]
    data_dir: Option<PathBuf>,

    /// Print errors as a JSON object on stderr.
    #[arg(long, global = true)]
    error_json: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a dataset and print a summary; optionally re-export it as CSV.
    Ingest {
        /// Registry name, `SYNTH`, or a manifest JSON path.
        #[arg(long)]
        dataset: String,
        /// Write train.csv, test.csv and manifest.json into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Fit a model on a dataset's training file and write it to disk.
    Train(RunArgs),
    /// Classify the fingerprints of a CSV file with a saved model.
    Predict {
        /// model.json written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// CSV of fingerprints to classify.
        #[arg(long)]
        queries: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Use the 8-bit weights.
        #[arg(long)]
        quantized: bool,
        /// Column layout of the query file, if it differs from training.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Pick the hidden-layer size on a validation split.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the sweep as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every approach on every dataset and write report files.
    Benchmark {
        /// Comma-separated dataset names, or `all` for the public twelve.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        datasets: Vec<String>,
        /// Comma-separated approaches.
        #[arg(long, value_delimiter = ',', default_value = "knn,elm_only,cnn_elm")]
        approaches: Vec<Approach>,
        /// Comma-separated random seeds.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Directory for report.csv, report.json and report.txt.
        #[arg(long, default_value = "reports")]
        output_dir: PathBuf,
        /// Unit-norm axis: per_feature or per_sample.
        #[arg(long, default_value = "per_feature")]
        norm_mode: NormMode,
        /// Convolution kernel width.
        #[arg(long, default_value_t = 3)]
        kernel_size: usize,
        /// Number of convolution filters.
        #[arg(long, default_value_t = 2)]
        n_filters: usize,
        /// Score ELM approaches with 8-bit weights.
        #[arg(long)]
        quantized: bool,
        /// Include preprocessing in the reported times.
        #[arg(long)]
        end_to_end: bool,
        /// Exit with status 1 if any seed-averaged floor hit rate is lower.
        #[arg(long)]
        fail_under: Option<f64>,
    },
    /// Re-emit a saved benchmark report.
    Report {
        /// report.json written by `benchmark`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Registry name, `SYNTH`, or a manifest JSON path.
    #[arg(long)]
    dataset: Option<String>,
    /// JSON file with any of the run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// knn, elm_only or cnn_elm.
    #[arg(long)]
    approach: Option<Approach>,
    /// Seed for the random weights and the validation split.
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden neurons, or `auto` to sweep.
    #[arg(long = "L", visible_alias = "hidden")]
    hidden: Option<HiddenSetting>,
    /// Regularization term, or `registry`.
    #[arg(long)]
    c: Option<CSetting>,
    /// Unit-norm axis: per_feature or per_sample.
    #[arg(long)]
    norm_mode: Option<NormMode>,
    /// Convolution kernel width.
    #[arg(long)]
    kernel_size: Option<usize>,
    /// Number of convolution filters.
    #[arg(long)]
    n_filters: Option<usize>,
    /// Store 8-bit weights alongside the float model.
    #[arg(long)]
    quantize: bool,
    /// Directory for model.json and run.json.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Largest L visited by a sweep.
    #[arg(long)]
    l_max: Option<usize>,
    /// Sweep step.
    #[arg(long)]
    step: Option<usize>,
    /// Fraction of each class held out for the sweep.
    #[arg(long)]
    val_fraction: Option<f64>,
}

impl RunArgs {
    fn split(self) -> (FlagConfig, Option<PathBuf>) {
        (
            FlagConfig {
                dataset: self.dataset,
                approach: self.approach,
                seed: self.seed,
                hidden: self.hidden,
                c: self.c,
                norm_mode: self.norm_mode,
                kernel_size: self.kernel_size,
                n_filters: self.n_filters,
                quantize: self.quantize,
                output_dir: self.output_dir,
                l_max: self.l_max,
                step: self.step,
                val_fraction: self.val_fraction,
            },
            self.config,
        )
    }
}

fn run(cli: Cli) -> commands::CmdResult {
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::Ingest {
            dataset,
            export,
            json,
        } => commands::ingest(&data::resolve(&dataset, data_dir)?, export.as_deref(), json),
        Command::Train(args) => {
            let (flags, config) = args.split();
            commands::train(flags, config.as_deref(), data_dir)
        }
        Command::Predict {
            model,
            queries,
            output,
            quantized,
            manifest,
        } => commands::predict(
            &model,
            &queries,
            output.as_deref(),
            quantized,
            manifest.as_deref(),
        ),
        Command::Sweep { run, output } => {
            let (flags, config) = run.split();
            commands::sweep_cmd(flags, config.as_deref(), data_dir, output.as_deref())
        }
        Command::Benchmark {
            datasets,
            approaches,
            seeds,
            output_dir,
            norm_mode,
            kernel_size,
            n_filters,
            quantized,
            end_to_end,
            fail_under,
        } => commands::benchmark(
            BenchmarkArgs {
                datasets,
                approaches,
                seeds,
                output_dir,
                norm_mode,
                kernel_size,
                n_filters,
                quantized,
                end_to_end,
                fail_under,
            },
            data_dir,
        ),
        Command::Report { input, format } => commands::report(&input, format),
    }
}

fn report_failure(failure: &Failure, as_json: bool) -> u8 {
    let (code, kind, message) = match failure {
        Failure::Run(e) => (2, e.kind(), e.to_string()),
        Failure::Gate(msg) => (1, "evaluation", msg.clone()),
    };
    if as_json {
        let body = serde_json::json!({
            "error": { "kind": kind, "message": message, "exit_code": code }
        });
        eprintln!("{body}");
    } else {
        eprintln!("error: {message}");
    }
    code
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
    let as_json = cli.error_json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => ExitCode::from(report_failure(&f, as_json)),
    }
}
