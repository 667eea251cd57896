use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfprobe_core::LabelScale;

mod commands;

#[derive(Parser)]
#[command(name = "cfprobe", version, about = "Counterfactual probes for crowd-worker bias")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build per-worker task files and the operator-only hidden map.
    Plan {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate worker responses and surveys for an existing plan.
    Simulate {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long = "hidden-map")]
        hidden_map: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every worker from probe-pair responses.
    Score {
        #[arg(long = "hidden-map")]
        hidden_map: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_parser = parse_scale)]
        scale: LabelScale,
        /// Complete pairs needed for a reliable score.
        #[arg(long = "n-min", default_value_t = cfprobe_core::scoring::DEFAULT_MIN_PAIRS)]
        n_min: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate labels into a dataset; without --reports every worker
    /// weighs 1.
    Aggregate {
        #[arg(long = "hidden-map")]
        hidden_map: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        reports: Option<PathBuf>,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_parser = parse_scale)]
        scale: LabelScale,
        #[arg(long)]
        out: PathBuf,
    },
    /// Demographic parity of an aggregated dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long = "positive-threshold")]
        positive_threshold: Option<i64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full simulated experiment.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Query pool; generated from the config when omitted.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_scale(s: &str) -> Result<LabelScale, String> {
    s.parse().map_err(|e: cfprobe_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan {
            queries,
            config,
            seed,
            out,
        } => commands::plan(&queries, &config, seed, &out),
        Command::Simulate {
            queries,
            hidden_map,
            config,
            seed,
            out,
        } => commands::simulate(&queries, &hidden_map, &config, seed, &out),
        Command::Score {
            hidden_map,
            responses,
            scale,
            n_min,
            out,
        } => commands::score(&hidden_map, &responses, scale, n_min, &out),
        Command::Aggregate {
            hidden_map,
            responses,
            reports,
            policy,
            scale,
            out,
        } => commands::aggregate(&hidden_map, &responses, reports.as_deref(), &policy, scale, &out),
        Command::Evaluate {
            dataset,
            queries,
            positive_threshold,
            out,
        } => commands::evaluate(&dataset, &queries, positive_threshold, &out),
        Command::Experiment {
            config,
            queries,
            seed,
            out,
        } => commands::experiment(&config, queries.as_deref(), seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
