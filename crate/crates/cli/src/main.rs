use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::CliError;

/// Tennis rally sequence dataset and evaluation toolkit.
#[derive(Parser)]
#[command(name = "rallykit", version, about)]
struct Cli {
    /// Flat key-value config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print event-count statistics for an annotation file.
    Stats {
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Check rally structure rules across an annotation file.
    Validate {
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Build the prompt/answer dataset and cut-list for a variation.
    Build {
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Directory of per-rally detection files ({id}.track.json or {id}.jsonl).
        #[arg(long)]
        detections: Option<PathBuf>,
        /// single_event, default_sequence, frame_numbers, event_count_given,
        /// event_count_query, bbox_prompt, bbox_ball_court_prompt or
        /// keypoint_prompt.
        #[arg(long)]
        variant: Option<String>,
        /// Frames between coordinate entries (defaults per variant).
        #[arg(long)]
        stride: Option<u32>,
        /// Keypoint set for keypoint_prompt: all17 or hands4.
        #[arg(long)]
        keypoints: Option<String>,
        /// Record the audio flag in the build manifest.
        #[arg(long)]
        include_audio: bool,
        /// Pick the smallest stride whose prompts fit this token budget.
        #[arg(long)]
        token_budget: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse raw detector outputs into per-rally track files.
    Fuse {
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Directory of per-rally raw detector files ({id}.jsonl).
        #[arg(long)]
        detections: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a dataset against an inference endpoint (or mock:<path>).
    Run {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// http(s)://host:port or mock:<answers.jsonl>.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        num_frames: Option<u32>,
        #[arg(long)]
        include_audio: bool,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long)]
        retry_limit: Option<u32>,
        #[arg(long)]
        timeout_ms: Option<u64>,
        #[arg(long)]
        backoff_ms: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score sequence (or per-event) predictions against annotations.
    Eval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// sequence (default) or single.
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score event-count predictions against annotations.
    CountEval {
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
