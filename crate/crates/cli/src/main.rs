//! `detrefine`: evaluate detections, diagnose false positives, mine samples,
//! train the refinement classifier and fuse its scores.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure,
//! 4 numeric failure during training.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use detrefine_core::eval::ApMode;
use detrefine_core::miner::Heuristic;
use detrefine_core::pipeline::SweepAxis;
use detrefine_core::Error;

#[derive(Parser)]
#[command(name = "detrefine", version, about = "Detection evaluation, hard false positive diagnosis and decoupled score refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (JSON). Missing sections take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the stage this command runs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EvalFlags {
    #[arg(long)]
    pub iou_thr: Option<f64>,
    /// all_point or eleven_point
    #[arg(long)]
    pub ap_mode: Option<ApMode>,
}

#[derive(Args, Debug, Clone)]
pub struct MineFlags {
    #[arg(long)]
    pub heuristic: Option<Heuristic>,
    #[arg(long)]
    pub fp_thr: Option<f64>,
    /// Boxes per minibatch.
    #[arg(long)]
    pub rois: Option<usize>,
    #[arg(long)]
    pub images_per_batch: Option<usize>,
    #[arg(long)]
    pub fg_iou: Option<f64>,
    /// Number of minibatches; one pass over the images by default.
    #[arg(long)]
    pub batches: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long)]
    pub roi_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub wd: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr_drop_epoch: Option<f64>,
    /// Random projection of crops to this many features.
    #[arg(long)]
    pub projection_dim: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset: PPM images plus dataset.json.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        num_images: Option<usize>,
    },
    /// Run the simulated base detector over a dataset.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// mAP of a detection file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[command(flatten)]
        eval: EvalFlags,
        /// Add the COCO-style IoU sweep and size buckets.
        #[arg(long)]
        coco: bool,
    },
    /// False positive score bins, hypothesized mAP, taxonomy and sensitivity.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[command(flatten)]
        eval: EvalFlags,
        /// Hypothesized-mAP thresholds, comma separated.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
    },
    /// Label, categorize and sample training boxes from base detections.
    Mine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[command(flatten)]
        mine: MineFlags,
    },
    /// Train the refinement classifier on a sample manifest.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Multiply detection scores by the classifier's probabilities.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare base and refined detections.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        refined: PathBuf,
        #[command(flatten)]
        eval: EvalFlags,
    },
    /// Rerun mine, train, refine and eval once per value of one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// heuristic, fp_thr, sample_size or roi_scale
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Training split dataset and detections; the built-in benchmark when omitted.
        #[arg(long, requires_all = ["train_detections", "test_dataset", "test_detections"])]
        train_dataset: Option<PathBuf>,
        #[arg(long)]
        train_detections: Option<PathBuf>,
        #[arg(long)]
        test_dataset: Option<PathBuf>,
        #[arg(long)]
        test_detections: Option<PathBuf>,
        /// Refinement passes timed per value; the fastest is reported.
        #[arg(long, default_value_t = 3)]
        timing_repeats: usize,
        #[command(flatten)]
        mine: MineFlags,
        #[command(flatten)]
        train: TrainFlags,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Diverged { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { common, split, num_images } => commands::synth(&common, split, num_images),
        Command::Simulate { common, dataset } => commands::simulate(&common, &dataset),
        Command::Eval { common, dataset, detections, eval, coco } => commands::eval(&common, &dataset, &detections, &eval, coco),
        Command::Analyze { common, dataset, detections, eval, thresholds } => {
            commands::analyze(&common, &dataset, &detections, &eval, thresholds)
        }
        Command::Mine { common, dataset, detections, mine } => commands::mine(&common, &dataset, &detections, &mine),
        Command::Train { common, dataset, manifest, train } => commands::train(&common, &dataset, &manifest, &train),
        Command::Refine { common, dataset, detections, model } => commands::refine(&common, &dataset, &detections, &model),
        Command::Report { common, dataset, base, refined, eval } => commands::report(&common, &dataset, &base, &refined, &eval),
        Command::Sweep {
            common,
            axis,
            values,
            train_dataset,
            train_detections,
            test_dataset,
            test_detections,
            timing_repeats,
            mine,
            train,
        } => {
            let files = train_dataset.map(|td| commands::SweepFiles {
                train_dataset: td,
                train_detections: train_detections.expect("clap enforces"),
                test_dataset: test_dataset.expect("clap enforces"),
                test_detections: test_detections.expect("clap enforces"),
            });
            commands::sweep(&common, axis, &values, files, timing_repeats, &mine, &train)
        }
    };
    match result {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
