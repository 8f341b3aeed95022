//! `sgrel` — batch command-line surface for the relationship toolkit.
//!
//! Six subcommands: `generate` (synthetic scenes), `labels` (geometric
//! self-supervision tables), `train`, `eval`, `analyze` (threshold
//! analytics only) and `export-features`. Every run is deterministic given
//! its flags and seed; the only non-reproducible bytes any command emits
//! are wall-clock timings, and those are confined to lines starting with
//! `#` (in `train_log.csv`) or to stderr.
//!
//! Exit status: 0 on success, 2 when the invocation or its inputs are at
//! fault (missing flags, malformed files, inconsistent shapes), 1 when the
//! work itself fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use sgrel::error::{Error, Result};
use sgrel::eval::{
    evaluate, export_features, group_predictions, predict_dataset, EvalConfig, EvalMode,
    RelationshipPrediction, DEFAULT_THRESHOLDS,
};
use sgrel::io::{
    ingest, load_checkpoint, load_detections, load_predictions, save_checkpoint, save_dataset,
    save_detections, save_predictions, write_alpha_csv, write_features_csv,
    write_label_counts_csv, write_labels_csv, write_nontrivial_csv, write_recall_by_kind_csv,
    write_recall_csv, write_train_log_csv, IngestFormat,
};
use sgrel::model::RelNetConfig;
use sgrel::scene::Dataset;
use sgrel::synth::{detect, generate, SynthConfig};
use sgrel::train::{train, TrainConfig};

#[derive(Parser)]
#[command(
    name = "sgrel",
    version,
    about = "Scene-graph relationship classification: data, training, evaluation",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene-graph dataset (and optional stub detections)
    Generate(GenerateArgs),
    /// Write the geometric self-supervision label tables for a dataset
    Labels(LabelsArgs),
    /// Train a relationship classifier and write a checkpoint
    Train(TrainArgs),
    /// Score a dataset and report recall@K plus threshold analytics
    Eval(EvalArgs),
    /// Threshold analytics only: type-ratio and non-trivial count curves
    Analyze(AnalyzeArgs),
    /// Export fused per-pair scores as a feature table
    ExportFeatures(ExportFeaturesArgs),
}

/// Flags shared by every subcommand that reads a dataset.
#[derive(Args)]
struct DatasetArgs {
    /// Dataset file to read
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,

    /// Input format: the native schema or the simplified region-graph form
    #[arg(long, value_name = "ID", default_value = "native", value_parser = parse_format)]
    format: IngestFormat,
}

impl DatasetArgs {
    fn load(&self) -> Result<Dataset> {
        ingest(&self.dataset, self.format)
    }
}

fn parse_format(s: &str) -> std::result::Result<IngestFormat, String> {
    IngestFormat::from_str(s).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<EvalMode, String> {
    EvalMode::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory for dataset.json (and detections.json if requested)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Seed for scenes, features and label noise
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,

    /// Number of images
    #[arg(long, value_name = "N", default_value_t = 2000)]
    images: usize,

    /// Fewest objects per image
    #[arg(long, value_name = "N", default_value_t = 2)]
    min_objects: usize,

    /// Most objects per image
    #[arg(long, value_name = "N", default_value_t = 4)]
    max_objects: usize,

    /// Number of object classes
    #[arg(long, value_name = "N", default_value_t = 6)]
    classes: usize,

    /// Appearance feature width; 0 disables features
    #[arg(long, value_name = "N", default_value_t = 8)]
    d_vis: usize,

    /// Image width in pixels
    #[arg(long, value_name = "F", default_value_t = 640.0)]
    width: f64,

    /// Image height in pixels
    #[arg(long, value_name = "F", default_value_t = 480.0)]
    height: f64,

    /// Probability of flipping a pair's predicate to a random other one
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    label_noise: f64,

    /// Standard deviation of Gaussian noise on each feature entry
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    feature_noise: f64,

    /// Also write detections.json from the built-in detector stub
    #[arg(long)]
    emit_detections: bool,

    /// Detector stub: relative box perturbation (0 reproduces the truth)
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    box_jitter: f64,

    /// Detector stub: class-score blur (0 gives one-hot scores)
    #[arg(long, value_name = "F", default_value_t = 0.0)]
    score_sigma: f64,

    /// Seed for the detector stub
    #[arg(long, value_name = "N", default_value_t = 1)]
    detection_seed: u64,
}

#[derive(Args)]
struct LabelsArgs {
    #[command(flatten)]
    data: DatasetArgs,

    /// Directory for labels.csv and label_counts.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,

    /// Directory for checkpoint.json and train_log.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Number of passes over the dataset
    #[arg(long, value_name = "N")]
    epochs: usize,

    /// Learning rate for plain gradient descent
    #[arg(long, value_name = "F", default_value_t = 0.005)]
    lr: f64,

    /// Per-epoch multiplier on the learning rate
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    lr_decay: f64,

    /// Pairs sampled per image (annotated pairs first)
    #[arg(long, value_name = "N", default_value_t = 512)]
    pairs_per_image: usize,

    /// Weights of the four auxiliary tasks, e.g. 1,1,1,1
    #[arg(long, value_name = "W1,W2,W3,W4", value_delimiter = ',',
          default_values_t = [1.0, 1.0, 1.0, 1.0])]
    weights: Vec<f64>,

    /// Images pooled into each gradient step
    #[arg(long, value_name = "N", default_value_t = 4)]
    batch_images: usize,

    /// Additive smoothing for the class-pair predicate statistics
    #[arg(long, value_name = "F", default_value_t = 1.0)]
    smoothing: f64,

    /// Seed for initialization and pair sampling
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,

    /// Train without the spatial module (and its auxiliary heads)
    #[arg(long)]
    no_spatial: bool,

    /// Train without the visual module (and its auxiliary heads)
    #[arg(long)]
    no_visual: bool,
}

/// Where eval/analyze get their per-pair predictions from: a checkpoint to
/// run, or a previously exported predictions file. Exactly one.
#[derive(Args)]
struct SourceArgs {
    /// Checkpoint to score the dataset with
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,

    /// Predictions file (JSON lines) to evaluate as-is
    #[arg(long, value_name = "PATH")]
    predictions: Option<PathBuf>,

    /// Detector outputs; required by sgcls/sgdet when running a checkpoint
    #[arg(long, value_name = "PATH")]
    detections: Option<PathBuf>,
}

impl SourceArgs {
    /// Produces per-image predictions for the dataset in the given mode.
    fn predictions(&self, dataset: &Dataset, mode: EvalMode) -> Result<Vec<Vec<RelationshipPrediction>>> {
        match (&self.checkpoint, &self.predictions) {
            (Some(_), Some(_)) => Err(Error::input(
                "--checkpoint and --predictions are mutually exclusive; pass one",
            )),
            (None, None) => Err(Error::input(
                "nothing to evaluate: pass --checkpoint or --predictions",
            )),
            (Some(ckpt), None) => {
                let model = load_checkpoint(ckpt)?;
                let det = match &self.detections {
                    Some(p) => Some(load_detections(p)?),
                    None => None,
                };
                predict_dataset(&model, dataset, mode, det.as_ref())
            }
            (None, Some(path)) => {
                let flat = load_predictions(path)?;
                group_predictions(flat, dataset)
            }
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    source: SourceArgs,

    /// Evaluation mode
    #[arg(long, value_name = "MODE", value_parser = parse_mode)]
    mode: EvalMode,

    /// Recall cut-offs
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_values_t = [20, 50, 100])]
    k: Vec<usize>,

    /// Confidence cut-offs for the threshold curves
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,

    /// Report one pooled recall ratio instead of the per-image mean
    #[arg(long)]
    micro_recall: bool,

    /// Rank every predicate of every pair instead of the best one per pair
    #[arg(long)]
    no_graph_constraint: bool,

    /// Directory for recall.csv, recall_by_type.csv, alpha.csv, nontrivial.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Also dump the evaluated predictions as JSON lines
    #[arg(long, value_name = "PATH")]
    predictions_out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    source: SourceArgs,

    /// Mode deciding which entities a checkpoint is scored with
    #[arg(long, value_name = "MODE", default_value = "predcls", value_parser = parse_mode)]
    mode: EvalMode,

    /// Confidence cut-offs for the threshold curves
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,

    /// Directory for alpha.csv and nontrivial.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportFeaturesArgs {
    #[command(flatten)]
    data: DatasetArgs,

    /// Checkpoint to score the dataset with
    #[arg(long, value_name = "PATH")]
    checkpoint: PathBuf,

    /// Directory for features.csv
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::input(format!("cannot create output directory {}: {e}", dir.display())))
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_images: args.images,
        min_objects: args.min_objects,
        max_objects: args.max_objects,
        width: args.width,
        height: args.height,
        num_classes: args.classes,
        d_vis: args.d_vis,
        label_noise: args.label_noise,
        feature_noise: args.feature_noise,
        seed: args.seed,
    };
    let dataset = generate(&cfg)?;
    ensure_out_dir(&args.out)?;
    let path = args.out.join("dataset.json");
    save_dataset(&dataset, &path)?;
    let triplets: usize = dataset.images.iter().map(|a| a.triplets.len()).sum();
    println!(
        "wrote {} ({} images, {} classes, {} predicates, {} triplets)",
        path.display(),
        dataset.images.len(),
        dataset.num_classes(),
        dataset.num_predicates(),
        triplets
    );
    if args.emit_detections {
        let det = detect(&dataset, args.box_jitter, args.score_sigma, args.detection_seed)?;
        let det_path = args.out.join("detections.json");
        save_detections(&det, &det_path)?;
        println!("wrote {}", det_path.display());
    }
    Ok(())
}

fn cmd_labels(args: &LabelsArgs) -> Result<()> {
    let dataset = args.data.load()?;
    ensure_out_dir(&args.out)?;
    let labels = args.out.join("labels.csv");
    let counts = args.out.join("label_counts.csv");
    write_labels_csv(&dataset, &labels)?;
    write_label_counts_csv(&dataset, &counts)?;
    println!("wrote {}", labels.display());
    println!("wrote {}", counts.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let dataset = args.data.load()?;
    if args.weights.len() != 4 {
        return Err(Error::config(format!(
            "--weights needs exactly four values, got {}",
            args.weights.len()
        )));
    }
    let mut config =
        RelNetConfig::new(dataset.num_classes(), dataset.num_predicates(), dataset.d_vis);
    if args.no_spatial {
        config.use_spatial = false;
    }
    if args.no_visual {
        config.use_visual = false;
    }
    let tc = TrainConfig {
        learning_rate: args.lr,
        lr_decay: args.lr_decay,
        epochs: args.epochs,
        pairs_per_image: args.pairs_per_image,
        loss_weights: [args.weights[0], args.weights[1], args.weights[2], args.weights[3]],
        seed: args.seed,
        batch_images: args.batch_images,
        smoothing: args.smoothing,
    };
    ensure_out_dir(&args.out)?;
    let (model, report) = train(&dataset, config, &tc)?;
    for e in &report.epochs {
        eprintln!(
            "# epoch {}/{} L {:.6} (L0 {:.6}) in {:.2}s",
            e.epoch, args.epochs, e.total, e.l0, e.seconds
        );
    }
    let ckpt = args.out.join("checkpoint.json");
    let log = args.out.join("train_log.csv");
    save_checkpoint(&model, &ckpt)?;
    write_train_log_csv(&report, &log)?;
    if let Some(last) = report.epochs.last() {
        println!("final epoch {}: L {} (L0 {})", last.epoch, last.total, last.l0);
    }
    println!("wrote {}", ckpt.display());
    println!("wrote {}", log.display());
    Ok(())
}

fn eval_config(
    mode: EvalMode,
    ks: Vec<usize>,
    thresholds: Option<Vec<f64>>,
    micro: bool,
    no_graph_constraint: bool,
) -> EvalConfig {
    EvalConfig {
        mode,
        ks,
        graph_constraint: !no_graph_constraint,
        micro,
        thresholds: thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec()),
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let predictions = args.source.predictions(&dataset, args.mode)?;
    let cfg = eval_config(
        args.mode,
        args.k.clone(),
        args.thresholds.clone(),
        args.micro_recall,
        args.no_graph_constraint,
    );
    let report = evaluate(&dataset, &predictions, &cfg)?;
    ensure_out_dir(&args.out)?;
    write_recall_csv(&report, &args.out.join("recall.csv"))?;
    write_recall_by_kind_csv(&report, &args.out.join("recall_by_type.csv"))?;
    write_alpha_csv(&report, &args.out.join("alpha.csv"))?;
    write_nontrivial_csv(&report, &args.out.join("nontrivial.csv"))?;
    if let Some(path) = &args.predictions_out {
        let flat: Vec<RelationshipPrediction> =
            predictions.iter().flatten().cloned().collect();
        save_predictions(&flat, path)?;
        println!("wrote {}", path.display());
    }
    for (k, r) in &report.recall {
        println!("{} R@{k} {r}", report.mode.as_str());
    }
    println!(
        "wrote {}, recall_by_type.csv, alpha.csv, nontrivial.csv",
        args.out.join("recall.csv").display()
    );
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let predictions = args.source.predictions(&dataset, args.mode)?;
    let cfg = eval_config(args.mode, vec![20], args.thresholds.clone(), false, false);
    let report = evaluate(&dataset, &predictions, &cfg)?;
    ensure_out_dir(&args.out)?;
    let alpha = args.out.join("alpha.csv");
    let nontrivial = args.out.join("nontrivial.csv");
    write_alpha_csv(&report, &alpha)?;
    write_nontrivial_csv(&report, &nontrivial)?;
    for row in &report.alpha {
        match row.alpha {
            Some(a) => println!(
                "threshold {}: geometric {} possessive {} ratio {a}",
                row.threshold, row.geometric, row.possessive
            ),
            None => println!(
                "threshold {}: geometric {} possessive {} ratio undefined",
                row.threshold, row.geometric, row.possessive
            ),
        }
    }
    println!("wrote {}", alpha.display());
    println!("wrote {}", nontrivial.display());
    Ok(())
}

fn cmd_export_features(args: &ExportFeaturesArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let model = load_checkpoint(&args.checkpoint)?;
    let rows = export_features(&model, &dataset)?;
    ensure_out_dir(&args.out)?;
    let path = args.out.join("features.csv");
    write_features_csv(&rows, dataset.num_predicates(), &path)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Labels(a) => cmd_labels(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::ExportFeatures(a) => cmd_export_features(a),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on its own for unknown/missing flags.
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
