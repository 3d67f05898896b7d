//! Command-line front end: decode per-frame streams into events, score them,
//! diagnose count mismatches, derive class weights, and generate synthetic
//! fixtures.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gievents::eval::DEFAULT_MISMATCH_FACTOR;
use gievents::io::{
    load_label_matrix, load_probability_stream, load_score_stream, read_events, write_events,
    write_label_csv, write_probability_csv,
};
use gievents::synth::load_synthetic_spec;
use gievents::{
    class_weights, decode_scores, decode_stream, evaluate, segment_count_report, synthesize,
    ClassCounts, CompositionMode, DecoderKind, EvalConfig, EventSet, HmmConfig, HysteresisConfig,
    LabelSpace, PipelineOptions, RunConfig, CLASS_COUNT,
};

#[derive(Parser)]
#[command(name = "gievents", version, about = "Temporal event toolkit for per-frame label streams")]
struct Cli {
    /// Run configuration file (TOML). Command-line flags override its values.
    #[arg(long, global = true, env = "GIEVENTS_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a per-frame probability (or raw score) CSV into an events file.
    Decode(DecodeArgs),
    /// Score predicted events against ground truth at several IoU thresholds.
    Eval(EvalArgs),
    /// Compare predicted and ground-truth segment counts per video and class.
    Debug(DebugArgs),
    /// Derive clipped per-class loss weights from a binary label CSV.
    Weights(WeightsArgs),
    /// Generate a synthetic probability stream, label matrix, and ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DecodeArgs {
    /// Per-frame CSV input (probabilities, or raw scores with --scores).
    #[arg(long, value_name = "PATH")]
    input: PathBuf,

    /// Events JSON output path.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,

    /// Video identifier; defaults to the input file name minus role suffixes.
    #[arg(long, value_name = "ID")]
    video_id: Option<String>,

    /// Treat the input as raw real-valued scores and map each through
    /// sigmoid(score / temperature) before decoding.
    #[arg(long)]
    scores: bool,

    /// Decoder: "hysteresis" or "viterbi".
    #[arg(long, value_name = "KIND")]
    decoder: Option<DecoderKind>,

    /// Hysteresis turn-on threshold.
    #[arg(long, value_name = "P")]
    t_on: Option<f64>,

    /// Hysteresis turn-off threshold.
    #[arg(long, value_name = "P")]
    t_off: Option<f64>,

    /// Minimum event length in frames; shorter runs are erased.
    #[arg(long, value_name = "FRAMES")]
    min_len: Option<usize>,

    /// Viterbi self-transition probability.
    #[arg(long, value_name = "P")]
    stay_prob: Option<f64>,

    /// Temperature for the score-to-probability map (requires --scores).
    #[arg(long, value_name = "T")]
    temperature: Option<f64>,

    /// Majority-vote window radius for the anatomy track.
    #[arg(long, value_name = "FRAMES")]
    vote_radius: Option<usize>,

    /// Event composition: "gt_style" or "per_label".
    #[arg(long, value_name = "MODE")]
    composition: Option<CompositionMode>,

    /// Skip anatomy gating even if the configuration enables it.
    #[arg(long)]
    no_gating: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted event JSON files (repeat or list for several videos).
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    pred: Vec<PathBuf>,

    /// Ground-truth event JSON files, one per predicted video.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    gt: Vec<PathBuf>,

    /// Comma-separated IoU thresholds in (0, 1].
    #[arg(long, value_delimiter = ',', value_name = "T,T,...")]
    thresholds: Option<Vec<f64>>,

    /// Also write the full report as JSON.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DebugArgs {
    /// Predicted event JSON files.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    pred: Vec<PathBuf>,

    /// Ground-truth event JSON files.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    gt: Vec<PathBuf>,

    /// Flag a video/class pair when one side exceeds the other by this factor.
    #[arg(long, value_name = "F", default_value_t = DEFAULT_MISMATCH_FACTOR)]
    factor: f64,

    /// Also write the report as JSON.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    /// Binary label CSV (one row per frame).
    #[arg(long, value_name = "PATH")]
    labels: PathBuf,

    /// Lower clipping bound for the neg/pos ratio.
    #[arg(long, value_name = "W")]
    w_min: Option<f64>,

    /// Upper clipping bound for the neg/pos ratio.
    #[arg(long, value_name = "W")]
    w_max: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic stream specification (TOML).
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,

    /// Directory for <video_id>.probs.csv, .labels.csv, and .gt.json.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// RNG seed; overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() {
    if let Err(err) = run() {
        // Downstream consumers like `head` may close stdout early; that is
        // not a failure of this process.
        if is_broken_pipe(&err) {
            std::process::exit(0);
        }
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Decode(args) => decode(&config, args),
        Command::Eval(args) => eval(&config, args),
        Command::Debug(args) => debug(&config, args),
        Command::Weights(args) => weights(&config, args),
        Command::Synth(args) => synth(&config, args),
    }
}

fn decode(config: &RunConfig, args: DecodeArgs) -> Result<()> {
    if args.temperature.is_some() && !args.scores {
        bail!("--temperature only applies to raw score inputs; pass --scores as well");
    }
    let mut options = PipelineOptions::from_config(config);
    if let Some(radius) = args.vote_radius {
        options.vote_radius = radius;
    }
    if let Some(kind) = args.decoder {
        options.decoder = kind;
    }
    if args.t_on.is_some() || args.t_off.is_some() || args.min_len.is_some() {
        options.hysteresis = HysteresisConfig::new(
            args.t_on.unwrap_or(options.hysteresis.t_on),
            args.t_off.unwrap_or(options.hysteresis.t_off),
            args.min_len.unwrap_or(options.hysteresis.min_len),
        )?;
    }
    if args.stay_prob.is_some() || args.temperature.is_some() {
        options.hmm = HmmConfig::new(
            args.stay_prob.unwrap_or(options.hmm.stay_prob),
            args.temperature.unwrap_or(options.hmm.temperature),
        )?;
    }
    if let Some(mode) = args.composition {
        options.composition = mode;
    }
    if args.no_gating {
        options.gating = None;
    }

    let space = &config.space;
    let events = if args.scores {
        let mut stream = load_score_stream(&args.input, space)?;
        if let Some(id) = args.video_id {
            stream.video_id = id;
        }
        decode_scores(&stream, space, &options)?
    } else {
        let mut stream = load_probability_stream(&args.input, space)?;
        if let Some(id) = args.video_id {
            stream.video_id = id;
        }
        decode_stream(&stream, space, &options)?
    };
    write_events(&args.output, &events, space)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "decoded {} frames of '{}' into {} event(s) -> {}",
        events.frame_count,
        events.video_id,
        events.events.len(),
        args.output.display()
    )?;
    Ok(())
}

fn eval(config: &RunConfig, args: EvalArgs) -> Result<()> {
    let space = &config.space;
    let preds = read_event_files(&args.pred, space)?;
    let gts = read_event_files(&args.gt, space)?;
    let eval_config = match args.thresholds {
        Some(thresholds) => EvalConfig::new(thresholds)?,
        None => config.eval.clone(),
    };
    let report = evaluate(&preds, &gts, &eval_config, space)?;
    let mut out = std::io::stdout().lock();
    write!(out, "{report}")?;
    if let Some(path) = &args.output {
        write_json(path, &report)?;
        writeln!(out, "report written to {}", path.display())?;
    }
    Ok(())
}

fn debug(config: &RunConfig, args: DebugArgs) -> Result<()> {
    let space = &config.space;
    let preds = read_event_files(&args.pred, space)?;
    let gts = read_event_files(&args.gt, space)?;
    let report = segment_count_report(&preds, &gts, space, args.factor);
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "segment counts: {} predicted vs {} ground truth (mismatch factor {})",
        report.total_predicted, report.total_ground_truth, report.mismatch_factor
    )?;
    let name_width = report
        .rows
        .iter()
        .map(|r| r.video_id.len().max(r.class.len()))
        .max()
        .unwrap_or(8)
        .max(8);
    writeln!(
        out,
        "{:<name_width$}  {:<name_width$}  {:>9}  {:>12}",
        "video", "class", "predicted", "ground_truth"
    )?;
    let mut flagged = 0usize;
    for row in &report.rows {
        let mark = if row.flagged {
            flagged += 1;
            "  <-- mismatch"
        } else {
            ""
        };
        writeln!(
            out,
            "{:<name_width$}  {:<name_width$}  {:>9}  {:>12}{}",
            row.video_id, row.class, row.predicted, row.ground_truth, mark
        )?;
    }
    writeln!(out, "{flagged} of {} video/class pair(s) flagged", report.rows.len())?;
    if let Some(path) = &args.output {
        write_json(path, &report)?;
        writeln!(out, "report written to {}", path.display())?;
    }
    Ok(())
}

fn weights(config: &RunConfig, args: WeightsArgs) -> Result<()> {
    let space = &config.space;
    let matrix = load_label_matrix(&args.labels, space)?;
    let counts = ClassCounts::from_labels(&matrix)?;
    let w_min = args.w_min.unwrap_or(config.w_min);
    let w_max = args.w_max.unwrap_or(config.w_max);
    let weights = class_weights(&counts, w_min, w_max)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "class weights over {} frame(s), bounds [{w_min}, {w_max}]",
        matrix.frame_count()
    )?;
    writeln!(out, "{:<16} {:>9} {:>9} {:>10}", "class", "positives", "negatives", "weight")?;
    for c in 0..CLASS_COUNT {
        writeln!(
            out,
            "{:<16} {:>9} {:>9} {:>10.4}",
            space.class_name(c),
            counts.pos[c],
            counts.neg[c],
            weights.get(c)
        )?;
    }
    Ok(())
}

fn synth(config: &RunConfig, args: SynthArgs) -> Result<()> {
    let space = &config.space;
    let spec = load_synthetic_spec(&args.spec, space)?;
    let seed = args.seed.unwrap_or(config.synth_seed);
    let data = synthesize(&spec, &config.prior, seed)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let probs_path = args.out_dir.join(format!("{}.probs.csv", spec.video_id));
    let labels_path = args.out_dir.join(format!("{}.labels.csv", spec.video_id));
    let gt_path = args.out_dir.join(format!("{}.gt.json", spec.video_id));
    write_probability_csv(&probs_path, &data.probs, space)?;
    write_label_csv(&labels_path, &data.labels, space)?;
    write_events(&gt_path, &data.ground_truth, space)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "synthesized {} frame(s) of '{}' with seed {seed}",
        spec.frames, spec.video_id
    )?;
    writeln!(out, "  {}", probs_path.display())?;
    writeln!(out, "  {}", labels_path.display())?;
    writeln!(out, "  {}", gt_path.display())?;
    Ok(())
}

fn read_event_files(paths: &[PathBuf], space: &LabelSpace) -> Result<Vec<EventSet>> {
    paths.iter().map(|p| Ok(read_events(p, space)?)).collect()
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
