//! `crcal`: confidence region prediction and CRC calibration from the
//! command line.
//!
//! Exit codes: 0 on success, 1 for invalid flags or input, 2 for internal
//! failures such as unwritable output.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use crcal::crc::{emit_crc_data, read_crc_table, write_crc_table};
use crcal::formats::{read_forecast_csv, write_region_csv};
use crcal::lab::pooled_crc_curve;
use crcal::svg::render_crc_svg;
use crcal::util::write_atomic;
use crcal::{
    build_regions_batch, check_theorem1, compute_crc_curve, perturb_forecaster, run_protocol,
    verdict, ConfidenceLevel, LearnerConfig, PreprocessScope, ProtocolOptions, SplitPlan,
    SyntheticTask,
};

const FORECAST_FORMAT: &str = "\
Forecast CSV: header `example_id,true_label,p_<label1>,...,p_<labelK>`. Label
names come from the `p_` columns. `true_label` holds a label name or is left
empty. Each row's probabilities must be non-negative and sum to 1 within 0.01;
they are renormalized before use.";

const REGION_FORMAT: &str = "\
Region CSV: header `example_id,delta,members,excluded_mass,err`. `members` lists
the region's labels joined by `;`, most probable first. `err` is 1 when the
true label is outside the region, 0 when inside, empty when unknown.";

const CRC_FORMAT: &str = "\
CRC CSV: header `confidence,delta,err,unc`, one row per grid point with delta
ascending from 0 to 1. `err` is the fraction of regions missing the true label,
`unc` the average fraction of labels included.";

#[derive(Parser)]
#[command(
    name = "crcal",
    version,
    about = "Turn probability forecasts into confidence regions and check their calibration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert probability forecasts into region predictions at one delta.
    #[command(after_long_help = format!("{FORECAST_FORMAT}\n\n{REGION_FORMAT}"))]
    Convert(ConvertArgs),
    /// Compute the CRC curve of labeled forecasts and its deviation areas.
    #[command(after_long_help = format!(
        "{FORECAST_FORMAT}\n\n{CRC_FORMAT}\n\nWrites crc.csv, summary.json and, with --svg, crc.svg into --out-dir."
    ))]
    Evaluate(EvaluateArgs),
    /// Train a built-in forecaster over repeated random splits and score it.
    #[command(after_long_help = format!(
        "Datasets are ARFF files with numeric and nominal attributes; the last \
attribute is the class. Seeds 0..N-1 select the splits.\n\nWrites report.json and \
crc_seed_<seed>.csv for every seed into --out-dir.\n\n{CRC_FORMAT}"
    ))]
    TrainEval(TrainEvalArgs),
    /// Check the finite-sample calibration bound on a synthetic task.
    #[command(after_long_help = "\
Samples --trials batches of --n labeled forecasts from a Bayes-optimal forecaster
(sharpened or flattened by --temperature) and counts batches whose region error
fraction at --delta reaches delta + epsilon. The JSON report carries the
verdict; the exit code is 0 whether or not the bound holds.")]
    Synth(SynthArgs),
    /// Render a CRC table as an SVG plot.
    #[command(after_long_help = CRC_FORMAT)]
    CrcPlot(CrcPlotArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Forecast CSV to read.
    #[arg(long, value_name = "PATH")]
    forecasts: PathBuf,
    /// Significance level in [0, 1]; regions are made at confidence 1 - delta.
    #[arg(long)]
    delta: f64,
    /// Region CSV to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Forecast CSV to read; every row needs a true label.
    #[arg(long, value_name = "PATH")]
    forecasts: PathBuf,
    /// Number of equal delta intervals in the CRC grid.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// Error-above-diagonal area up to which the curve counts as loosely calibrated.
    #[arg(long = "loose-tol", default_value_t = 1e-4)]
    loose_tol: f64,
    /// Directory for crc.csv, summary.json and crc.svg (created if missing).
    #[arg(long = "out-dir", value_name = "PATH")]
    out_dir: PathBuf,
    /// Also write crc.svg.
    #[arg(long)]
    svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Learner {
    Dwknn,
    Naivebayes,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Train,
    All,
}

#[derive(Args)]
struct TrainEvalArgs {
    /// ARFF dataset to read.
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    /// Forecaster to train.
    #[arg(long, value_enum)]
    learner: Learner,
    /// Neighbour count; required for dwknn, rejected for naivebayes.
    #[arg(long)]
    k: Option<usize>,
    /// Number of random splits, seeded 0..N-1.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Fraction of rows used for training.
    #[arg(long = "train-frac", default_value_t = 0.66)]
    train_frac: f64,
    /// Rows supplying normalization and imputation statistics.
    #[arg(long = "preprocess-scope", value_enum, default_value = "train")]
    preprocess_scope: Scope,
    /// Number of equal delta intervals in the CRC grid.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// Error-above-diagonal area up to which a curve counts as loosely calibrated.
    #[arg(long = "loose-tol", default_value_t = 1e-4)]
    loose_tol: f64,
    /// Directory for report.json and the per-seed CRC tables (created if missing).
    #[arg(long = "out-dir", value_name = "PATH")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Batch size.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Number of labels.
    #[arg(long, default_value_t = 3)]
    labels: usize,
    /// Significance level in (0, 1).
    #[arg(long)]
    delta: f64,
    /// Excess error in [0, 1) counted as a failure.
    #[arg(long)]
    epsilon: f64,
    /// Number of independent batches.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Forecast temperature; 1 is Bayes-optimal, below 1 overconfident.
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Master seed of the task and all trials.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pooled-curve grid intervals reported next to the bound check.
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// JSON report to write.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct CrcPlotArgs {
    /// CRC CSV to read.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// SVG file to write.
    #[arg(long, value_name = "PATH")]
    svg: PathBuf,
}

/// A failed run and its exit code.
#[derive(Debug)]
enum Failure {
    Input(String),
    Internal(String),
}

impl From<crcal::Error> for Failure {
    fn from(e: crcal::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Internal(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: crcal::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn ensure_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))
}

fn json_bytes(value: &Value) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn convert(args: ConvertArgs) -> Outcome {
    let level = ConfidenceLevel::new(args.delta)?;
    let (space, forecasts) = with_path(&args.forecasts, read_forecast_csv(open(&args.forecasts)?))?;
    let regions = build_regions_batch(&forecasts, level)?;
    let labels: Vec<_> = forecasts.iter().map(|f| f.true_label()).collect();
    let mut out = Vec::new();
    write_region_csv(&space, &regions, &labels, &mut out)?;
    write_atomic(&args.out, &out)?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Outcome {
    let (_, forecasts) = with_path(&args.forecasts, read_forecast_csv(open(&args.forecasts)?))?;
    let curve = compute_crc_curve(&forecasts, args.grid)?;
    let v = verdict(&curve, args.loose_tol)?;
    ensure_dir(&args.out_dir)?;
    emit_crc_data(&curve, &v, &args.out_dir, args.svg)?;
    println!(
        "n={} err_above_area={} avg_width_area={} strict={} loose={}",
        curve.n(),
        v.err_above_area,
        v.avg_width_area,
        v.strict_calibrated,
        v.loose_calibrated
    );
    Ok(())
}

fn train_eval(args: TrainEvalArgs) -> Outcome {
    let config = match (args.learner, args.k) {
        (Learner::Dwknn, Some(k)) => LearnerConfig::dwknn(k),
        (Learner::Dwknn, None) => return Err(Failure::Input("--learner dwknn needs --k".into())),
        (Learner::Naivebayes, None) => LearnerConfig::naive_bayes(),
        (Learner::Naivebayes, Some(_)) => {
            return Err(Failure::Input("--k only applies to --learner dwknn".into()))
        }
    };
    let plan = SplitPlan::with_seed_count(args.train_frac, args.seeds)?;
    let options = ProtocolOptions {
        grid_intervals: args.grid,
        loose_tolerance: args.loose_tol,
        scope: match args.preprocess_scope {
            Scope::Train => PreprocessScope::Train,
            Scope::All => PreprocessScope::All,
        },
    };
    let data = with_path(&args.dataset, crcal::arff::parse_arff(open(&args.dataset)?))?;
    let run = run_protocol(&data, &config, &plan, &options)?;

    // render everything before touching the output directory
    let mut files = Vec::with_capacity(run.runs.len() + 1);
    for r in &run.runs {
        let mut table = Vec::new();
        write_crc_table(&r.curve, &mut table)?;
        files.push((format!("crc_seed_{}.csv", r.seed), table));
    }
    files.push(("report.json".to_string(), json_bytes(&serde_json::to_value(&run.report)?)?));
    ensure_dir(&args.out_dir)?;
    for (name, bytes) in &files {
        write_atomic(&args.out_dir.join(name), bytes)?;
    }
    let m = &run.report.mean;
    println!(
        "error_rate={}% square_loss={} crc_err_above_area={} crc_avg_width_area={}",
        m.error_rate_percent, m.square_loss, m.crc_err_above_area, m.crc_avg_width_area
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Outcome {
    let task = perturb_forecaster(&SyntheticTask::default_task(args.labels, args.seed)?, args.temperature)?;
    let check = check_theorem1(&task, args.n, args.delta, args.epsilon, args.trials)?;
    let pooled = pooled_crc_curve(&task, args.n, args.trials, args.grid)?;
    let v = verdict(&pooled, crcal::crc::DEFAULT_LOOSE_TOLERANCE)?;

    let mut report = serde_json::to_value(check)?;
    if let Some(obj) = report.as_object_mut() {
        obj.insert("pooled_err_above_area".into(), v.err_above_area.into());
        obj.insert("pooled_avg_width_area".into(), v.avg_width_area.into());
    }
    write_atomic(&args.out, &json_bytes(&report)?)?;
    println!(
        "observed_failure_freq={} bound={} pass={}",
        check.observed_failure_freq, check.bound, check.pass
    );
    Ok(())
}

fn crc_plot(args: CrcPlotArgs) -> Outcome {
    let curve = with_path(&args.input, read_crc_table(open(&args.input)?))?;
    write_atomic(&args.svg, render_crc_svg(&curve).as_bytes())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Convert(a) => convert(a),
        Command::Evaluate(a) => evaluate(a),
        Command::TrainEval(a) => train_eval(a),
        Command::Synth(a) => synth(a),
        Command::CrcPlot(a) => crc_plot(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}
