//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on validation errors (including bad
//! arguments), 2 on I/O errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::domain::{Dataset, SignificanceLevel};
use crate::error::{Error, Result};
use crate::icp::SplitConfig;
use crate::io::{load_dataset, write_dataset, ClassNames, Schema};
use crate::nonconformity::{Measure, TrainingBag};
use crate::online::{run_online, TrajectoryPoint};
use crate::pipeline::{run_pipeline, write_regions, PipelineSettings, RunConfig};
use crate::report::{emit_report, parse_report_json, Format};
use crate::synth::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "binconf", version, about = "Conformal prediction for binary classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write per-sample p-values and regions for a test set.
    Predict {
        #[command(flatten)]
        run: RunArgs,
        /// Region CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate, predict and report every metric.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Report format.
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        /// Report destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-sample region CSV here.
        #[arg(long)]
        regions: Option<PathBuf>,
    },
    /// Run full conformal prediction in the on-line protocol.
    SimulateOnline(OnlineArgs),
    /// Generate a two-class Gaussian dataset.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        /// Dataset CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a JSON report in another format.
    Report {
        /// JSON report written by `evaluate --format json`.
        #[arg(long)]
        input: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        /// Destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    KnnRatio,
    KnnProb,
    Passthrough,
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    /// Significance level(s) ε; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    /// Confidence level(s) in percent, converted to ε = 1 − N/100.
    #[arg(long, value_delimiter = ',')]
    pub confidence: Vec<f64>,
}

impl SignificanceArgs {
    pub fn levels(&self) -> Result<Vec<SignificanceLevel>> {
        let mut out = self
            .epsilon
            .iter()
            .map(|&e| SignificanceLevel::new(e))
            .chain(self.confidence.iter().map(|&c| SignificanceLevel::from_confidence(c)))
            .collect::<Result<Vec<_>>>()?;
        if out.is_empty() {
            out.push(SignificanceLevel::new(0.2)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Args)]
pub struct ClassArgs {
    /// Class name mapped to the positive label.
    #[arg(long)]
    pub positive_class: String,
    /// Class name mapped to the negative label (the other name seen when
    /// omitted).
    #[arg(long)]
    pub negative_class: Option<String>,
}

impl ClassArgs {
    fn names(&self) -> ClassNames {
        ClassNames::new(self.positive_class.clone(), self.negative_class.clone())
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Labelled data to split into proper training and calibration sets.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Proper training set (feature-based measures), used with --calibration.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Calibration set, used as-is.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Test set.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub classes: ClassArgs,
    #[command(flatten)]
    pub significance: SignificanceArgs,
    /// Nonconformity measure; passthrough uses the s_pos/s_neg columns.
    #[arg(long, value_enum, default_value_t = MeasureArg::Passthrough)]
    pub measure: MeasureArg,
    /// Neighbour count for the k-NN measures.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Pool calibration scores across classes instead of Mondrian tables.
    #[arg(long)]
    pub pooled: bool,
    /// Proper training fraction when splitting --data.
    #[arg(long, default_value_t = 0.7)]
    pub fraction: f64,
    /// Seed for the ChaCha8 generator used by the split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split each class separately so both parts keep the class balance.
    #[arg(long)]
    pub stratified: bool,
}

fn measure(arg: MeasureArg, k: usize) -> Result<Measure> {
    if k == 0 {
        return Err(Error::InvalidArgument("--k must be positive".into()));
    }
    Ok(match arg {
        MeasureArg::KnnRatio => Measure::KnnRatio { k },
        MeasureArg::KnnProb => Measure::KnnProbability { k },
        MeasureArg::Passthrough => Measure::Passthrough,
    })
}

impl RunArgs {
    pub fn config(&self) -> Result<RunConfig> {
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "--fraction must lie in (0, 1), got {}",
                self.fraction
            )));
        }
        Ok(RunConfig {
            data: self.data.clone(),
            train: self.train.clone(),
            calibration: self.calibration.clone(),
            test: self.test.clone(),
            classes: self.classes.names(),
            settings: PipelineSettings {
                measure: measure(self.measure, self.k)?,
                mondrian: !self.pooled,
                split: SplitConfig {
                    proper_fraction: self.fraction,
                    seed: self.seed,
                    stratified: self.stratified,
                },
                epsilons: self.significance.levels()?,
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Seed for the ChaCha8 generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_per_class: self.n_per_class,
            dim: self.dim,
            separation: self.separation,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    /// Feature dataset giving the stream in row order. When omitted a
    /// synthetic stream is generated from the --n-per-class/... options.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Required with --data.
    #[arg(long)]
    pub positive_class: Option<String>,
    /// Class name mapped to the negative label.
    #[arg(long)]
    pub negative_class: Option<String>,
    /// Leading examples that form the initial bag.
    #[arg(long, default_value_t = 10)]
    pub initial: usize,
    /// Neighbour count for the distance ratio.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Significance level ε (default 0.2).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Confidence level in percent (alternative to --epsilon).
    #[arg(long)]
    pub confidence: Option<f64>,
    #[command(flatten)]
    pub synth: SynthArgs,
    /// Trajectory CSV destination (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Settings for an on-line simulation over a dataset's rows.
#[derive(Debug, Clone)]
pub struct OnlineConfig {
    pub initial: usize,
    pub k: usize,
    pub epsilon: SignificanceLevel,
}

impl OnlineArgs {
    fn significance(&self) -> Result<SignificanceLevel> {
        match (self.epsilon, self.confidence) {
            (Some(_), Some(_)) => Err(Error::InvalidArgument(
                "give --epsilon or --confidence, not both".into(),
            )),
            (Some(e), None) => SignificanceLevel::new(e),
            (None, Some(c)) => SignificanceLevel::from_confidence(c),
            (None, None) => SignificanceLevel::new(0.2),
        }
    }

    fn dataset(&self) -> Result<Dataset> {
        match &self.data {
            Some(path) => {
                let positive = self.positive_class.clone().ok_or_else(|| {
                    Error::InvalidArgument("--positive-class is required with --data".into())
                })?;
                let mut classes = ClassNames::new(positive, self.negative_class.clone());
                load_dataset(path, Some(Schema::Features), &mut classes)
            }
            None => generate_synthetic(&self.synth.spec()),
        }
    }
}

/// Splits `data` into the initial bag (first `initial` rows) and the stream
/// (the rest), then runs the on-line protocol.
pub fn simulate_online(data: &Dataset, config: &OnlineConfig) -> Result<Vec<TrajectoryPoint>> {
    if config.initial == 0 || config.initial >= data.len() {
        return Err(Error::InvalidArgument(format!(
            "--initial must lie in 1..{}, got {}",
            data.len(),
            config.initial
        )));
    }
    let mut examples = data
        .iter()
        .map(|s| Ok((s.require_features()?.clone(), s.require_label()?)))
        .collect::<Result<Vec<_>>>()?;
    let stream = examples.split_off(config.initial);
    let bag = TrainingBag::new(examples)?;
    run_online(bag, config.k, stream, config.epsilon)
}

/// Trajectory CSV: `round,region,true_label,cumulative_error_rate`.
pub fn trajectory_csv(trajectory: &[TrajectoryPoint]) -> Vec<u8> {
    let mut out = String::from("round,region,true_label,cumulative_error_rate\n");
    for t in trajectory {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.round,
            t.region,
            t.true_label.as_str(),
            t.cumulative_error_rate
        ));
    }
    out.into_bytes()
}

fn write_to(path: &Option<PathBuf>, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => stdout.write_all(bytes)?,
    }
    Ok(())
}

/// Executes a parsed command, writing stdout-bound output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Predict { run, out } => {
            let config = run.config()?;
            if config.test.is_none() {
                return Err(Error::InvalidArgument("predict needs --test".into()));
            }
            let output = run_pipeline(&config)?;
            let mut buf = Vec::new();
            write_regions(&output.predictions, &config.classes, &mut buf)?;
            write_to(&out, &buf, stdout)
        }
        Command::Evaluate {
            run,
            format,
            out,
            regions,
        } => {
            let config = run.config()?;
            let output = run_pipeline(&config)?;
            if config.test.is_some() && output.report.evaluations.is_empty() {
                return Err(Error::InvalidArgument(
                    "evaluate needs a fully labelled test set".into(),
                ));
            }
            if let Some(path) = &regions {
                let mut buf = Vec::new();
                write_regions(&output.predictions, &config.classes, &mut buf)?;
                std::fs::write(path, buf)?;
            }
            write_to(&out, &emit_report(&output.report, format.into()), stdout)
        }
        Command::SimulateOnline(args) => {
            let config = OnlineConfig {
                initial: args.initial,
                k: args.k,
                epsilon: args.significance()?,
            };
            let data = args.dataset()?;
            let trajectory = simulate_online(&data, &config)?;
            write_to(&args.out, &trajectory_csv(&trajectory), stdout)
        }
        Command::Synth { synth, out } => {
            let data = generate_synthetic(&synth.spec())?;
            let mut buf = Vec::new();
            write_dataset(&data, &ClassNames::canonical(), &mut buf)?;
            write_to(&out, &buf, stdout)
        }
        Command::Report { input, format, out } => {
            let bytes = std::fs::read(&input)?;
            let report = parse_report_json(&bytes)?;
            write_to(&out, &emit_report(&report, format.into()), stdout)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
