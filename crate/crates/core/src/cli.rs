//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success (for `run`: verification passed)            |
//! | 1    | `run`: verification failed                          |
//! | 2    | usage error                                         |
//! | 3    | I/O, parse, data or configuration error             |
//! | 4    | `run`: trace ended before verification finished     |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::capture::CaptureMode;
use crate::cascade::Profiles;
use crate::controller::{Controller, ControllerConfig, Event, EventKind, Phase};
use crate::data::{self, Delimiter, FormatOptions, SynthSpec, Waveform};
use crate::error::{GadError, Result};
use crate::eval::{self, EvalConfig};
use crate::lstm::DEFAULT_SEED;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;
pub const EXIT_INCOMPLETE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "gad", version, about = "Real-time gait anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay one trace through a full session and write its events.
    Run(RunArgs),
    /// Write a synthetic gait trace.
    Synth(SynthArgs),
    /// Write a synthetic cohort, one trace file per subject.
    Cohort(CohortArgs),
    /// Run verification and impersonation over a cohort directory.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Personalized,
    Uniform,
}

impl From<ModeArg> for CaptureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Personalized => CaptureMode::Personalized,
            ModeArg::Uniform => CaptureMode::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DelimiterArg {
    Auto,
    Comma,
    Tab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WaveformArg {
    Sine,
    Sawtooth,
    TwoHarmonic,
}

#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    #[arg(long, value_enum, default_value = "personalized", env = "GAD_MODE")]
    pub mode: ModeArg,
    /// Step length used in uniform mode.
    #[arg(long = "uniform-L", default_value_t = 46, env = "GAD_UNIFORM_L")]
    pub uniform_l: usize,
    /// Verification steps.
    #[arg(long = "F", default_value_t = 2, env = "GAD_F")]
    pub verification_steps: usize,
    /// Seed for every model's weight initialization.
    #[arg(long, default_value_t = DEFAULT_SEED, env = "GAD_SEED")]
    pub seed: u64,
    /// Learning rate override for the two converter stages.
    #[arg(long)]
    pub converter_lr: Option<f64>,
    /// Learning rate override for the two detector stages.
    #[arg(long)]
    pub detector_lr: Option<f64>,
    /// Epoch cap override for the converter stages.
    #[arg(long)]
    pub converter_epochs: Option<usize>,
    /// Epoch cap override for the detector stages.
    #[arg(long)]
    pub detector_epochs: Option<usize>,
}

impl SessionArgs {
    pub fn controller_config(&self) -> Result<ControllerConfig> {
        let mut profiles = Profiles::default().with_seed(self.seed);
        if let Some(lr) = self.converter_lr {
            profiles.converter.learning_rate = lr;
        }
        if let Some(lr) = self.detector_lr {
            profiles.detector.learning_rate = lr;
        }
        if let Some(e) = self.converter_epochs {
            profiles.converter.max_epochs = e;
        }
        if let Some(e) = self.detector_epochs {
            profiles.detector.max_epochs = e;
        }
        let mut config = ControllerConfig {
            profiles,
            verification_steps: self.verification_steps,
            ..ControllerConfig::default()
        };
        config.capture.mode = self.mode.into();
        config.capture.uniform_step = self.uniform_l;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FormatArgs {
    /// Input has a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub delimiter: DelimiterArg,
    /// Zero-based x,y,z column indices.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0usize, 1, 2])]
    pub columns: Vec<usize>,
}

impl FormatArgs {
    pub fn options(&self) -> Result<FormatOptions> {
        let columns: [usize; 3] = self
            .columns
            .as_slice()
            .try_into()
            .map_err(|_| GadError::Config("--columns takes exactly three indices".into()))?;
        Ok(FormatOptions {
            delimiter: match self.delimiter {
                DelimiterArg::Auto => Delimiter::Auto,
                DelimiterArg::Comma => Delimiter::Comma,
                DelimiterArg::Tab => Delimiter::Tab,
            },
            header: self.header,
            columns,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Accelerometer trace, one x,y,z sample per row.
    #[arg(long, env = "GAD_INPUT")]
    pub input: PathBuf,
    /// Event file, one JSON object per line.
    #[arg(long, env = "GAD_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub session: SessionArgs,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, env = "GAD_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    pub period: f64,
    #[arg(long, default_value_t = 2.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 9.8)]
    pub baseline: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 4000)]
    pub n: usize,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "sine")]
    pub waveform: WaveformArg,
    /// Waveform shift in samples.
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CohortArgs {
    #[arg(long = "cohort-dir", env = "GAD_COHORT_DIR")]
    pub cohort_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub subjects: usize,
    #[arg(long, default_value_t = 32.0)]
    pub min_period: f64,
    #[arg(long, default_value_t = 72.0)]
    pub max_period: f64,
    #[arg(long, default_value_t = 1400)]
    pub n: usize,
    /// Seed for the cohort layout and every subject's noise.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long = "cohort-dir", env = "GAD_COHORT_DIR")]
    pub cohort_dir: PathBuf,
    /// Output directory for the report files.
    #[arg(long, env = "GAD_OUT")]
    pub out: PathBuf,
    #[arg(long = "early-window", default_value_t = eval::DEFAULT_EARLY_WINDOW, env = "GAD_EARLY_WINDOW")]
    pub early_window: u64,
    #[arg(long, default_value_t = eval::DEFAULT_HISTOGRAM_BIN)]
    pub bin_width: u64,
    /// Cap on post-verification samples replayed per pair.
    #[arg(long)]
    pub probe_len: Option<usize>,
    #[command(flatten)]
    pub session: SessionArgs,
    #[command(flatten)]
    pub format: FormatArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Passed,
    Failed,
    Incomplete,
}

/// Replays a trace through one session: generate, verify, then detect on
/// the rest. Returns the events in arrival order.
pub fn session_events(values: &[f64], config: ControllerConfig) -> Result<(Vec<Event>, RunOutcome)> {
    let mut ctrl = Controller::new(config)?;
    ctrl.request_generate()?;
    let mut events = Vec::new();
    let mut outcome = RunOutcome::Incomplete;
    for &v in values {
        if ctrl.phase() == Phase::Verified {
            ctrl.request_detect()?;
        }
        let batch = ctrl.on_ram(v)?;
        for e in &batch {
            match e.kind {
                EventKind::VerificationPassed => outcome = RunOutcome::Passed,
                EventKind::VerificationFailed => outcome = RunOutcome::Failed,
                _ => {}
            }
        }
        events.extend(batch);
        if ctrl.phase() == Phase::Idle {
            break;
        }
    }
    Ok((events, outcome))
}

pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome> {
    let config = args.session.controller_config()?;
    let trace = data::read_trace(&args.input, &args.format.options()?)?;
    let (events, outcome) = session_events(&trace.ram_values()?, config)?;
    let mut buf = Vec::new();
    for e in &events {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    fs::write(&args.out, buf)?;
    Ok(outcome)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        period: args.period,
        amplitude: args.amplitude,
        baseline: args.baseline,
        noise_sigma: args.noise,
        n: args.n,
        seed: args.seed,
        waveform: match args.waveform {
            WaveformArg::Sine => Waveform::Sine,
            WaveformArg::Sawtooth => Waveform::Sawtooth,
            WaveformArg::TwoHarmonic => Waveform::TwoHarmonic,
        },
        phase: args.phase,
    };
    let subject = args
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let trace = data::synth_trace(subject, &spec)?;
    data::write_trace_file(&trace, &args.out)
}

pub fn cmd_cohort(args: &CohortArgs) -> Result<()> {
    let specs = data::cohort_specs(args.subjects, (args.min_period, args.max_period), args.n, args.seed)?;
    fs::create_dir_all(&args.cohort_dir)?;
    for (id, spec) in specs {
        let trace = data::synth_trace(id.clone(), &spec)?;
        data::write_trace_file(&trace, &args.cohort_dir.join(format!("{id}.csv")))?;
    }
    Ok(())
}

/// Trace files in a cohort directory, sorted by name.
pub fn cohort_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("csv" | "tsv" | "txt")
                )
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let files = cohort_files(&args.cohort_dir)?;
    if files.len() < 2 {
        return Err(GadError::Usage(format!(
            "cohort directory holds {} trace(s); evaluation needs at least 2",
            files.len()
        )));
    }
    let options = args.format.options()?;
    let traces = files
        .iter()
        .map(|p| data::read_trace(p, &options))
        .collect::<Result<Vec<_>>>()?;
    let config = EvalConfig {
        controller: args.session.controller_config()?,
        early_window: args.early_window,
        histogram_bin: args.bin_width,
        probe_len: args.probe_len,
    };

    fs::create_dir_all(&args.out)?;
    let verification = eval::run_verification(&traces, &config)?;
    eval::write_verification_csv(&verification.summary, create(&args.out.join("verification.csv"))?)?;

    let report = eval::run_impersonation(&verification.enrolled, &config)?;
    eval::write_pairs_csv(&report.results, create(&args.out.join("pairs.csv"))?)?;
    eval::write_pairs_csv(&report.controls, create(&args.out.join("controls.csv"))?)?;
    eval::write_pairs_jsonl(&report, create(&args.out.join("pairs.jsonl"))?)?;
    let hist = eval::latency_histogram(&report.results, config.histogram_bin, config.early_window)?;
    eval::write_histogram_csv(&hist, create(&args.out.join("latency_histogram.csv"))?)?;

    let summary = serde_json::json!({
        "mode": config.mode().to_string(),
        "verification": {
            "passed": verification.summary.passed,
            "failed": verification.summary.failed,
            "total": verification.summary.total,
        },
        "impersonation": {
            "pairs": report.pairs,
            "detected": report.detected,
            "ratio": report.ratio,
            "false_positive_rate": report.false_positive_rate,
        },
        "latency": {
            "early_window": hist.early_window,
            "early_count": hist.early_count,
            "early_fraction": hist.early_fraction,
        },
    });
    let mut out = create(&args.out.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn exit_code(err: &GadError) -> i32 {
    match err {
        GadError::Usage(_) => EXIT_USAGE,
        _ => EXIT_ERROR,
    }
}

/// Parses `args` and runs the selected command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a).map(|o| match o {
            RunOutcome::Passed => EXIT_OK,
            RunOutcome::Failed => EXIT_VERIFICATION_FAILED,
            RunOutcome::Incomplete => EXIT_INCOMPLETE,
        }),
        Command::Synth(a) => cmd_synth(a).map(|_| EXIT_OK),
        Command::Cohort(a) => cmd_cohort(a).map(|_| EXIT_OK),
        Command::Eval(a) => cmd_eval(a).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gad: {e}");
            exit_code(&e)
        }
    }
}
