//! Accelerometer traces: delimited-text I/O, synthetic gait generation and
//! splicing of two traces into one impersonation stream.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::stream_math::{ram, AccelInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub subject_id: String,
    pub samples: Vec<AccelInstance>,
    /// Carried as metadata only.
    pub rate_hz: Option<f64>,
}

impl Trace {
    pub fn new(subject_id: impl Into<String>, samples: Vec<AccelInstance>) -> Result<Self> {
        if samples.is_empty() {
            return Err(GadError::Data("trace has no samples".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(GadError::Data(format!("non-finite sample at row {}", pos + 1)));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            samples,
            rate_hz: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ram_values(&self) -> Result<Vec<f64>> {
        self.samples.iter().map(ram).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
    /// Tab if the first line contains one, comma otherwise.
    Auto,
}

/// Column mapping for delimited accelerometer files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatOptions {
    pub delimiter: Delimiter,
    pub header: bool,
    /// Zero-based column indices of x, y and z.
    pub columns: [usize; 3],
}

impl Default for FormatOptions {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Auto,
            header: false,
            columns: [0, 1, 2],
        }
    }
}

pub fn read_trace(path: &Path, options: &FormatOptions) -> Result<Trace> {
    let file = File::open(path)?;
    let subject = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_trace(subject, BufReader::new(file), options)
}

pub fn parse_trace<R: Read>(subject_id: String, reader: R, options: &FormatOptions) -> Result<Trace> {
    let mut reader = BufReader::new(reader);
    let delimiter = match options.delimiter {
        Delimiter::Comma => b',',
        Delimiter::Tab => b'\t',
        Delimiter::Auto => {
            let head = reader.fill_buf()?;
            let first_line = head.split(|&b| b == b'\n').next().unwrap_or(&[]);
            if first_line.contains(&b'\t') {
                b'\t'
            } else {
                b','
            }
        }
    };
    let mut csv = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(options.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut samples = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match csv.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(GadError::Parse {
                    line,
                    message: e.to_string(),
                });
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut axes = [0.0; 3];
        for (axis, &col) in axes.iter_mut().zip(&options.columns) {
            let field = record.get(col).ok_or_else(|| GadError::Parse {
                line,
                message: format!("missing column {}", col + 1),
            })?;
            *axis = field.parse::<f64>().map_err(|_| GadError::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !axis.is_finite() {
                return Err(GadError::Parse {
                    line,
                    message: format!("`{field}` is not finite"),
                });
            }
        }
        samples.push(AccelInstance::new(axes[0], axes[1], axes[2]));
    }
    if samples.is_empty() {
        return Err(GadError::Data(format!("trace `{subject_id}` is empty")));
    }
    Trace::new(subject_id, samples)
}

/// Writes one `x,y,z` row per sample, no header. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> Result<()> {
    for s in &trace.samples {
        writeln!(out, "{},{},{}", s.ax, s.ay, s.az)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &Trace, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    write_trace(trace, std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    Sine,
    Sawtooth,
    TwoHarmonic,
}

impl Waveform {
    /// Unit-amplitude value at phase angle `theta`.
    pub fn value(self, theta: f64) -> f64 {
        match self {
            Waveform::Sine => theta.sin(),
            Waveform::Sawtooth => {
                let cycle = theta / std::f64::consts::TAU;
                2.0 * (cycle - cycle.floor()) - 1.0
            }
            Waveform::TwoHarmonic => theta.sin() + 0.5 * (2.0 * theta).sin(),
        }
    }
}

impl std::str::FromStr for Waveform {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Waveform::Sine),
            "sawtooth" => Ok(Waveform::Sawtooth),
            "two_harmonic" | "two-harmonic" => Ok(Waveform::TwoHarmonic),
            other => Err(GadError::Config(format!("unknown waveform `{other}`"))),
        }
    }
}

/// Periodic stand-in for a walking recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Samples per step.
    pub period: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub noise_sigma: f64,
    pub n: usize,
    pub seed: u64,
    pub waveform: Waveform,
    /// Shift of the waveform, in samples.
    pub phase: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            period: 40.0,
            amplitude: 2.0,
            baseline: 9.8,
            noise_sigma: 0.0,
            n: 4000,
            seed: 0,
            waveform: Waveform::Sine,
            phase: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period >= 2.0) {
            return Err(GadError::Config(format!("period must be at least 2, got {}", self.period)));
        }
        if (self.n as f64) < 10.0 * self.period {
            return Err(GadError::Config(format!(
                "need at least 10 periods of samples, got n = {}",
                self.n
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(GadError::Config(format!("invalid noise sigma {}", self.noise_sigma)));
        }
        if !(self.amplitude.is_finite() && self.baseline.is_finite() && self.phase.is_finite()) {
            return Err(GadError::Config("amplitude, baseline and phase must be finite".into()));
        }
        Ok(())
    }

    /// Noise-free signal at 0-based sample `t`.
    pub fn clean_value(&self, t: usize) -> f64 {
        let theta = std::f64::consts::TAU * (t as f64 + self.phase) / self.period;
        self.baseline + self.amplitude * self.waveform.value(theta)
    }
}

/// Generates the samples of `spec` on the z axis, so RAM equals the
/// absolute value of the signal.
pub fn synth_trace(subject_id: impl Into<String>, spec: &SynthSpec) -> Result<Trace> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| GadError::Config(e.to_string()))?;
    let samples = (0..spec.n)
        .map(|t| {
            let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            AccelInstance::new(0.0, 0.0, spec.clean_value(t) + eps)
        })
        .collect();
    let mut trace = Trace::new(subject_id, samples)?;
    trace.rate_hz = None;
    Ok(trace)
}

/// Specs for a synthetic cohort: distinct step periods spread evenly over
/// `periods`, alternating waveforms, per-subject amplitude and baseline,
/// noise at a twentieth of the amplitude.
pub fn cohort_specs(subjects: usize, periods: (f64, f64), n: usize, seed: u64) -> Result<Vec<(String, SynthSpec)>> {
    if subjects == 0 {
        return Err(GadError::Config("cohort needs at least one subject".into()));
    }
    let (lo, hi) = periods;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..subjects)
        .map(|k| {
            let period = if subjects == 1 {
                lo
            } else {
                (lo + (hi - lo) * k as f64 / (subjects - 1) as f64).round()
            };
            let amplitude = 1.5 + 1.5 * rng.random::<f64>();
            let baseline = 9.6 + 0.4 * rng.random::<f64>();
            let phase = period * rng.random::<f64>();
            let spec = SynthSpec {
                period,
                amplitude,
                baseline,
                noise_sigma: amplitude / 20.0,
                n,
                seed: seed.wrapping_mul(1000).wrapping_add(k as u64),
                waveform: if k % 2 == 0 { Waveform::Sine } else { Waveform::TwoHarmonic },
                phase,
            };
            spec.validate()?;
            Ok((format!("S{:03}", k + 1), spec))
        })
        .collect()
}

/// Two traces joined back to back, with the position where the second starts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplicedTrace {
    pub trace: Trace,
    /// 1-based index of the first sample taken from the second trace.
    pub splice_index: usize,
}

pub fn concat_traces(first: &Trace, second: &Trace) -> Result<SplicedTrace> {
    if first.is_empty() || second.is_empty() {
        return Err(GadError::Data("cannot splice an empty trace".into()));
    }
    let mut samples = Vec::with_capacity(first.len() + second.len());
    samples.extend_from_slice(&first.samples);
    samples.extend_from_slice(&second.samples);
    Ok(SplicedTrace {
        trace: Trace {
            subject_id: format!("{}+{}", first.subject_id, second.subject_id),
            samples,
            rate_hz: first.rate_hz,
        },
        splice_index: first.len() + 1,
    })
}
