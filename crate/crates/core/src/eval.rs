//! Cohort experiments: per-subject verification, all-pairs impersonation
//! and detection-latency histograms.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::CaptureMode;
use crate::cascade::DetectorState;
use crate::controller::{Controller, ControllerConfig, EventKind};
use crate::data::Trace;
use crate::error::{GadError, Result};

pub const DEFAULT_EARLY_WINDOW: u64 = 154;
pub const DEFAULT_HISTOGRAM_BIN: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub controller: ControllerConfig,
    pub early_window: u64,
    pub histogram_bin: u64,
    /// Caps how many post-verification samples are replayed per pair.
    pub probe_len: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            controller: ControllerConfig::default(),
            early_window: DEFAULT_EARLY_WINDOW,
            histogram_bin: DEFAULT_HISTOGRAM_BIN,
            probe_len: None,
        }
    }
}

impl EvalConfig {
    pub fn with_mode(mut self, mode: CaptureMode) -> Self {
        self.controller.capture.mode = mode;
        self
    }

    pub fn mode(&self) -> CaptureMode {
        self.controller.capture.mode
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectVerification {
    pub passed: bool,
    pub step_len: Option<usize>,
    pub t_start: Option<usize>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub mode: CaptureMode,
    pub passed: usize,
    pub failed: usize,
    pub total: usize,
    pub per_subject: BTreeMap<String, SubjectVerification>,
}

/// A subject whose detector passed verification, with the samples that
/// followed verification in its recording.
#[derive(Debug, Clone)]
pub struct Enrollment {
    pub subject_id: String,
    pub detector: DetectorState,
    pub probe: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VerificationRun {
    pub summary: VerificationSummary,
    pub enrolled: Vec<Enrollment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairResult {
    pub genuine_id: String,
    pub impostor_id: String,
    pub detected: bool,
    /// Impostor-relative index of the first anomaly, starting at 1.
    pub latency: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpersonationReport {
    pub mode: CaptureMode,
    pub pairs: usize,
    pub detected: usize,
    pub ratio: f64,
    pub results: Vec<PairResult>,
    /// Each subject replayed against its own continuation.
    pub controls: Vec<PairResult>,
    pub false_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive latency bounds.
    pub from: u64,
    pub to: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyHistogram {
    pub bins: Vec<HistogramBin>,
    pub detected: usize,
    pub early_window: u64,
    pub early_count: usize,
    pub early_fraction: f64,
}

enum Outcome {
    Passed(Enrollment, SubjectVerification),
    Failed(SubjectVerification),
}

fn failed(reason: impl Into<String>, step_len: Option<usize>, t_start: Option<usize>) -> Outcome {
    Outcome::Failed(SubjectVerification {
        passed: false,
        step_len,
        t_start,
        reason: Some(reason.into()),
    })
}

fn verify_subject(trace: &Trace, config: &EvalConfig) -> Result<Outcome> {
    let cc = &config.controller;
    let needed = cc.capture.required_samples(cc.verification_steps);
    if trace.len() < needed {
        return Ok(failed(
            format!("insufficient data: {} samples, need {needed}", trace.len()),
            None,
            None,
        ));
    }
    let values = trace.ram_values()?;
    let mut ctrl = Controller::new(*cc)?;
    ctrl.request_generate()?;
    for (pos, &v) in values.iter().enumerate() {
        let events = ctrl.on_ram(v)?;
        let segment = ctrl.segment();
        for event in &events {
            match event.kind {
                EventKind::VerificationPassed => {
                    let seg = segment.expect("verified session has a segment");
                    let detector = ctrl.detector().expect("verified session has a detector").snapshot()?;
                    let probe = values[pos + 1..].to_vec();
                    return Ok(Outcome::Passed(
                        Enrollment {
                            subject_id: trace.subject_id.clone(),
                            detector,
                            probe,
                        },
                        SubjectVerification {
                            passed: true,
                            step_len: Some(seg.step_len),
                            t_start: Some(seg.t_start),
                            reason: None,
                        },
                    ));
                }
                EventKind::VerificationFailed => {
                    return Ok(failed(format!("anomaly at index {}", event.stream_index), None, None));
                }
                EventKind::RestartRequired => {
                    let reason = event
                        .detail
                        .get("reason")
                        .and_then(|r| r.as_str())
                        .unwrap_or("restart required")
                        .to_string();
                    return Ok(failed(reason, None, None));
                }
                _ => {}
            }
        }
    }
    let seg = ctrl.segment();
    Ok(failed(
        "insufficient data: trace ended before verification finished",
        seg.map(|s| s.step_len),
        seg.map(|s| s.t_start),
    ))
}

/// Runs one full session per trace and counts verification outcomes.
pub fn run_verification(traces: &[Trace], config: &EvalConfig) -> Result<VerificationRun> {
    let outcomes: Vec<Result<Outcome>> = traces.par_iter().map(|t| verify_subject(t, config)).collect();
    let mut per_subject = BTreeMap::new();
    let mut enrolled = Vec::new();
    for (trace, outcome) in traces.iter().zip(outcomes) {
        match outcome? {
            Outcome::Passed(e, v) => {
                per_subject.insert(trace.subject_id.clone(), v);
                enrolled.push(e);
            }
            Outcome::Failed(v) => {
                per_subject.insert(trace.subject_id.clone(), v);
            }
        }
    }
    enrolled.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let passed = enrolled.len();
    Ok(VerificationRun {
        summary: VerificationSummary {
            mode: config.mode(),
            passed,
            failed: traces.len() - passed,
            total: traces.len(),
            per_subject,
        },
        enrolled,
    })
}

/// Streams `probe` through a copy of `detector` from a fresh detection
/// request and returns the probe-relative index of the first anomaly.
pub fn replay_probe(detector: &DetectorState, probe: &[f64], config: &EvalConfig) -> Result<Option<u64>> {
    let mut ctrl = Controller::resume_verified(config.controller, detector.snapshot()?)?;
    ctrl.request_detect()?;
    let limit = config.probe_len.unwrap_or(probe.len()).min(probe.len());
    for &v in &probe[..limit] {
        let events = ctrl.on_ram(v)?;
        if let Some(first) = events.iter().find(|e| e.kind == EventKind::Anomaly) {
            return Ok(Some(first.stream_index));
        }
    }
    Ok(None)
}

fn pair_result(genuine: &Enrollment, impostor: &Enrollment, config: &EvalConfig) -> Result<PairResult> {
    let latency = replay_probe(&genuine.detector, &impostor.probe, config)?;
    Ok(PairResult {
        genuine_id: genuine.subject_id.clone(),
        impostor_id: impostor.subject_id.clone(),
        detected: latency.is_some(),
        latency,
    })
}

/// Every ordered pair of distinct enrolled subjects, plus self controls.
pub fn run_impersonation(enrolled: &[Enrollment], config: &EvalConfig) -> Result<ImpersonationReport> {
    if enrolled.len() < 2 {
        return Err(GadError::Usage(format!(
            "impersonation needs at least 2 verified subjects, got {}",
            enrolled.len()
        )));
    }
    let mut order: Vec<&Enrollment> = enrolled.iter().collect();
    order.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));

    let jobs: Vec<(usize, usize)> = (0..order.len())
        .flat_map(|g| (0..order.len()).map(move |i| (g, i)))
        .collect();
    let all: Vec<Result<PairResult>> = jobs
        .par_iter()
        .map(|&(g, i)| pair_result(order[g], order[i], config))
        .collect();

    let mut results = Vec::with_capacity(jobs.len());
    let mut controls = Vec::with_capacity(order.len());
    for (&(g, i), r) in jobs.iter().zip(all) {
        let r = r?;
        if g == i {
            controls.push(r);
        } else {
            results.push(r);
        }
    }
    let detected = results.iter().filter(|r| r.detected).count();
    let flagged = controls.iter().filter(|r| r.detected).count();
    Ok(ImpersonationReport {
        mode: config.mode(),
        pairs: results.len(),
        detected,
        ratio: detected as f64 / results.len() as f64,
        false_positive_rate: flagged as f64 / controls.len() as f64,
        results,
        controls,
    })
}

/// Histogram of first-detection latencies in fixed-width bins starting at 1.
pub fn latency_histogram(results: &[PairResult], bin_width: u64, early_window: u64) -> Result<LatencyHistogram> {
    if results.is_empty() {
        return Err(GadError::Usage("latency histogram of no results".into()));
    }
    if bin_width == 0 {
        return Err(GadError::Config("histogram bin width must be positive".into()));
    }
    let latencies: Vec<u64> = results.iter().filter_map(|r| r.latency).collect();
    let mut bins = Vec::new();
    if let (Some(&lo), Some(&hi)) = (latencies.iter().min(), latencies.iter().max()) {
        let first = (lo - 1) / bin_width;
        let last = (hi - 1) / bin_width;
        for b in first..=last {
            let from = b * bin_width + 1;
            let to = (b + 1) * bin_width;
            let count = latencies.iter().filter(|&&l| l >= from && l <= to).count();
            bins.push(HistogramBin { from, to, count });
        }
    }
    let early_count = latencies.iter().filter(|&&l| l <= early_window).count();
    Ok(LatencyHistogram {
        bins,
        detected: latencies.len(),
        early_window,
        early_count,
        early_fraction: if latencies.is_empty() {
            0.0
        } else {
            early_count as f64 / latencies.len() as f64
        },
    })
}

pub fn write_verification_csv<W: Write>(summary: &VerificationSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "mode", "passed", "step_len", "t_start", "reason"])
        .map_err(csv_err)?;
    for (id, s) in &summary.per_subject {
        w.write_record([
            id.as_str(),
            &summary.mode.to_string(),
            if s.passed { "true" } else { "false" },
            &s.step_len.map(|v| v.to_string()).unwrap_or_default(),
            &s.t_start.map(|v| v.to_string()).unwrap_or_default(),
            s.reason.as_deref().unwrap_or(""),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per pair result; used for both impostor pairs and controls.
pub fn write_pairs_csv<W: Write>(rows: &[PairResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["genuine_id", "impostor_id", "detected", "latency"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.genuine_id.as_str(),
            &r.impostor_id,
            if r.detected { "true" } else { "false" },
            &r.latency.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairs_jsonl<W: Write>(report: &ImpersonationReport, mut out: W) -> Result<()> {
    for r in &report.results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(hist: &LatencyHistogram, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "count"]).map_err(csv_err)?;
    for b in &hist.bins {
        w.write_record([b.from.to_string(), b.to.to_string(), b.count.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> GadError {
    GadError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(latency: Option<u64>) -> PairResult {
        PairResult {
            genuine_id: "x".into(),
            impostor_id: "y".into(),
            detected: latency.is_some(),
            latency,
        }
    }

    #[test]
    fn single_bin_for_equal_latencies() {
        let h = latency_histogram(&[result(Some(1)), result(Some(1)), result(None)], 50, 154).unwrap();
        assert_eq!(h.bins, vec![HistogramBin { from: 1, to: 50, count: 2 }]);
        assert_eq!(h.detected, 2);
        assert_eq!(h.early_fraction, 1.0);
    }

    #[test]
    fn early_fraction_arithmetic() {
        let h = latency_histogram(&[result(Some(100)), result(Some(200))], 50, 154).unwrap();
        assert_eq!(h.early_fraction, 0.5);
        assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), 2);
        assert_eq!(h.bins.first().unwrap().from, 51);
        assert_eq!(h.bins.last().unwrap().to, 200);
    }

    #[test]
    fn empty_histogram_is_usage_error() {
        assert!(matches!(latency_histogram(&[], 50, 154), Err(GadError::Usage(_))));
    }

    #[test]
    fn short_trace_fails_with_reason() {
        let trace = Trace::new("short", vec![crate::stream_math::AccelInstance::new(0.0, 0.0, 9.8); 100]).unwrap();
        let run = run_verification(&[trace], &EvalConfig::default()).unwrap();
        assert_eq!(run.summary.failed, 1);
        assert_eq!(run.summary.passed + run.summary.failed, run.summary.total);
        let s = &run.summary.per_subject["short"];
        assert!(!s.passed);
        assert!(s.reason.as_deref().unwrap().starts_with("insufficient data"));
    }

    #[test]
    fn impersonation_needs_two_subjects() {
        assert!(matches!(
            run_impersonation(&[], &EvalConfig::default()),
            Err(GadError::Usage(_))
        ));
    }
}
