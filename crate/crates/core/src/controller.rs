//! Session state machine: capture, generate, verify, align, detect.
//!
//! ```text
//! idle -> capturing -> generating -> verifying -> verified -> aligning -> detecting
//!                                        |
//!                                        +-> idle (verification failed)
//! ```
//!
//! Stream indices are 1-based and count every sample received since the
//! last generation request.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::capture::{CaptureParams, CaptureState, GaitSegment};
use crate::cascade::{Decision, DetectorState, Profiles};
use crate::error::{GadError, Result};
use crate::stream_math::{argmin_index, ram, AccelInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Capturing,
    Generating,
    Verifying,
    Verified,
    Aligning,
    Detecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SegmentCaptured,
    ModelReady,
    VerificationPassed,
    VerificationFailed,
    Anomaly,
    RestartRequired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub stream_index: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detail: BTreeMap<String, Value>,
}

impl Event {
    fn new(kind: EventKind, stream_index: u64) -> Self {
        Self {
            kind,
            stream_index,
            detail: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.detail.insert(key.to_string(), value.into());
        self
    }

    fn anomaly(decision: &Decision) -> Self {
        Event::new(EventKind::Anomaly, decision.stream_index).with("source", decision.source.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub capture: CaptureParams,
    pub profiles: Profiles,
    /// Steps streamed through the detector before it is accepted.
    pub verification_steps: usize,
    /// Samples buffered before detection starts at their minimum.
    pub align_len: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            capture: CaptureParams::default(),
            profiles: Profiles::default(),
            verification_steps: 2,
            align_len: 46,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.capture.validate()?;
        self.profiles.converter.validate()?;
        self.profiles.detector.validate()?;
        if self.verification_steps == 0 {
            return Err(GadError::Config("verification needs at least one step".into()));
        }
        if self.align_len == 0 {
            return Err(GadError::Config("alignment buffer must hold at least one sample".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    phase: Phase,
    index: u64,
    capture: Option<CaptureState>,
    detector: Option<DetectorState>,
    segment: Option<SegmentInfo>,
    verify_limit: u64,
    align: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentInfo {
    pub t_start: usize,
    pub t_end: usize,
    pub t_fin: usize,
    pub step_len: usize,
}

impl From<&GaitSegment> for SegmentInfo {
    fn from(s: &GaitSegment) -> Self {
        Self {
            t_start: s.t_start,
            t_end: s.t_end,
            t_fin: s.t_fin,
            step_len: s.step_len,
        }
    }
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            phase: Phase::Idle,
            index: 0,
            capture: None,
            detector: None,
            segment: None,
            verify_limit: 0,
            align: Vec::with_capacity(config.align_len),
        })
    }

    /// A session that already holds a verified detector, ready for a
    /// detection request. Stream indices restart at 1.
    pub fn resume_verified(config: ControllerConfig, detector: DetectorState) -> Result<Self> {
        if !detector.is_ready() {
            return Err(GadError::Usage("cannot resume with a detector that is not ready".into()));
        }
        let mut ctrl = Self::new(config)?;
        ctrl.detector = Some(detector);
        ctrl.phase = Phase::Verified;
        Ok(ctrl)
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Index of the most recent sample.
    pub fn stream_index(&self) -> u64 {
        self.index
    }

    pub fn detector(&self) -> Option<&DetectorState> {
        self.detector.as_ref()
    }

    pub fn segment(&self) -> Option<SegmentInfo> {
        self.segment
    }

    /// Last stream index that belongs to verification, once known.
    pub fn verify_limit(&self) -> Option<u64> {
        self.segment.map(|_| self.verify_limit)
    }

    pub fn request_generate(&mut self) -> Result<()> {
        if self.phase != Phase::Idle {
            return Err(GadError::Usage(format!("generation requested while {:?}", self.phase)));
        }
        self.reset();
        self.capture = Some(CaptureState::new(self.config.capture)?);
        self.phase = Phase::Capturing;
        Ok(())
    }

    pub fn request_detect(&mut self) -> Result<()> {
        if self.phase != Phase::Verified {
            return Err(GadError::Usage(format!("detection requested while {:?}", self.phase)));
        }
        self.align.clear();
        self.phase = Phase::Aligning;
        Ok(())
    }

    pub fn on_sample(&mut self, sample: &AccelInstance) -> Result<Vec<Event>> {
        let value = ram(sample)?;
        self.on_ram(value)
    }

    /// Same as [`Controller::on_sample`] for a value already reduced to RAM.
    pub fn on_ram(&mut self, value: f64) -> Result<Vec<Event>> {
        match self.phase {
            Phase::Idle | Phase::Verified | Phase::Generating => {
                return Err(GadError::Usage(format!("sample received while {:?}", self.phase)));
            }
            _ => {}
        }
        if !value.is_finite() {
            return Err(GadError::Data(format!("non-finite RAM value {value}")));
        }
        self.index += 1;
        let mut events = Vec::new();
        match self.phase {
            Phase::Capturing => self.capture_step(value, &mut events)?,
            Phase::Verifying => self.verify_step(self.index, value, &mut events)?,
            Phase::Aligning => self.align_step(value, &mut events)?,
            Phase::Detecting => {
                let index = self.index;
                let decision = self.detector_mut()?.feed(value, index)?;
                if decision.anomaly {
                    events.push(Event::anomaly(&decision));
                }
            }
            Phase::Idle | Phase::Verified | Phase::Generating => unreachable!(),
        }
        Ok(events)
    }

    fn detector_mut(&mut self) -> Result<&mut DetectorState> {
        self.detector
            .as_mut()
            .ok_or_else(|| GadError::Usage("no detector in this session".into()))
    }

    fn reset(&mut self) {
        self.phase = Phase::Idle;
        self.index = 0;
        self.capture = None;
        self.detector = None;
        self.segment = None;
        self.verify_limit = 0;
        self.align.clear();
    }

    fn capture_step(&mut self, value: f64, events: &mut Vec<Event>) -> Result<()> {
        let capture = self
            .capture
            .as_mut()
            .ok_or_else(|| GadError::Usage("capture not started".into()))?;
        let Some(segment) = capture.feed(value)? else {
            return Ok(());
        };
        let trailing = capture.values_after(segment.t_fin).to_vec();
        self.capture = None;

        let info = SegmentInfo::from(&segment);
        events.push(
            Event::new(EventKind::SegmentCaptured, self.index)
                .with("L", info.step_len)
                .with("T_start", info.t_start)
                .with("T_end", info.t_end)
                .with("T_fin", info.t_fin),
        );

        self.phase = Phase::Generating;
        let detector = match DetectorState::generate(&segment, &self.config.profiles) {
            Ok(d) => d,
            Err(GadError::Generation(reason)) => {
                events.push(Event::new(EventKind::RestartRequired, self.index).with("reason", reason));
                self.reset();
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        self.detector = Some(detector);
        self.segment = Some(info);
        self.verify_limit =
            (info.t_start + info.step_len * (self.config.capture.cycles + self.config.verification_steps)) as u64;
        events.push(Event::new(EventKind::ModelReady, self.index).with("L", info.step_len));
        self.phase = Phase::Verifying;

        // Samples after T_fin already arrived during capture; they are the
        // first verification inputs.
        for (k, v) in trailing.into_iter().enumerate() {
            let index = (info.t_fin + 1 + k) as u64;
            self.verify_step(index, v, events)?;
            if self.phase != Phase::Verifying {
                break;
            }
        }
        Ok(())
    }

    fn verify_step(&mut self, index: u64, value: f64, events: &mut Vec<Event>) -> Result<()> {
        let decision = self.detector_mut()?.feed(value, index)?;
        if decision.anomaly {
            events.push(Event::anomaly(&decision));
            events.push(
                Event::new(EventKind::VerificationFailed, index).with("source", decision.source.as_str()),
            );
            events.push(Event::new(EventKind::RestartRequired, index));
            self.reset();
        } else if index >= self.verify_limit {
            events.push(Event::new(EventKind::VerificationPassed, index));
            self.phase = Phase::Verified;
        }
        Ok(())
    }

    fn align_step(&mut self, value: f64, events: &mut Vec<Event>) -> Result<()> {
        self.align.push((self.index, value));
        if self.align.len() < self.config.align_len {
            return Ok(());
        }
        let values: Vec<f64> = self.align.iter().map(|&(_, v)| v).collect();
        let start = argmin_index(&values, 0)?;
        let replay: Vec<(u64, f64)> = self.align.drain(..).skip(start).collect();
        self.phase = Phase::Detecting;
        let detector = self.detector_mut()?;
        for (index, v) in replay {
            let decision = detector.feed(v, index)?;
            if decision.anomaly {
                events.push(Event::anomaly(&decision));
            }
        }
        Ok(())
    }
}
