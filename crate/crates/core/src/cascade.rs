//! The four-stage detector: a RAM converter feeding a detector and a second
//! converter, which in turn feeds a second detector.
//!
//! ```text
//!   RAM -> s1 --AARE--> d1
//!             \-AARE--> s2 --AARE--> d2
//! ```
//!
//! The same stage objects train on the captured segment and then keep
//! running online, so the online phase inherits models, windows and
//! threshold histories without any copying. Per input, `d1` is fed before
//! `s2`.

use serde::{Deserialize, Serialize};

use crate::capture::GaitSegment;
use crate::error::{GadError, Result};
use crate::lstm::HyperParams;
use crate::stage::{Stage, StageOutput};

/// Version tag written into serialized detector snapshots.
pub const SNAPSHOT_VERSION: u32 = 1;

/// Hyperparameter profiles for the two stage kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub converter: HyperParams,
    pub detector: HyperParams,
}

impl Default for Profiles {
    fn default() -> Self {
        Self {
            converter: HyperParams::converter(),
            detector: HyperParams::detector(),
        }
    }
}

impl Profiles {
    pub fn with_seed(self, seed: u64) -> Self {
        Self {
            converter: self.converter.with_seed(seed),
            detector: self.detector.with_seed(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    None,
    Ad1,
    Ad2,
    Both,
}

impl DecisionSource {
    fn from_flags(first: bool, second: bool) -> Self {
        match (first, second) {
            (false, false) => DecisionSource::None,
            (true, false) => DecisionSource::Ad1,
            (false, true) => DecisionSource::Ad2,
            (true, true) => DecisionSource::Both,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DecisionSource::None => "none",
            DecisionSource::Ad1 => "AD1",
            DecisionSource::Ad2 => "AD2",
            DecisionSource::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub anomaly: bool,
    pub source: DecisionSource,
    pub stream_index: u64,
}

/// Everything a single input produced across the four stages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CascadeTrace {
    pub s1: StageOutput,
    pub d1: Option<StageOutput>,
    pub s2: Option<StageOutput>,
    pub d2: Option<StageOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    s1: Stage,
    d1: Stage,
    s2: Stage,
    d2: Stage,
    step_len: usize,
    ready: bool,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    detector: DetectorState,
}

impl DetectorState {
    /// Untrained cascade for step length `step_len`.
    pub fn new(step_len: usize, profiles: &Profiles) -> Result<Self> {
        Ok(Self {
            s1: Stage::converter(step_len, profiles.converter)?,
            d1: Stage::detector(profiles.detector)?,
            s2: Stage::converter(step_len, profiles.converter)?,
            d2: Stage::detector(profiles.detector)?,
            step_len,
            ready: false,
        })
    }

    /// Trains a fresh cascade on a captured segment.
    pub fn generate(segment: &GaitSegment, profiles: &Profiles) -> Result<Self> {
        let l = segment.step_len;
        // s1 emits len - 2L + 1 values, s2 emits that minus 2L - 1, and d2
        // needs 3 of them to train.
        let s1_out = (segment.values.len() + 1).saturating_sub(2 * l);
        let s2_out = (s1_out + 1).saturating_sub(2 * l);
        if s2_out < 3 {
            return Err(GadError::Generation(format!(
                "segment of {} values is too short for step length {l}",
                segment.values.len()
            )));
        }
        let mut det = Self::new(l, profiles)?;
        for &v in &segment.values {
            det.step(v)?;
        }
        det.ready = det.d1.is_trained() && det.d2.is_trained();
        if !det.ready {
            return Err(GadError::Generation("detectors did not finish training".into()));
        }
        Ok(det)
    }

    pub fn step_len(&self) -> usize {
        self.step_len
    }

    pub fn is_ready(&self) -> bool {
        self.ready
    }

    pub fn stages(&self) -> [&Stage; 4] {
        [&self.s1, &self.d1, &self.s2, &self.d2]
    }

    /// Pushes one RAM value through all four stages without any readiness
    /// check; both training and detection go through here.
    pub fn step(&mut self, value: f64) -> Result<CascadeTrace> {
        let mut trace = CascadeTrace {
            s1: self.s1.feed(value)?,
            ..CascadeTrace::default()
        };
        if let Some(a1) = trace.s1.emitted_aare {
            trace.d1 = Some(self.d1.feed(a1)?);
            let s2 = self.s2.feed(a1)?;
            if let Some(a2) = s2.emitted_aare {
                trace.d2 = Some(self.d2.feed(a2)?);
            }
            trace.s2 = Some(s2);
        }
        Ok(trace)
    }

    /// Online detection for one RAM value.
    pub fn feed(&mut self, value: f64, stream_index: u64) -> Result<Decision> {
        if !self.ready {
            return Err(GadError::Usage("detector is not ready".into()));
        }
        let trace = self.step(value)?;
        let first = trace.d1.is_some_and(|o| o.anomaly);
        let second = trace.d2.is_some_and(|o| o.anomaly);
        let source = DecisionSource::from_flags(first, second);
        Ok(Decision {
            anomaly: source != DecisionSource::None,
            source,
            stream_index,
        })
    }

    pub fn snapshot(&self) -> Result<DetectorState> {
        if !self.ready {
            return Err(GadError::Usage("snapshot of a detector that is not ready".into()));
        }
        Ok(self.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Snapshot {
            version: SNAPSHOT_VERSION,
            detector: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(GadError::Data(format!(
                "unsupported detector snapshot version {}",
                snap.version
            )));
        }
        Ok(snap.detector)
    }
}

/// Functional form of [`DetectorState::generate`].
pub fn basegen_run(segment: &GaitSegment, profiles: &Profiles) -> Result<DetectorState> {
    DetectorState::generate(segment, profiles)
}

/// Functional form of [`DetectorState::feed`].
pub fn olad_feed(det: &mut DetectorState, value: f64, stream_index: u64) -> Result<Decision> {
    det.feed(value, stream_index)
}
