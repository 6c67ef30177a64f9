//! Real-time gait anomaly detection over 3-axis accelerometer streams.
//!
//! Samples are reduced to resultant acceleration magnitudes, a gait segment
//! covering eight cycles is captured per user, and a cascade of four
//! one-step-ahead LSTM predictors (two converters, two detectors) is trained
//! on it. The same cascade keeps running online afterwards, retraining
//! whenever its prediction error leaves the three-sigma band, and reports
//! an anomaly when a detector stays outside the band after retraining.

pub mod capture;
pub mod cascade;
pub mod cli;
pub mod controller;
pub mod data;
pub mod error;
pub mod eval;
pub mod lstm;
pub mod stage;
pub mod stream_math;

pub use capture::{CaptureMode, CaptureParams, CaptureState, GaitSegment};
pub use cascade::{Decision, DecisionSource, DetectorState, Profiles};
pub use controller::{Controller, ControllerConfig, Event, EventKind, Phase};
pub use data::{SplicedTrace, SynthSpec, Trace, Waveform};
pub use error::{GadError, Result};
pub use lstm::{HyperParams, PredictionModel};
pub use stage::{Stage, StageOutput, StageRole};
pub use stream_math::{AccelInstance, PairWindow, ThresholdState};
