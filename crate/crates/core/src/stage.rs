//! One predict / score / threshold / retrain unit.
//!
//! A stage keeps the last `w + 1` inputs, a pair window of `w`
//! `(actual, predicted)` pairs and the threshold history of every AARE it
//! has computed. It trains its first model once `w` inputs have arrived,
//! starts scoring at input `2w`, and from then on produces one AARE per
//! input.
//!
//! Converters emit the AARE they computed and retrain quietly when it
//! exceeds the threshold. Detectors retrain on exceedance, rescore the
//! current position with the new model, and flag an anomaly only if the
//! rescored AARE is still above the threshold.
//!
//! Thresholds are compared against the history including the value being
//! judged. For detectors the value that stays in history is the rescored
//! one.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::lstm::{HyperParams, PredictionModel};
use crate::stream_math::{aare, PairWindow, ThresholdState};

/// Window size of every detector stage.
pub const DETECTOR_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageRole {
    Converter,
    Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageOutput {
    /// AARE forwarded downstream (converters only).
    pub emitted_aare: Option<f64>,
    /// AARE computed for this input, post-retrain for detectors.
    pub aare: Option<f64>,
    pub retrained: bool,
    pub anomaly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    role: StageRole,
    window: usize,
    hp: HyperParams,
    inputs: VecDeque<f64>,
    pairs: PairWindow,
    thresholds: ThresholdState,
    model: Option<PredictionModel>,
    pending_prediction: Option<f64>,
    input_count: u64,
    retrain_count: u64,
}

impl Stage {
    pub fn new(role: StageRole, window: usize, hp: HyperParams) -> Result<Self> {
        hp.validate()?;
        if window < 2 {
            return Err(GadError::Config(format!("stage window must be at least 2, got {window}")));
        }
        if role == StageRole::Detector && window != DETECTOR_WINDOW {
            return Err(GadError::Config(format!(
                "detector stages use a window of {DETECTOR_WINDOW}, got {window}"
            )));
        }
        Ok(Self {
            role,
            window,
            hp,
            inputs: VecDeque::with_capacity(window + 2),
            pairs: PairWindow::new(window),
            thresholds: ThresholdState::new(),
            model: None,
            pending_prediction: None,
            input_count: 0,
            retrain_count: 0,
        })
    }

    pub fn converter(window: usize, hp: HyperParams) -> Result<Self> {
        Self::new(StageRole::Converter, window, hp)
    }

    pub fn detector(hp: HyperParams) -> Result<Self> {
        Self::new(StageRole::Detector, DETECTOR_WINDOW, hp)
    }

    pub fn role(&self) -> StageRole {
        self.role
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn input_count(&self) -> u64 {
        self.input_count
    }

    pub fn retrain_count(&self) -> u64 {
        self.retrain_count
    }

    pub fn thresholds(&self) -> &ThresholdState {
        &self.thresholds
    }

    pub fn pairs(&self) -> &PairWindow {
        &self.pairs
    }

    pub fn model(&self) -> Option<&PredictionModel> {
        self.model.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.model.is_some()
    }

    /// Prediction that will be paired with the next input.
    pub fn pending_prediction(&self) -> Option<f64> {
        self.pending_prediction
    }

    /// Deep copy for replaying the same trained stage more than once.
    pub fn snapshot(&self) -> Result<Stage> {
        if !self.is_trained() {
            return Err(GadError::Usage("snapshot of an untrained stage".into()));
        }
        Ok(self.clone())
    }

    pub fn feed(&mut self, value: f64) -> Result<StageOutput> {
        if !value.is_finite() {
            return Err(GadError::Data(format!("non-finite stage input {value}")));
        }
        let w = self.window;
        self.input_count += 1;
        self.inputs.push_back(value);
        if self.inputs.len() > w + 1 {
            self.inputs.pop_front();
        }

        let count = self.input_count;
        let mut out = StageOutput::default();
        if count < w as u64 {
            return Ok(out);
        }
        if count == w as u64 {
            self.model = Some(self.fresh_model_on_latest()?);
            self.pending_prediction = Some(self.predict_from_latest()?);
            return Ok(out);
        }

        let predicted = self
            .pending_prediction
            .ok_or_else(|| GadError::Usage("stage has no pending prediction".into()))?;
        self.pairs.push(value, predicted);

        if count >= 2 * w as u64 {
            let score = aare(&self.pairs)?;
            match self.role {
                StageRole::Converter => {
                    out.emitted_aare = Some(score);
                    out.aare = Some(score);
                    self.thresholds.update(score)?;
                    if matches!(self.thresholds.threshold(), Some(thd) if score > thd) {
                        self.retrain()?;
                        out.retrained = true;
                    }
                }
                StageRole::Detector => {
                    let candidate = self.thresholds.with(score)?;
                    let mut kept = score;
                    if matches!(candidate.threshold(), Some(thd) if score > thd) {
                        self.retrain()?;
                        out.retrained = true;
                        let rescored_prediction = self.predict_current_position()?;
                        self.pairs.replace_last_prediction(rescored_prediction)?;
                        kept = aare(&self.pairs)?;
                        let rechecked = self.thresholds.with(kept)?;
                        out.anomaly = matches!(rechecked.threshold(), Some(thd) if kept > thd);
                    }
                    out.aare = Some(kept);
                    self.thresholds.update(kept)?;
                }
            }
        }

        self.pending_prediction = Some(self.predict_from_latest()?);
        Ok(out)
    }

    fn latest(&mut self, skip_newest: bool) -> &[f64] {
        let w = self.window;
        let buf = self.inputs.make_contiguous();
        let end = buf.len() - usize::from(skip_newest);
        &buf[end - w..end]
    }

    fn fresh_model_on_latest(&mut self) -> Result<PredictionModel> {
        let hp = self.hp;
        let mut model = PredictionModel::new(hp)?;
        model.train(self.latest(false))?;
        Ok(model)
    }

    fn retrain(&mut self) -> Result<()> {
        self.model = Some(self.fresh_model_on_latest()?);
        self.retrain_count += 1;
        Ok(())
    }

    fn predict_from_latest(&mut self) -> Result<f64> {
        let model = self.model.take().ok_or_else(|| GadError::Usage("stage is untrained".into()))?;
        let result = model.predict_next(self.latest(false));
        self.model = Some(model);
        result
    }

    /// Prediction of the newest input from the `w` inputs before it.
    fn predict_current_position(&mut self) -> Result<f64> {
        let model = self.model.take().ok_or_else(|| GadError::Usage("stage is untrained".into()))?;
        let result = model.predict_next(self.latest(true));
        self.model = Some(model);
        result
    }
}

/// Functional form of [`Stage::feed`].
pub fn stage_feed(stage: &mut Stage, value: f64) -> Result<StageOutput> {
    stage.feed(value)
}

/// Functional form of [`Stage::snapshot`].
pub fn stage_snapshot(stage: &Stage) -> Result<Stage> {
    stage.snapshot()
}
