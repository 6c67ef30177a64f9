//! Single-layer LSTM one-step-ahead predictor for scalar series.
//!
//! The network reads a window `x_1..x_w` and at every step emits a linear
//! readout of the hidden state that is trained to match the next value.
//! Training is full-batch Adam on the mean squared one-step error with
//! exact backpropagation through time.
//!
//! Parameters live in one flat vector, laid out as
//!
//! | group             | length   | layout                                  |
//! |-------------------|----------|-----------------------------------------|
//! | input weights     | `4n`     | gate-major `[i, f, g, o]`, unit within  |
//! | recurrent weights | `4n * n` | row `gate * n + unit`, column = unit    |
//! | gate biases       | `4n`     | same order as input weights             |
//! | output weights    | `n`      |                                         |
//! | output bias       | `1`      |                                         |
//!
//! Initialization draws from `ChaCha8Rng::seed_from_u64(seed)`, one
//! `f64` per weight via `random::<f64>()`, consumed in the order input
//! weights, recurrent weights, output weights. Each draw `u` becomes
//! `(2u - 1) * sqrt(6 / (fan_in + fan_out))` for its matrix. Gate biases
//! start at zero except the forget gate, which starts at one; the output
//! bias starts at zero. No other randomness is used.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};

/// Scalar input series.
pub const INPUT_SIZE: usize = 1;
/// Upper bound on hidden units; prediction runs on fixed stack buffers.
pub const MAX_HIDDEN_UNITS: usize = 64;
pub const DEFAULT_SEED: u64 = 140;
pub const EARLY_STOP_MIN_DELTA: f64 = 1e-6;
pub const EARLY_STOP_PATIENCE: usize = 5;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;
const FORGET_BIAS_INIT: f64 = 1.0;
const FLAT_RANGE: f64 = 1e-9;

const GATE_INPUT: usize = 0;
const GATE_FORGET: usize = 1;
const GATE_CELL: usize = 2;
const GATE_OUTPUT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl HyperParams {
    /// Profile for the stages that turn a series into AARE values.
    pub fn converter() -> Self {
        Self {
            hidden_layers: 1,
            hidden_units: 10,
            learning_rate: 0.0055,
            max_epochs: 100,
            activation: Activation::Tanh,
            seed: DEFAULT_SEED,
        }
    }

    /// Profile for the window-3 detection models.
    pub fn detector() -> Self {
        Self {
            learning_rate: 0.001,
            max_epochs: 50,
            ..Self::converter()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers != 1 {
            return Err(GadError::Config(format!(
                "only one hidden layer is supported, got {}",
                self.hidden_layers
            )));
        }
        if self.hidden_units == 0 || self.hidden_units > MAX_HIDDEN_UNITS {
            return Err(GadError::Config(format!(
                "hidden units must be in 1..={MAX_HIDDEN_UNITS}, got {}",
                self.hidden_units
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(GadError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(GadError::Config("max epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Named slices of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    InputWeights,
    RecurrentWeights,
    GateBias,
    OutputWeights,
    OutputBias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::InputWeights,
        ParamGroup::RecurrentWeights,
        ParamGroup::GateBias,
        ParamGroup::OutputWeights,
        ParamGroup::OutputBias,
    ];

    pub fn range(self, hidden: usize) -> Range<usize> {
        let l = Layout::new(hidden);
        match self {
            ParamGroup::InputWeights => l.w_in.clone(),
            ParamGroup::RecurrentWeights => l.w_rec.clone(),
            ParamGroup::GateBias => l.bias.clone(),
            ParamGroup::OutputWeights => l.w_out.clone(),
            ParamGroup::OutputBias => l.b_out..l.b_out + 1,
        }
    }
}

/// Number of trainable parameters for `hidden` units on a scalar input.
pub fn parameter_count(hidden: usize) -> usize {
    4 * (hidden * INPUT_SIZE + hidden * hidden + hidden) + (hidden + 1)
}

#[derive(Debug, Clone)]
struct Layout {
    n: usize,
    w_in: Range<usize>,
    w_rec: Range<usize>,
    bias: Range<usize>,
    w_out: Range<usize>,
    b_out: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        let g = 4 * n;
        let w_in = 0..g * INPUT_SIZE;
        let w_rec = w_in.end..w_in.end + g * n;
        let bias = w_rec.end..w_rec.end + g;
        let w_out = bias.end..bias.end + n;
        let b_out = w_out.end;
        Self {
            n,
            w_in,
            w_rec,
            bias,
            w_out,
            b_out,
        }
    }
}

/// Affine map from a training window onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    mid: f64,
    half_range: f64,
}

impl Scaler {
    pub fn fit(values: &[f64]) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range < FLAT_RANGE {
            Self {
                mid: values.iter().sum::<f64>() / values.len() as f64,
                half_range: 0.0,
            }
        } else {
            Self {
                mid: lo + range / 2.0,
                half_range: range / 2.0,
            }
        }
    }

    #[inline]
    pub fn forward(&self, x: f64) -> f64 {
        if self.half_range == 0.0 {
            0.0
        } else {
            (x - self.mid) / self.half_range
        }
    }

    #[inline]
    pub fn inverse(&self, y: f64) -> f64 {
        self.mid + self.half_range * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionModel {
    hp: HyperParams,
    params: Vec<f64>,
    scaler: Option<Scaler>,
    trained_window: usize,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fresh model with seeded weights and no scaler.
pub fn init_model(hp: HyperParams) -> Result<PredictionModel> {
    PredictionModel::new(hp)
}

impl PredictionModel {
    pub fn new(hp: HyperParams) -> Result<Self> {
        hp.validate()?;
        let layout = Layout::new(hp.hidden_units);
        let n = layout.n;
        let mut params = vec![0.0; parameter_count(n)];
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in slice {
                let u: f64 = rng.random();
                *p = (2.0 * u - 1.0) * limit;
            }
        };
        fill(&mut params[layout.w_in.clone()], INPUT_SIZE, 4 * n);
        fill(&mut params[layout.w_rec.clone()], n, 4 * n);
        fill(&mut params[layout.w_out.clone()], n, 1);
        for p in &mut params[layout.bias.start + GATE_FORGET * n..layout.bias.start + (GATE_FORGET + 1) * n] {
            *p = FORGET_BIAS_INIT;
        }
        Ok(Self {
            hp,
            params,
            scaler: None,
            trained_window: 0,
        })
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn scaler(&self) -> Option<&Scaler> {
        self.scaler.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.scaler.is_some()
    }

    /// Window length the model was last fitted on.
    pub fn trained_window(&self) -> usize {
        self.trained_window
    }

    /// Fits the model to predict every value of `window` from its prefix.
    ///
    /// Starts from the current weights. Stops at `max_epochs` or once the
    /// loss has failed to improve by `EARLY_STOP_MIN_DELTA` for
    /// `EARLY_STOP_PATIENCE` epochs in a row, keeping the best weights seen.
    pub fn train(&mut self, window: &[f64]) -> Result<TrainReport> {
        if window.len() < 2 {
            return Err(GadError::Training(format!(
                "training window needs at least 2 values, got {}",
                window.len()
            )));
        }
        if let Some(bad) = window.iter().find(|v| !v.is_finite()) {
            return Err(GadError::Data(format!("non-finite training value {bad}")));
        }
        let scaler = Scaler::fit(window);
        let xs: Vec<f64> = window.iter().map(|&v| scaler.forward(v)).collect();

        let count = self.params.len();
        let mut grad = vec![0.0; count];
        let mut m = vec![0.0; count];
        let mut v = vec![0.0; count];
        let mut best_params = self.params.clone();
        let mut work = Workspace::new(self.hp.hidden_units, xs.len());

        let mut best = f64::INFINITY;
        let mut initial_loss = f64::NAN;
        let mut stale = 0;
        let mut epochs = 0;
        let lr = self.hp.learning_rate;

        for epoch in 1..=self.hp.max_epochs {
            epochs = epoch;
            let loss = self.loss_and_gradient_with(&xs, &mut grad, &mut work);
            if !loss.is_finite() {
                return Err(GadError::Training(format!("loss diverged at epoch {epoch}")));
            }
            if epoch == 1 {
                initial_loss = loss;
            }
            if loss < best - EARLY_STOP_MIN_DELTA {
                stale = 0;
            } else {
                stale += 1;
            }
            if loss < best {
                best = loss;
                best_params.copy_from_slice(&self.params);
            }
            if stale >= EARLY_STOP_PATIENCE {
                break;
            }

            let t = epoch as i32;
            let correction1 = 1.0 - ADAM_BETA1.powi(t);
            let correction2 = 1.0 - ADAM_BETA2.powi(t);
            for i in 0..count {
                let g = grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                self.params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }

        if best_params.iter().any(|p| !p.is_finite()) {
            return Err(GadError::Training("non-finite weights after training".into()));
        }
        self.params = best_params;
        self.scaler = Some(scaler);
        self.trained_window = window.len();
        Ok(TrainReport {
            epochs,
            initial_loss,
            final_loss: best,
        })
    }

    /// Predicts the value following `window`. Pure.
    pub fn predict_next(&self, window: &[f64]) -> Result<f64> {
        let scaler = self
            .scaler
            .ok_or_else(|| GadError::Usage("prediction from an untrained model".into()))?;
        if window.len() != self.trained_window {
            return Err(GadError::Usage(format!(
                "prediction window has {} values, model expects {}",
                window.len(),
                self.trained_window
            )));
        }
        let n = self.hp.hidden_units;
        let layout = Layout::new(n);
        let mut h = [0.0f64; MAX_HIDDEN_UNITS];
        let mut h_next = [0.0f64; MAX_HIDDEN_UNITS];
        let mut c = [0.0f64; MAX_HIDDEN_UNITS];
        let p = &self.params;
        for &raw in window {
            let x = scaler.forward(raw);
            for j in 0..n {
                let mut z = [0.0f64; 4];
                for (k, zk) in z.iter_mut().enumerate() {
                    let row = k * n + j;
                    let rec = &p[layout.w_rec.start + row * n..layout.w_rec.start + (row + 1) * n];
                    let mut acc = p[layout.w_in.start + row] * x + p[layout.bias.start + row];
                    for l in 0..n {
                        acc += rec[l] * h[l];
                    }
                    *zk = acc;
                }
                let i = sigmoid(z[GATE_INPUT]);
                let f = sigmoid(z[GATE_FORGET]);
                let g = z[GATE_CELL].tanh();
                let o = sigmoid(z[GATE_OUTPUT]);
                c[j] = f * c[j] + i * g;
                h_next[j] = o * c[j].tanh();
            }
            h[..n].copy_from_slice(&h_next[..n]);
        }
        let mut y = p[layout.b_out];
        for j in 0..n {
            y += p[layout.w_out.start + j] * h[j];
        }
        let out = scaler.inverse(y);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(GadError::Data("non-finite prediction".into()))
        }
    }

    /// Mean squared one-step error on an already-normalized sequence, with
    /// its gradient written into `grad`.
    pub fn loss_and_gradient(&self, normalized: &[f64], grad: &mut [f64]) -> f64 {
        let mut work = Workspace::new(self.hp.hidden_units, normalized.len());
        self.loss_and_gradient_with(normalized, grad, &mut work)
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, normalized: &[f64]) -> f64 {
        let mut work = Workspace::new(self.hp.hidden_units, normalized.len());
        self.forward_sequence(normalized, &mut work)
    }

    fn forward_sequence(&self, xs: &[f64], work: &mut Workspace) -> f64 {
        let n = self.hp.hidden_units;
        let layout = Layout::new(n);
        let p = &self.params;
        let steps = xs.len();
        let pairs = steps - 1;
        let mut loss = 0.0;
        for t in 0..steps {
            let x = xs[t];
            let (h_prev, rest) = work.h.split_at_mut((t + 1) * n);
            let h_prev = &h_prev[t * n..];
            let h_cur = &mut rest[..n];
            let gates = &mut work.gates[t * 4 * n..(t + 1) * 4 * n];
            for row in 0..4 * n {
                let rec = &p[layout.w_rec.start + row * n..layout.w_rec.start + (row + 1) * n];
                let mut acc = p[layout.w_in.start + row] * x + p[layout.bias.start + row];
                for l in 0..n {
                    acc += rec[l] * h_prev[l];
                }
                gates[row] = if row / n == GATE_CELL { acc.tanh() } else { sigmoid(acc) };
            }
            let (c_prev, c_rest) = work.c.split_at_mut((t + 1) * n);
            let c_prev = &c_prev[t * n..];
            let c_cur = &mut c_rest[..n];
            let tanh_c = &mut work.tanh_c[t * n..(t + 1) * n];
            let mut y = p[layout.b_out];
            for j in 0..n {
                let i = gates[GATE_INPUT * n + j];
                let f = gates[GATE_FORGET * n + j];
                let g = gates[GATE_CELL * n + j];
                let o = gates[GATE_OUTPUT * n + j];
                c_cur[j] = f * c_prev[j] + i * g;
                tanh_c[j] = c_cur[j].tanh();
                h_cur[j] = o * tanh_c[j];
                y += p[layout.w_out.start + j] * h_cur[j];
            }
            work.y[t] = y;
            if t + 1 < steps {
                let e = y - xs[t + 1];
                loss += e * e;
            }
        }
        loss / pairs as f64
    }

    fn loss_and_gradient_with(&self, xs: &[f64], grad: &mut [f64], work: &mut Workspace) -> f64 {
        let loss = self.forward_sequence(xs, work);
        let n = self.hp.hidden_units;
        let layout = Layout::new(n);
        let p = &self.params;
        let steps = xs.len();
        let pairs = (steps - 1) as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        work.dh_next[..n].iter_mut().for_each(|v| *v = 0.0);
        work.dc_next[..n].iter_mut().for_each(|v| *v = 0.0);

        for t in (0..steps).rev() {
            let dy = if t + 1 < steps {
                2.0 * (work.y[t] - xs[t + 1]) / pairs
            } else {
                0.0
            };
            let h_cur = &work.h[(t + 1) * n..(t + 2) * n];
            let h_prev = &work.h[t * n..(t + 1) * n];
            let c_prev = &work.c[t * n..(t + 1) * n];
            let gates = &work.gates[t * 4 * n..(t + 1) * 4 * n];
            let tanh_c = &work.tanh_c[t * n..(t + 1) * n];

            grad[layout.b_out] += dy;
            for j in 0..n {
                grad[layout.w_out.start + j] += dy * h_cur[j];
                let dh = p[layout.w_out.start + j] * dy + work.dh_next[j];
                let i = gates[GATE_INPUT * n + j];
                let f = gates[GATE_FORGET * n + j];
                let g = gates[GATE_CELL * n + j];
                let o = gates[GATE_OUTPUT * n + j];
                let dc = dh * o * (1.0 - tanh_c[j] * tanh_c[j]) + work.dc_next[j];
                work.dz[GATE_INPUT * n + j] = dc * g * i * (1.0 - i);
                work.dz[GATE_FORGET * n + j] = dc * c_prev[j] * f * (1.0 - f);
                work.dz[GATE_CELL * n + j] = dc * i * (1.0 - g * g);
                work.dz[GATE_OUTPUT * n + j] = dh * tanh_c[j] * o * (1.0 - o);
                work.dc_next[j] = dc * f;
            }
            work.dh_next[..n].iter_mut().for_each(|v| *v = 0.0);
            for row in 0..4 * n {
                let dz = work.dz[row];
                grad[layout.w_in.start + row] += dz * xs[t];
                grad[layout.bias.start + row] += dz;
                let base = layout.w_rec.start + row * n;
                for l in 0..n {
                    grad[base + l] += dz * h_prev[l];
                    work.dh_next[l] += p[base + l] * dz;
                }
            }
        }
        loss
    }
}

/// Per-sequence activations kept for backpropagation.
struct Workspace {
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
    y: Vec<f64>,
    dz: Vec<f64>,
    dh_next: Vec<f64>,
    dc_next: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, steps: usize) -> Self {
        Self {
            gates: vec![0.0; steps * 4 * n],
            c: vec![0.0; (steps + 1) * n],
            h: vec![0.0; (steps + 1) * n],
            tanh_c: vec![0.0; steps * n],
            y: vec![0.0; steps],
            dz: vec![0.0; 4 * n],
            dh_next: vec![0.0; n],
            dc_next: vec![0.0; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_layout() {
        assert_eq!(parameter_count(10), 491);
        let model = init_model(HyperParams::converter()).unwrap();
        assert_eq!(model.parameters().len(), 491);
        let total: usize = ParamGroup::ALL.iter().map(|g| g.range(10).len()).sum();
        assert_eq!(total, 491);
        assert_eq!(ParamGroup::OutputBias.range(10), 490..491);
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_model(HyperParams::converter()).unwrap();
        let b = init_model(HyperParams::converter()).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        let c = init_model(HyperParams::converter().with_seed(7)).unwrap();
        assert_ne!(a.parameters(), c.parameters());
        assert!(!a.is_trained());
    }

    #[test]
    fn init_respects_glorot_limits() {
        let model = init_model(HyperParams::converter()).unwrap();
        let p = model.parameters();
        let lim_in = (6.0f64 / 41.0).sqrt();
        let lim_rec = (6.0f64 / 50.0).sqrt();
        assert!(p[ParamGroup::InputWeights.range(10)].iter().all(|w| w.abs() <= lim_in));
        assert!(p[ParamGroup::RecurrentWeights.range(10)].iter().all(|w| w.abs() <= lim_rec));
        let bias = &p[ParamGroup::GateBias.range(10)];
        assert!(bias[10..20].iter().all(|&b| b == 1.0));
        assert!(bias[..10].iter().chain(&bias[20..]).all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_bad_hyper_params() {
        let bad = [
            HyperParams { learning_rate: 0.0, ..HyperParams::converter() },
            HyperParams { learning_rate: f64::NAN, ..HyperParams::converter() },
            HyperParams { hidden_units: 0, ..HyperParams::converter() },
            HyperParams { hidden_layers: 2, ..HyperParams::converter() },
            HyperParams { max_epochs: 0, ..HyperParams::detector() },
        ];
        for hp in bad {
            assert!(matches!(init_model(hp), Err(GadError::Config(_))), "{hp:?}");
        }
    }

    #[test]
    fn constant_window_predicts_constant() {
        let mut model = init_model(HyperParams::converter()).unwrap();
        let window = vec![5.0; 40];
        model.train(&window).unwrap();
        let pred = model.predict_next(&window).unwrap();
        assert!((pred - 5.0).abs() <= 0.05 * 5.0);
    }

    #[test]
    fn training_is_deterministic() {
        let window: Vec<f64> = (0..40).map(|t| 9.8 + (t as f64 * 0.3).sin()).collect();
        let mut a = init_model(HyperParams::converter()).unwrap();
        let mut b = init_model(HyperParams::converter()).unwrap();
        a.train(&window).unwrap();
        b.train(&window).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.predict_next(&window).unwrap(), b.predict_next(&window).unwrap());
    }

    #[test]
    fn training_does_not_increase_loss() {
        let window: Vec<f64> = (0..30).map(|t| 9.8 + 2.0 * (t as f64 * 0.4).sin()).collect();
        let mut model = init_model(HyperParams::converter()).unwrap();
        let report = model.train(&window).unwrap();
        assert!(report.final_loss <= report.initial_loss);
        assert!(report.epochs >= 1 && report.epochs <= 100);
        assert!(model.parameters().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn training_errors() {
        let mut model = init_model(HyperParams::detector()).unwrap();
        assert!(matches!(model.train(&[1.0]), Err(GadError::Training(_))));
        assert!(matches!(model.train(&[1.0, f64::NAN, 2.0]), Err(GadError::Data(_))));
    }

    #[test]
    fn prediction_preconditions() {
        let mut model = init_model(HyperParams::detector()).unwrap();
        assert!(matches!(model.predict_next(&[1.0, 2.0, 3.0]), Err(GadError::Usage(_))));
        model.train(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(model.predict_next(&[1.0, 2.0]), Err(GadError::Usage(_))));
        let a = model.predict_next(&[1.0, 2.0, 3.0]).unwrap();
        let b = model.predict_next(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn predict_matches_training_forward_pass() {
        let window: Vec<f64> = (0..12).map(|t| 3.0 + (t as f64).cos()).collect();
        let mut model = init_model(HyperParams::converter()).unwrap();
        model.train(&window).unwrap();
        let scaler = *model.scaler().unwrap();
        let xs: Vec<f64> = window.iter().map(|&v| scaler.forward(v)).collect();
        let mut work = Workspace::new(10, xs.len());
        model.forward_sequence(&xs, &mut work);
        let via_training = scaler.inverse(work.y[xs.len() - 1]);
        let via_predict = model.predict_next(&window).unwrap();
        assert!((via_training - via_predict).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_is_lossless() {
        let window: Vec<f64> = (0..20).map(|t| 9.8 + 0.1 * t as f64).collect();
        let mut model = init_model(HyperParams::converter()).unwrap();
        model.train(&window).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back: PredictionModel = serde_json::from_str(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn scaler_handles_flat_windows() {
        let s = Scaler::fit(&[2.0, 2.0, 2.0]);
        assert_eq!(s.forward(7.0), 0.0);
        assert_eq!(s.inverse(0.3), 2.0);
        let s = Scaler::fit(&[1.0, 3.0]);
        assert_eq!(s.forward(1.0), -1.0);
        assert_eq!(s.forward(3.0), 1.0);
        assert_eq!(s.inverse(0.0), 2.0);
    }
}
