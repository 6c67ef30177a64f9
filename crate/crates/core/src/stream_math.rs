//! Numeric kernels shared by every stage: resultant magnitude, average
//! absolute relative error over a pair window, and the three-sigma
//! threshold kept as running Welford accumulators.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};

/// Denominator floor for relative errors when the actual value is ~0.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-9;

/// Minimum number of AARE values before a threshold exists.
pub const MIN_THRESHOLD_HISTORY: u64 = 3;

/// One 3-axis accelerometer reading. Units pass through untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelInstance {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelInstance {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self { ax, ay, az }
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }
}

/// Resultant acceleration magnitude of one sample.
pub fn ram(a: &AccelInstance) -> Result<f64> {
    if !a.is_finite() {
        return Err(GadError::Data(format!("non-finite accelerometer sample {a:?}")));
    }
    Ok((a.ax * a.ax + a.ay * a.ay + a.az * a.az).sqrt())
}

/// Bounded window of `(actual, predicted)` pairs, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWindow {
    capacity: usize,
    pairs: VecDeque<(f64, f64)>,
}

impl PairWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity + 1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.pairs.len() == self.capacity
    }

    /// Appends a pair, evicting the oldest one once the window is full.
    pub fn push(&mut self, actual: f64, predicted: f64) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((actual, predicted));
    }

    /// Overwrites the prediction of the newest pair.
    pub fn replace_last_prediction(&mut self, predicted: f64) -> Result<()> {
        match self.pairs.back_mut() {
            Some(last) => {
                last.1 = predicted;
                Ok(())
            }
            None => Err(GadError::Usage("pair window is empty".into())),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.pairs.iter()
    }
}

/// Average absolute relative error over a full pair window.
pub fn aare(window: &PairWindow) -> Result<f64> {
    if window.capacity == 0 || !window.is_full() {
        return Err(GadError::Usage(format!(
            "AARE needs {} pairs, window holds {}",
            window.capacity,
            window.len()
        )));
    }
    let sum: f64 = window
        .pairs
        .iter()
        .map(|&(actual, predicted)| {
            (actual - predicted).abs() / actual.abs().max(RELATIVE_ERROR_FLOOR)
        })
        .sum();
    Ok(sum / window.capacity as f64)
}

/// Running mean and population deviation of every AARE value seen so far.
///
/// The threshold `mean + 3 * sigma` exists once at least three values have
/// been accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdState {
    count: u64,
    mean: f64,
    m2: f64,
}

impl ThresholdState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation; zero for an empty history.
    pub fn std_dev(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).sqrt()
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        (self.count >= MIN_THRESHOLD_HISTORY).then(|| self.mean + 3.0 * self.std_dev())
    }

    /// Welford update with one new AARE value.
    pub fn update(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(GadError::Data(format!("invalid AARE value {value}")));
        }
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
        Ok(())
    }

    /// The state as it would be after `update(value)`, leaving `self` alone.
    pub fn with(&self, value: f64) -> Result<Self> {
        let mut next = *self;
        next.update(value)?;
        Ok(next)
    }
}

/// Functional form of [`ThresholdState::update`].
pub fn threshold_update(state: ThresholdState, value: f64) -> Result<ThresholdState> {
    state.with(value)
}

/// 1-based stream index of the minimum of `values`, whose first element sits
/// at `base_index`. Ties go to the earliest index.
pub fn argmin_index(values: &[f64], base_index: usize) -> Result<usize> {
    let mut iter = values.iter().enumerate();
    let (mut best_pos, mut best) = match iter.next() {
        Some((pos, &v)) => (pos, v),
        None => return Err(GadError::Usage("argmin of an empty sequence".into())),
    };
    for (pos, &v) in iter {
        if v < best {
            best = v;
            best_pos = pos;
        }
    }
    Ok(base_index + best_pos)
}
