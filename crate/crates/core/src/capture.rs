//! Gait segment capture from a RAM stream.
//!
//! `T_start` is the minimum of the first `warmup` values. In personalized
//! mode `T_end` is the minimum of `R[T_start + min_step ..= T_start + max_step]`
//! and `L = T_end - T_start`; uniform mode fixes `L` instead. Once the stream
//! reaches `T_start + cycles * L`, `T_fin` is the minimum of the last
//! `L + 1` values and the segment `R[T_start ..= T_fin]` is emitted. All
//! indices are 1-based and ties resolve to the earliest index.

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::stream_math::argmin_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptureMode {
    Personalized,
    Uniform,
}

impl std::fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaptureMode::Personalized => f.write_str("personalized"),
            CaptureMode::Uniform => f.write_str("uniform"),
        }
    }
}

impl std::str::FromStr for CaptureMode {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "personalized" => Ok(CaptureMode::Personalized),
            "uniform" => Ok(CaptureMode::Uniform),
            other => Err(GadError::Config(format!("unknown capture mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureParams {
    pub warmup: usize,
    pub min_step: usize,
    pub max_step: usize,
    pub cycles: usize,
    pub mode: CaptureMode,
    pub uniform_step: usize,
}

impl Default for CaptureParams {
    fn default() -> Self {
        Self {
            warmup: 46,
            min_step: 30,
            max_step: 80,
            cycles: 8,
            mode: CaptureMode::Personalized,
            uniform_step: 46,
        }
    }
}

impl CaptureParams {
    pub fn uniform() -> Self {
        Self {
            mode: CaptureMode::Uniform,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: CaptureMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup == 0 {
            return Err(GadError::Config("warmup must be at least 1".into()));
        }
        if self.min_step == 0 || self.min_step >= self.max_step {
            return Err(GadError::Config(format!(
                "step bounds must satisfy 0 < min_step < max_step, got {}..{}",
                self.min_step, self.max_step
            )));
        }
        if self.cycles < 2 {
            return Err(GadError::Config("a segment needs at least 2 cycles".into()));
        }
        // The emission index must not fall before the point where L is known.
        if self.cycles * self.min_step < self.max_step {
            return Err(GadError::Config(
                "cycles * min_step must be at least max_step".into(),
            ));
        }
        if self.mode == CaptureMode::Uniform
            && (self.uniform_step == 0 || self.cycles * self.uniform_step + 1 < self.warmup)
        {
            return Err(GadError::Config(format!(
                "uniform step {} too short for warmup {}",
                self.uniform_step, self.warmup
            )));
        }
        Ok(())
    }

    /// Longest span of samples needed to capture and verify over `steps`
    /// further steps, whatever the measured step length turns out to be.
    pub fn required_samples(&self, steps: usize) -> usize {
        let longest = match self.mode {
            CaptureMode::Personalized => self.max_step,
            CaptureMode::Uniform => self.max_step.max(self.uniform_step),
        };
        self.warmup + (self.cycles + steps) * longest
    }
}

/// Captured RAM subsequence covering `cycles` gait cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitSegment {
    pub values: Vec<f64>,
    pub t_start: usize,
    pub t_end: usize,
    pub t_fin: usize,
    pub step_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapturePhase {
    Warming,
    SearchingStep,
    Extending,
    Emitted,
}

#[derive(Debug, Clone)]
pub struct CaptureState {
    params: CaptureParams,
    buffer: Vec<f64>,
    t_start: Option<usize>,
    t_end: Option<usize>,
    step_len: Option<usize>,
    emitted: bool,
}

impl CaptureState {
    pub fn new(params: CaptureParams) -> Result<Self> {
        params.validate()?;
        let step_len = match params.mode {
            CaptureMode::Personalized => None,
            CaptureMode::Uniform => Some(params.uniform_step),
        };
        Ok(Self {
            params,
            buffer: Vec::with_capacity(params.warmup + params.cycles * params.max_step),
            t_start: None,
            t_end: None,
            step_len,
            emitted: false,
        })
    }

    pub fn params(&self) -> &CaptureParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn step_len(&self) -> Option<usize> {
        self.step_len
    }

    pub fn phase(&self) -> CapturePhase {
        if self.emitted {
            CapturePhase::Emitted
        } else if self.t_start.is_none() {
            CapturePhase::Warming
        } else if self.step_len.is_none() {
            CapturePhase::SearchingStep
        } else {
            CapturePhase::Extending
        }
    }

    /// Buffered value at 1-based stream index `index`.
    pub fn value_at(&self, index: usize) -> Option<f64> {
        index.checked_sub(1).and_then(|i| self.buffer.get(i).copied())
    }

    /// Buffered values strictly after 1-based index `index`.
    pub fn values_after(&self, index: usize) -> &[f64] {
        &self.buffer[index.min(self.buffer.len())..]
    }

    fn range(&self, first: usize, last: usize) -> &[f64] {
        &self.buffer[first - 1..last]
    }

    pub fn feed(&mut self, value: f64) -> Result<Option<GaitSegment>> {
        if self.emitted {
            return Err(GadError::Usage("capture already emitted its segment".into()));
        }
        if !value.is_finite() {
            return Err(GadError::Data(format!("non-finite RAM value {value}")));
        }
        self.buffer.push(value);
        let i = self.buffer.len();
        let p = self.params;

        if i == p.warmup {
            self.t_start = Some(argmin_index(self.range(1, p.warmup), 1)?);
        }
        let Some(t_start) = self.t_start else {
            return Ok(None);
        };

        if p.mode == CaptureMode::Personalized && self.step_len.is_none() && i == t_start + p.max_step {
            let first = t_start + p.min_step;
            let t_end = argmin_index(self.range(first, t_start + p.max_step), first)?;
            self.t_end = Some(t_end);
            self.step_len = Some(t_end - t_start);
        }
        let Some(step) = self.step_len else {
            return Ok(None);
        };

        if i == t_start + p.cycles * step {
            let first = t_start + (p.cycles - 1) * step;
            let t_fin = argmin_index(self.range(first, i), first)?;
            self.emitted = true;
            return Ok(Some(GaitSegment {
                values: self.range(t_start, t_fin).to_vec(),
                t_start,
                t_end: self.t_end.unwrap_or(t_start + step),
                t_fin,
                step_len: step,
            }));
        }
        Ok(None)
    }
}

/// Functional form of [`CaptureState::new`].
pub fn capture_new(params: CaptureParams) -> Result<CaptureState> {
    CaptureState::new(params)
}

/// Functional form of [`CaptureState::feed`].
pub fn capture_feed(state: &mut CaptureState, value: f64) -> Result<Option<GaitSegment>> {
    state.feed(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Period-40 sawtooth with its minima at 10, 50, 90, ...; the one at 330
    /// is planted slightly deeper so the last cycle window has a unique minimum.
    fn planted(n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| {
                let phase = (i + 40 - 10) % 40;
                let dip = if i == 330 { 0.01 } else { 0.0 };
                9.0 + phase as f64 * 0.05 - dip
            })
            .collect()
    }

    fn run(params: CaptureParams, series: &[f64]) -> (GaitSegment, usize) {
        let mut c = CaptureState::new(params).unwrap();
        for (k, &v) in series.iter().enumerate() {
            if let Some(seg) = c.feed(v).unwrap() {
                return (seg, k + 1);
            }
        }
        panic!("no segment emitted");
    }

    /// Independent scan: earliest minimum over the 1-based inclusive range.
    fn scan(series: &[f64], first: usize, last: usize) -> usize {
        let mut best = first;
        for i in first..=last {
            if series[i - 1] < series[best - 1] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn new_capture_is_warming() {
        let c = capture_new(CaptureParams::default()).unwrap();
        assert_eq!(c.phase(), CapturePhase::Warming);
        assert!(c.is_empty());
        let u = capture_new(CaptureParams::uniform()).unwrap();
        assert_eq!(u.step_len(), Some(46));
        let bad = CaptureParams { min_step: 80, ..CaptureParams::default() };
        assert!(matches!(capture_new(bad), Err(GadError::Config(_))));
    }

    #[test]
    fn planted_minima_personalized() {
        let series = planted(400);
        let (seg, emitted_at) = run(CaptureParams::default(), &series);
        assert_eq!(seg.t_start, scan(&series, 1, 46));
        assert_eq!(seg.t_end, scan(&series, 40, 90));
        assert_eq!(seg.t_fin, scan(&series, 290, 330));
        assert_eq!(seg.t_start, 10);
        assert_eq!(seg.t_end, 50);
        assert_eq!(seg.step_len, 40);
        assert_eq!(seg.t_fin, 330);
        assert_eq!(seg.values.len(), 321);
        assert_eq!(emitted_at, 330);
        assert_eq!(seg.values[..], series[9..330]);
    }

    #[test]
    fn planted_minima_uniform() {
        let series = planted(500);
        let (seg, emitted_at) = run(CaptureParams::uniform(), &series);
        assert_eq!(seg.t_start, 10);
        assert_eq!(seg.step_len, 46);
        assert_eq!(seg.t_end, 56);
        let t_fin = scan(&series, 10 + 7 * 46, 10 + 8 * 46);
        assert_eq!(seg.t_fin, t_fin);
        assert_eq!(emitted_at, 10 + 8 * 46);
    }

    #[test]
    fn constant_series_takes_earliest_minima() {
        let series = vec![9.8; 300];
        let (seg, _) = run(CaptureParams::default(), &series);
        assert_eq!(seg.t_start, 1);
        assert_eq!(seg.t_end, 31);
        assert_eq!(seg.step_len, 30);
        assert_eq!(seg.t_fin, 1 + 7 * 30);
    }

    #[test]
    fn feed_after_emission_fails() {
        let series = planted(400);
        let mut c = CaptureState::new(CaptureParams::default()).unwrap();
        let mut done = false;
        for &v in &series {
            if done {
                assert!(matches!(c.feed(v), Err(GadError::Usage(_))));
                break;
            }
            done = c.feed(v).unwrap().is_some();
        }
        assert_eq!(c.phase(), CapturePhase::Emitted);
        assert_eq!(c.values_after(330).len(), 0);
    }

    #[test]
    fn replay_is_deterministic() {
        let series: Vec<f64> = (0..800).map(|t| 9.8 + ((t * 37 % 101) as f64) * 0.01).collect();
        let a = run(CaptureParams::default(), &series);
        let b = run(CaptureParams::default(), &series);
        assert_eq!(a, b);
        let (seg, _) = a;
        assert!((30..=80).contains(&seg.step_len));
        let l = seg.step_len;
        assert!(seg.t_fin >= seg.t_start + 7 * l && seg.t_fin <= seg.t_start + 8 * l);
    }
}
