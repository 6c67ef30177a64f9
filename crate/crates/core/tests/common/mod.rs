//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use gad::lstm::PredictionModel;

pub fn ram_oracle(x: f64, y: f64, z: f64) -> f64 {
    (x * x + y * y + z * z).sqrt()
}

pub fn aare_oracle(pairs: &[(f64, f64)]) -> f64 {
    let total: f64 = pairs
        .iter()
        .map(|&(a, p)| (a - p).abs() / a.abs().max(1e-9))
        .sum();
    total / pairs.len() as f64
}

/// Mean plus three population standard deviations, computed in two passes.
pub fn threshold_oracle(history: &[f64]) -> Option<f64> {
    if history.len() < 3 {
        return None;
    }
    let n = history.len() as f64;
    let mean = history.iter().sum::<f64>() / n;
    let var = history.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(mean + 3.0 * var.sqrt())
}

/// Earliest 1-based index of the minimum over `series[first..=last]`.
pub fn scan_argmin(series: &[f64], first: usize, last: usize) -> usize {
    let mut best = first;
    for i in first..=last {
        if series[i - 1] < series[best - 1] {
            best = i;
        }
    }
    best
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Largest relative disagreement between the analytic gradient and central
/// differences. Entries where both are below `floor` in magnitude are
/// compared absolutely against `floor`.
pub fn gradient_check(model: &PredictionModel, xs: &[f64], h: f64, floor: f64) -> f64 {
    let mut analytic = vec![0.0; model.parameters().len()];
    model.loss_and_gradient(xs, &mut analytic);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let base = probe.parameters()[i];
        probe.parameters_mut()[i] = base + h;
        let up = probe.loss(xs);
        probe.parameters_mut()[i] = base - h;
        let down = probe.loss(xs);
        probe.parameters_mut()[i] = base;
        let numeric = (up - down) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max(err);
    }
    worst
}

/// Sawtooth with its minima every `period` samples starting at `first`,
/// plus a small deterministic ripple so no two minima tie exactly.
pub fn planted_series(period: usize, first: usize, n: usize, ripple_seed: u64) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let phase = (i + period - first % period) % period;
            let cycle = (i + period - first % period) / period;
            let ripple = (((cycle as u64).wrapping_mul(2654435761) ^ ripple_seed) % 997) as f64 * 1e-5;
            9.0 + phase as f64 * (2.0 / period as f64) + ripple
        })
        .collect()
}
