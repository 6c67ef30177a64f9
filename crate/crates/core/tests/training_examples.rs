use gad::lstm::{init_model, HyperParams};

/// One-step predictions over the period after the training window, each
/// from the 40 values before it, against the analytic continuation.
fn sine_continuation_rms(hp: HyperParams) -> f64 {
    let signal = |t: usize| 9.8 + (std::f64::consts::TAU * t as f64 / 40.0).sin();
    let window: Vec<f64> = (0..40).map(signal).collect();
    let mut model = init_model(hp).unwrap();
    model.train(&window).unwrap();
    let sq: f64 = (40..80)
        .map(|t| {
            let context: Vec<f64> = (t - 40..t).map(signal).collect();
            let err = model.predict_next(&context).unwrap() - signal(t);
            err * err
        })
        .sum();
    (sq / 40.0).sqrt()
}

#[test]
fn sine_continuation_with_the_converter_profile() {
    let rms = sine_continuation_rms(HyperParams::converter());
    assert!(rms < 0.15, "rms {rms}");
}

#[test]
fn constant_window_is_reproduced() {
    for hp in [HyperParams::converter(), HyperParams::detector()] {
        let mut model = init_model(hp).unwrap();
        model.train(&[5.0; 40]).unwrap();
        let p = model.predict_next(&[5.0; 40]).unwrap();
        assert!((p - 5.0).abs() <= 0.05 * 5.0, "{p}");
    }
}
