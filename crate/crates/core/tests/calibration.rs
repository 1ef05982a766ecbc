mod common;

use std::f64::consts::PI;

use ellipsometer::calibration::{
    calibrate_qwp_offsets, collect_offset_samples, dynamic_offset, fit_contrast_threshold,
    frame_windows, median_threshold, reference_qwp, GridSearchConfig, OffsetError, RampTrial,
    TimingError,
};
use ellipsometer::events::TriggerRecord;
use ellipsometer::sim::{
    emit_triggers, simulate_ramp_set, simulate_scene, MaterialSpec, PixelSensor, RampSpec, Scene,
};
use rand::Rng;

fn ramp_trials(c_on: f64, c_off: f64, eta: f64, quantize: bool) -> Vec<RampTrial> {
    let ramps: Vec<RampSpec> = (0..3).flat_map(|_| RampSpec::up_down(20.0, 0.05)).collect();
    let sensor = PixelSensor::new(c_on, c_off, eta);
    let (starts, events) = simulate_ramp_set(2, 2, &ramps, 0.01, &sensor, 1e-7, quantize).unwrap();
    ramps
        .iter()
        .zip(starts)
        .map(|(r, t0)| RampTrial {
            a: r.a,
            b: r.b,
            t0,
            events: events
                .iter()
                .filter(|e| e.t >= t0 && e.t <= t0 + r.duration)
                .copied()
                .collect(),
        })
        .collect()
}

#[test]
fn thresholds_recovered_from_quantized_ramps() {
    for (c_on, c_off) in [(0.10, 0.10), (0.14, 0.19), (0.19, 0.14)] {
        let fits = fit_contrast_threshold(&ramp_trials(c_on, c_off, 2e-6, true), 2, 2, 2e-6);
        let on = median_threshold(fits.iter().map(|f| f.on)).unwrap();
        let off = median_threshold(fits.iter().map(|f| f.off)).unwrap();
        assert!((on / c_on - 1.0).abs() < 0.01, "C_on {on} vs {c_on}");
        assert!((off / c_off - 1.0).abs() < 0.01, "C_off {off} vs {c_off}");
    }
}

#[test]
fn thresholds_are_exact_without_quantization() {
    let fits = fit_contrast_threshold(&ramp_trials(0.14, 0.19, 0.0, false), 2, 2, 0.0);
    for f in fits {
        assert!((f.on.unwrap() - 0.14).abs() < 1e-6);
        assert!((f.off.unwrap() - 0.19).abs() < 1e-6);
    }
}

#[test]
fn missing_camera_trigger_skips_the_frame() {
    let mut t = emit_triggers(30.0 * PI, 0.0, &[0.1; 5]);
    t.off[2] = None;
    let w = frame_windows(&t);
    assert_eq!(w.len(), 5);
    assert!(matches!(w[2], Err(TimingError::MissingTrigger(2))));
    assert!(w.iter().enumerate().all(|(f, r)| f == 2 || r.is_ok()));
}

#[test]
fn irregular_frame_is_rejected() {
    let mut t = emit_triggers(30.0 * PI, 0.0, &[0.0; 6]);
    t.on[3] += 0.025;
    let w = frame_windows(&t);
    assert!(w[2].is_err() && w[3].is_err());
    assert!(w[0].is_ok() && w[5].is_ok());
    assert!(frame_windows(&TriggerRecord::default()).is_empty());
}

#[test]
fn dynamic_offset_inverts_trigger_lag() {
    let span = 1.0 / 30.0;
    let phi = PI / 10.0;
    let t_on = 0.5;
    let t_off = t_on - phi * span / PI;
    assert!((dynamic_offset(t_on, t_on + span, t_off) - phi).abs() < 1e-12);
}

fn reference_recording(phi1: f64, phi2: f64) -> ellipsometer::sim::SimulatedRecording {
    let m = reference_qwp(0.8).unwrap();
    let mut scene = Scene::uniform(2, 2, 2, MaterialSpec::Explicit(m.to_vectorized().0));
    scene.sensor.phi_calib1 = phi1;
    scene.sensor.phi_calib2 = phi2;
    scene.phi_dynamic = 0.05;
    scene.steps_per_frame = 50_000;
    simulate_scene(&scene).unwrap()
}

fn ring_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

#[test]
fn plate_offsets_recovered_within_a_cell() {
    let mut rng = common::rng(21);
    let cfg = GridSearchConfig::default();
    for _ in 0..3 {
        let (p1, p2) = (rng.random_range(0.0..PI), rng.random_range(0.0..PI));
        let rec = reference_recording(p1, p2);
        let samples = collect_offset_samples(
            &rec.stream.per_pixel(),
            &rec.stream.triggers,
            &rec.sensor,
            400,
        );
        let fit = calibrate_qwp_offsets(&samples, &reference_qwp(0.8).unwrap(), &cfg).unwrap();
        assert!(!fit.is_ambiguous());
        assert!(
            ring_distance(fit.phi_calib1, p1) <= cfg.step,
            "{} vs {p1}",
            fit.phi_calib1
        );
        assert!(
            ring_distance(fit.phi_calib2, p2) <= cfg.step,
            "{} vs {p2}",
            fit.phi_calib2
        );
        assert!(fit.score <= fit.grid_score);
    }
}

#[test]
fn offset_search_needs_samples() {
    let m = reference_qwp(0.8).unwrap();
    let err = calibrate_qwp_offsets(&[], &m, &GridSearchConfig::default()).unwrap_err();
    assert!(matches!(err, OffsetError::TooFewSamples { .. }));
}
