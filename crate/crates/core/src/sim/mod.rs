//! Event-camera simulator driven by the analytic intensity model.
//!
//! The generator tracks a reference log intensity per pixel and emits an
//! event whenever the current log intensity moves `C_on` above or `C_off`
//! below it. The signal is sampled on a fixed step and interpolated linearly
//! in log space to place crossings inside a step. After an event the pixel is
//! blind for the refractory period `η`; the reference is re-armed with the
//! log intensity at the moment the pixel becomes sensitive again, so the gap
//! `t_{k+1} − t_k − η` is exactly the time the signal needs to move by one
//! threshold.

mod noise;
mod scene;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::events::{Event, Polarity, TriggerRecord};
use crate::forward::{system_row, ModulationState, SPEED_RATIO};
use crate::mueller::{MuellerMatrix, VectorizedMueller};

pub use noise::{inject_noise, inject_pixel_noise, NoiseConfig, NoiseUnit};
pub use scene::{
    simulate_scene, Material, MaterialSpec, Rect, Region, Scene, SensorConfig, SimulatedRecording,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("intensity {value} at t = {t} s is not positive")]
    NonPositiveIntensity { t: f64, value: f64 },
    #[error("region {region} produces nonpositive intensity {value} at t = {t} s")]
    NonPositiveRegion { region: usize, t: f64, value: f64 },
    #[error("simulation step must be positive, got {0}")]
    BadStep(f64),
    #[error("empty recording")]
    EmptyRecording,
    #[error("invalid sensor: {0}")]
    BadSensor(String),
    #[error("invalid ramp: a = {a}, b = {b}, duration = {duration}")]
    BadRamp { a: f64, b: f64, duration: f64 },
    #[error("invalid scene: {0}")]
    BadScene(String),
}

/// Threshold and dead-time behaviour of one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSensor {
    pub contrast_on: f64,
    pub contrast_off: f64,
    /// Refractory period in seconds.
    pub refractory: f64,
}

impl PixelSensor {
    pub fn new(contrast_on: f64, contrast_off: f64, refractory: f64) -> Self {
        Self {
            contrast_on,
            contrast_off,
            refractory,
        }
    }

    pub fn symmetric(contrast: f64) -> Self {
        Self::new(contrast, contrast, 0.0)
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = self.contrast_on.is_finite()
            && self.contrast_on > 0.0
            && self.contrast_off.is_finite()
            && self.contrast_off > 0.0
            && self.refractory.is_finite()
            && self.refractory >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::BadSensor(format!("{self:?}")))
        }
    }
}

/// Rounds a timestamp to the sensor's 1 µs resolution.
pub fn quantize_us(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Emits `(time, polarity)` pairs for an arbitrary positive intensity signal
/// sampled every `step` seconds over `[t_start, t_end]`.
pub fn simulate_signal<F>(
    intensity: F,
    t_start: f64,
    t_end: f64,
    step: f64,
    sensor: &PixelSensor,
) -> Result<Vec<(f64, Polarity)>, SimError>
where
    F: Fn(f64) -> f64,
{
    sensor.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(SimError::BadStep(step));
    }
    let log_at = |t: f64| {
        let v = intensity(t);
        if v > 0.0 && v.is_finite() {
            Ok(v.ln())
        } else {
            Err(SimError::NonPositiveIntensity { t, value: v })
        }
    };
    let mut out = Vec::new();
    let mut l_ref = log_at(t_start)?;
    if !(t_end > t_start) {
        return Ok(out);
    }
    let n_steps = ((t_end - t_start) / step).ceil().max(1.0) as usize;
    let eta = sensor.refractory;
    // The pixel is blind before `ready`; the reference is re-armed there.
    let mut ready = t_start;
    let mut rearm = false;
    let (mut t0, mut l0) = (t_start, l_ref);
    for k in 1..=n_steps {
        let t1 = if k == n_steps {
            t_end
        } else {
            t_start + k as f64 * step
        };
        let l1 = log_at(t1)?;
        let slope = (l1 - l0) / (t1 - t0);
        let at = |t: f64| l0 + slope * (t - t0);
        let mut s = t0.max(ready);
        while s < t1 {
            if rearm {
                l_ref = at(s);
                rearm = false;
            }
            let up = l_ref + sensor.contrast_on;
            let down = l_ref - sensor.contrast_off;
            let ls = at(s);
            let (tc, polarity) = if ls >= up {
                (s, Polarity::On)
            } else if ls <= down {
                (s, Polarity::Off)
            } else if slope > 0.0 && l1 >= up {
                (t0 + (up - l0) / slope, Polarity::On)
            } else if slope < 0.0 && l1 <= down {
                (t0 + (down - l0) / slope, Polarity::Off)
            } else {
                break;
            };
            let tc = tc.clamp(s, t1);
            out.push((tc, polarity));
            if eta == 0.0 {
                l_ref = if polarity == Polarity::On { up } else { down };
                s = tc;
            } else {
                ready = tc + eta;
                rearm = true;
                s = ready;
            }
        }
        t0 = t1;
        l0 = l1;
    }
    Ok(out)
}

/// Rotation schedule of a recording: both plates, their fixed offsets and
/// the per-frame dynamic phase lag of the camera-side plate.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub omega: f64,
    pub t_start: f64,
    pub phi_calib1: f64,
    pub phi_calib2: f64,
    /// One entry per frame.
    pub phi_dynamic: Vec<f64>,
}

impl Schedule {
    pub fn frames(&self) -> usize {
        self.phi_dynamic.len()
    }

    pub fn frame_duration(&self) -> f64 {
        PI / self.omega
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.frames() as f64 * self.frame_duration()
    }

    pub fn frame_of(&self, t: f64) -> usize {
        let f = ((t - self.t_start) / self.frame_duration()).floor();
        (f.max(0.0) as usize).min(self.frames().saturating_sub(1))
    }

    /// Modulation state at absolute time `t`.
    pub fn state(&self, t: f64) -> ModulationState {
        let f = self.frame_of(t);
        ModulationState::new(
            self.omega,
            t - self.t_start,
            self.phi_calib1,
            self.phi_calib2 - SPEED_RATIO * self.phi_dynamic[f],
        )
    }

    pub fn intensity(&self, t: f64, m: &VectorizedMueller) -> f64 {
        system_row(&self.state(t)).intensity(m)
    }

    pub fn triggers(&self) -> TriggerRecord {
        emit_triggers(self.omega, self.t_start, &self.phi_dynamic)
    }
}

/// Trigger record for `phase_offsets.len()` frames starting at `t_start`:
/// light-side triggers `π/ω` apart, camera-side triggers shifted so the
/// frame's dynamic offset reads back as the configured value.
pub fn emit_triggers(omega: f64, t_start: f64, phase_offsets: &[f64]) -> TriggerRecord {
    let frames = phase_offsets.len();
    let span = PI / omega;
    let on: Vec<f64> = (0..=frames).map(|f| t_start + f as f64 * span).collect();
    let off = (0..=frames)
        .map(|f| {
            let phi = phase_offsets[f.min(frames.saturating_sub(1))];
            Some(on[f] - phi * span / PI)
        })
        .collect();
    if frames == 0 {
        return TriggerRecord {
            on: vec![],
            off: vec![],
        };
    }
    TriggerRecord { on, off }
}

/// Adds Gaussian timing noise of `sigma` seconds to every trigger.
pub fn jitter_triggers(triggers: &mut TriggerRecord, sigma: f64, seed: u64) {
    use rand_distr::{Distribution, Normal};
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = crate::rng::keyed_rng(seed, &[crate::rng::stream::TRIGGER_JITTER]);
    for t in triggers.on.iter_mut() {
        *t += normal.sample(&mut rng);
    }
    for t in triggers.off.iter_mut().flatten() {
        *t += normal.sample(&mut rng);
    }
}

/// Events of one pixel observing `m` for the whole schedule.
pub fn simulate_pixel(
    m: &MuellerMatrix,
    schedule: &Schedule,
    sensor: &PixelSensor,
    step: f64,
    x: u16,
    y: u16,
) -> Result<Vec<Event>, SimError> {
    if schedule.frames() == 0 {
        return Err(SimError::EmptyRecording);
    }
    let v = m.to_vectorized();
    let raw = simulate_signal(
        |t| schedule.intensity(t, &v),
        schedule.t_start,
        schedule.t_end(),
        step,
        sensor,
    )?;
    Ok(raw
        .into_iter()
        .map(|(t, p)| Event::new(x, y, t, p))
        .collect())
}

/// Events of pixel `(0, 0)` under the linear ramp `I(t) = a·t + b`,
/// `t ∈ [0, duration]`.
pub fn simulate_ramp_stimulus(
    a: f64,
    b: f64,
    duration: f64,
    sensor: &PixelSensor,
    step: f64,
) -> Result<Vec<Event>, SimError> {
    let valid = a.is_finite()
        && b.is_finite()
        && duration.is_finite()
        && duration > 0.0
        && b > 0.0
        && a * duration + b > 0.0;
    if !valid {
        return Err(SimError::BadRamp { a, b, duration });
    }
    let raw = simulate_signal(|t| a * t + b, 0.0, duration, step, sensor)?;
    Ok(raw
        .into_iter()
        .map(|(t, p)| Event::new(0, 0, t, p))
        .collect())
}

/// One linear ramp `I = a·(t − t0) + b` held for `duration` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub a: f64,
    pub b: f64,
    pub duration: f64,
}

impl RampSpec {
    /// Up and down ramps between intensities 1 and `ratio`, each lasting
    /// `duration` seconds.
    pub fn up_down(ratio: f64, duration: f64) -> [RampSpec; 2] {
        let a = (ratio - 1.0) / duration;
        [
            RampSpec {
                a,
                b: 1.0,
                duration,
            },
            RampSpec {
                a: -a,
                b: ratio,
                duration,
            },
        ]
    }
}

/// Plays `ramps` one after another, separated by `gap` seconds, on every
/// pixel of a `width × height` sensor. Returns each ramp's start time and
/// the globally sorted events.
pub fn simulate_ramp_set(
    width: u16,
    height: u16,
    ramps: &[RampSpec],
    gap: f64,
    sensor: &PixelSensor,
    step: f64,
    quantize: bool,
) -> Result<(Vec<f64>, Vec<Event>), SimError> {
    if width == 0 || height == 0 || ramps.is_empty() {
        return Err(SimError::EmptyRecording);
    }
    let mut starts = Vec::with_capacity(ramps.len());
    let mut train = Vec::new();
    let mut t0 = 0.0;
    for r in ramps {
        let ev = simulate_ramp_stimulus(r.a, r.b, r.duration, sensor, step)?;
        starts.push(t0);
        train.extend(ev.into_iter().map(|e| {
            let t = e.t + t0;
            (if quantize { quantize_us(t) } else { t }, e.polarity)
        }));
        t0 += r.duration + gap;
    }
    let mut events = Vec::with_capacity(train.len() * width as usize * height as usize);
    for &(t, p) in &train {
        for y in 0..height {
            for x in 0..width {
                events.push(Event::new(x, y, t, p));
            }
        }
    }
    Ok((starts, events))
}
